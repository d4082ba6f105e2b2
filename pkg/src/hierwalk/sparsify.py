"""Dense hierarchical graphs from a target effective Hamiltonian, plus
Poisson and Birkhoff-von-Neumann sparsification with restructuring."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph

from .core import HierarchicalGraph, SupergraphSpec
from .errors import (NoPerfectMatching, NotDoublyStochastic,
                     ProbabilityOverflow, Reducible, SizeUnderflow, TripleEdge)


@dataclass
class DenseHierarchical:
    """Weighted complete-bipartite-block graph realizing a hopping matrix.

    Sizes are proportional to the squared Perron vector, so every vertex has
    weighted degree lam (up to size rounding, whose worst row deviation is
    reported).
    """

    t: np.ndarray
    lam: float
    pi: np.ndarray
    sizes: np.ndarray
    row_sum_dev: float

    @property
    def n_blocks(self) -> int:
        return len(self.sizes)

    @property
    def n_total(self) -> int:
        return int(self.sizes.sum())

    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])

    def membership(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_blocks), self.sizes)

    def block_weight(self, u: int, v: int) -> float:
        """Per-edge weight within block (u, v)."""
        su, sv = self.sizes[u], self.sizes[v]
        if u == v:
            return self.t[u, u] / (su - 1) if self.t[u, u] else 0.0
        return self.t[u, v] / math.sqrt(su * sv)

    def full_adjacency(self) -> np.ndarray:
        n = self.n_total
        a = np.zeros((n, n))
        off = self.offsets()
        k = self.n_blocks
        for u in range(k):
            for v in range(u, k):
                w = self.block_weight(u, v)
                if w == 0.0:
                    continue
                a[off[u]:off[u + 1], off[v]:off[v + 1]] = w
                a[off[v]:off[v + 1], off[u]:off[u + 1]] = w
        np.fill_diagonal(a, 0.0)
        return a

    def edge_count(self, u: int, v: int) -> float:
        if u == v:
            return self.t[u, u] * self.sizes[u]
        return self.t[u, v] * math.sqrt(self.sizes[u] * self.sizes[v])


def dense_from_effective(t: np.ndarray, n_total: int) -> DenseHierarchical:
    """Supervertex sizes from the Perron vector, weights t_uv/sqrt(s_u s_v).

    Sizes are apportioned by largest remainder so they sum to ``n_total``
    exactly; any zero size raises ``SizeUnderflow``.
    """
    t = np.asarray(t, dtype=float)
    if not np.allclose(t, t.T):
        raise ValueError("hopping matrix must be symmetric")
    if np.any(t < 0):
        raise ValueError("hopping matrix must be nonnegative")
    n_comp, _ = csgraph.connected_components(sp.csr_matrix(t != 0), directed=False)
    if n_comp != 1:
        raise Reducible("hopping matrix graph is disconnected")
    evals, evecs = np.linalg.eigh(t)
    lam = float(evals[-1])
    v = evecs[:, -1]
    if v.sum() < 0:
        v = -v
    if np.any(v <= 0):
        raise Reducible("Perron vector not strictly positive")
    pi = v * v
    pi /= pi.sum()
    raw = n_total * pi
    sizes = np.floor(raw).astype(np.int64)
    rem = int(n_total - sizes.sum())
    order = np.argsort(-(raw - sizes))
    sizes[order[:rem]] += 1
    if np.any(sizes == 0):
        raise SizeUnderflow("some supervertex rounded to zero; increase n_total")

    dev = 0.0
    for u in range(len(sizes)):
        row = 0.0
        for w in range(len(sizes)):
            if w == u:
                row += t[u, u] / (sizes[u] - 1) * (sizes[u] - 1) if t[u, u] else 0.0
            else:
                row += t[u, w] / math.sqrt(sizes[u] * sizes[w]) * sizes[w]
        dev = max(dev, abs(row - lam))
    return DenseHierarchical(t=t, lam=lam, pi=pi, sizes=sizes, row_sum_dev=dev)


def _dense_spec(dense: DenseHierarchical, realized_counts: dict, degree: int,
                kind: str) -> SupergraphSpec:
    k = dense.n_blocks
    edges = sorted(realized_counts)
    return SupergraphSpec(
        vertices=list(range(k)),
        edges=[e for e in edges if e[0] != e[1]],
        sizes={u: int(dense.sizes[u]) for u in range(k)},
        edge_counts={e: c for e, c in realized_counts.items() if e[0] != e[1] and c > 0},
        degree=degree,
        diagonal_counts={u: c for (u, uu), c in realized_counts.items() if u == uu},
        init_vertex=0,
        exit_vertex=k - 1,
        degree_exempt=set(range(k)),
        metadata={"ensemble": kind, "lam": dense.lam},
    )


def _sample_distinct(rng: np.random.Generator, total: int, m: int) -> np.ndarray:
    if m == 0:
        return np.empty(0, dtype=np.int64)
    if m > total // 10:
        return rng.choice(total, size=m, replace=False)
    out: set[int] = set()
    while len(out) < m:
        out.update(rng.integers(0, total, size=m - len(out)).tolist())
    return np.fromiter(out, dtype=np.int64, count=m)


def poisson_sparsify(dense: DenseHierarchical, degree: int,
                     seed: int) -> tuple[HierarchicalGraph, float]:
    """Independent edge sampling with p_uv = (t_uv / sqrt(s_u s_v)) (D/lam).

    Every potential edge of every block is included independently, giving
    every vertex expected degree D.  Returns the unweighted graph and the
    weight scale lam/D (the walk matrix is scale times the adjacency).
    """
    rng = np.random.default_rng(seed)
    k = dense.n_blocks
    off = dense.offsets()
    edges = []
    counts: dict = {}
    for u in range(k):
        for v in range(u, k):
            w = dense.block_weight(u, v)
            if w == 0.0:
                continue
            p = w * degree / dense.lam
            if p > 1.0:
                raise ProbabilityOverflow(
                    f"p_{(u, v)} = {p:.3g} > 1; degree too large for this matrix")
            su, sv = int(dense.sizes[u]), int(dense.sizes[v])
            if u == v:
                total = su * (su - 1) // 2
                m = int(rng.binomial(total, p))
                flat = _sample_distinct(rng, total, m)
                # decode upper-triangle pair index
                i = (np.floor((2 * su - 1 - np.sqrt((2 * su - 1) ** 2 - 8 * flat)) / 2)
                     ).astype(np.int64)
                j = flat - i * (2 * su - 1 - i) // 2 + i + 1
                block_edges = np.stack([off[u] + i, off[u] + j], axis=1)
            else:
                total = su * sv
                m = int(rng.binomial(total, p))
                flat = _sample_distinct(rng, total, m)
                block_edges = np.stack([off[u] + flat // sv, off[v] + flat % sv], axis=1)
            if len(block_edges):
                edges.append(block_edges)
                counts[(u, v)] = len(block_edges)
    all_edges = np.concatenate(edges) if edges else np.empty((0, 2), dtype=np.int64)
    all_edges = np.sort(all_edges, axis=1)
    spec = _dense_spec(dense, counts, degree, "poisson_sparsified")
    graph = HierarchicalGraph(n=dense.n_total, edges=all_edges,
                              membership=dense.membership(), spec=spec)
    return graph, dense.lam / degree


# ---------------------------------------------------------------------------
# Birkhoff-von Neumann machinery
# ---------------------------------------------------------------------------

def bvn_decompose(m: np.ndarray, tol: float = 1e-9,
                  max_terms: int | None = None) -> list[tuple[float, np.ndarray]]:
    """Greedy Birkhoff decomposition of a doubly stochastic matrix.

    Repeatedly extracts a perfect matching on the positive support (maximum
    product weight) with the minimum matched entry as its coefficient.  Stops
    when the residual max-norm falls below 10*tol.
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    ones = np.ones(n)
    if (np.abs(m @ ones - 1).max() > max(tol, 1e-12) * 10
            or np.abs(m.T @ ones - 1).max() > max(tol, 1e-12) * 10):
        raise NotDoublyStochastic("row/column sums deviate from 1 beyond tolerance")
    if max_terms is None:
        max_terms = (n - 1) ** 2 + 1
    rem = m.copy()
    terms: list[tuple[float, np.ndarray]] = []
    floor = max(10 * tol, 1e-14)
    for _ in range(max_terms):
        if rem.max() <= floor:
            break
        with np.errstate(divide="ignore"):
            cost = -np.log(np.maximum(rem, 1e-300))
        rows, cols = scipy.optimize.linear_sum_assignment(cost)
        matched = rem[rows, cols]
        if matched.min() <= floor / n:
            raise NoPerfectMatching("positive support admits no perfect matching")
        weight = float(matched.min())
        perm = np.zeros((n, n))
        perm[rows, cols] = 1.0
        terms.append((weight, perm))
        rem[rows, cols] -= weight
    return terms


def _permutation_two_cycles(p: np.ndarray) -> list[tuple[int, int]]:
    idx = np.arange(len(p))
    mask = (p[p] == idx) & (p != idx)
    return [(int(i), int(p[i])) for i in idx[mask] if i < p[i]]


def _derangement(items: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if len(items) < 2:
        raise ValueError("derangement needs at least two items")
    while True:
        perm = rng.permutation(items)
        if np.all(perm != items):
            return perm


def two_cycle_partner(p: np.ndarray, membership: np.ndarray,
                      rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """f(P) = pi P pi^{-1} with pi deranging, per superedge, one side of the
    vertices in 2-cycles.  Returns the partner and the number of unmatched
    single 2-cycles (at most one per superedge)."""
    n = len(p)
    pi = np.arange(n)
    cycles = _permutation_two_cycles(p)
    groups: dict = {}
    for x, y in cycles:
        u, v = membership[x], membership[y]
        key = (u, v) if u <= v else (v, u)
        side = y if membership[y] >= membership[x] else x
        if u == v:
            side = max(x, y)
        groups.setdefault(key, []).append(side)
    unmatched = 0
    for key, side in groups.items():
        side = np.asarray(sorted(side))
        if len(side) < 2:
            unmatched += 1
            continue
        pi[side] = _derangement(side, rng)
    inv = np.empty(n, dtype=np.int64)
    inv[pi] = np.arange(n)
    return pi[p[inv]], unmatched


class _IntraCollision(Exception):
    pass


class BlockPermutationSampler:
    """Uniform permutations conditioned on integer block-level flows.

    The target block flow matrix T_uv = e_uv / lam lies in the transportation
    polytope with margins s; it is rounded once (largest remainder, respecting
    the budgets) and each sample assembles a uniformly random permutation with
    those flows, so E[P_{xy}] = f_uv / (s_u s_v) reproduces the dense weighted
    adjacency up to the sub-unit rounding of each block flow.  Uniformity
    within blocks makes the law invariant under within-supervertex
    conjugation, which is what the two-cycle partner construction needs.
    Leftover intra-block slack becomes fixed-point-free intra flow (weight-0
    blocks of the dense matrix; the deviation shows up honestly in the
    measured operator distance).
    """

    def __init__(self, dense: DenseHierarchical, rng: np.random.Generator):
        self.dense = dense
        self.rng = rng
        k = dense.n_blocks
        self.flows = {}
        for u in range(k):
            for v in range(u + 1, k):
                cnt = dense.edge_count(u, v)
                if cnt > 0:
                    self.flows[(u, v)] = cnt / dense.lam
        self.diag = {u: dense.edge_count(u, u) / dense.lam
                     for u in range(k) if dense.t[u, u] > 0}
        off = dense.offsets()
        self.block_vertices = [np.arange(off[u], off[u + 1]) for u in range(k)]

    def _rounded_flows(self) -> dict:
        """Largest-remainder rounding of the target flows with per-block
        budget repair; lam-regularity leaves no slack, so independent
        randomized rounding would overflow the supervertex sizes."""
        sizes = self.dense.sizes
        flow = {k: int(math.floor(v)) for k, v in self.flows.items()}
        frac = sorted(self.flows, key=lambda k: self.flows[k] - flow[k], reverse=True)

        def load(u):
            return sum(f for (a, b), f in flow.items() if u in (a, b))

        for key in frac:
            u, v = key
            if (self.flows[key] - flow[key] >= 0.5
                    and load(u) < sizes[u] and load(v) < sizes[v]):
                flow[key] += 1
        return flow

    def sample(self) -> np.ndarray:
        # tiny intra flows occasionally cannot dodge a fixed point; redraw
        for _ in range(100):
            try:
                return self._sample_once()
            except _IntraCollision:
                continue
        raise ValueError("intra flow keeps colliding; the spec is degenerate")

    def _sample_once(self) -> np.ndarray:
        rng = self.rng
        k = self.dense.n_blocks
        sizes = self.dense.sizes
        flow = self._rounded_flows()
        # intra flow takes whatever the cross flows leave over
        intra = np.array(sizes, dtype=np.int64)
        for (u, v), f in flow.items():
            intra[u] -= f
            intra[v] -= f
        if np.any(intra < 0):
            raise ValueError("rounded flows exceed supervertex sizes; "
                             "increase n_total or lower the degree")
        perm = np.empty(self.dense.n_total, dtype=np.int64)
        # build per-block source partitions and image partitions
        k_ids = range(k)
        src_parts = {u: rng.permutation(self.block_vertices[u]) for u in k_ids}
        dst_parts = {u: rng.permutation(self.block_vertices[u]) for u in k_ids}
        src_pos = {u: 0 for u in k_ids}
        dst_pos = {u: 0 for u in k_ids}

        def take(parts, pos, u, count):
            out = parts[u][pos[u]:pos[u] + count]
            pos[u] += count
            return out

        for (u, v), f in sorted(flow.items()):
            if f == 0:
                continue
            perm[take(src_parts, src_pos, u, f)] = take(dst_parts, dst_pos, v, f)
            perm[take(src_parts, src_pos, v, f)] = take(dst_parts, dst_pos, u, f)
        for u in k_ids:
            f = int(intra[u])
            if f == 0:
                continue
            src = take(src_parts, src_pos, u, f)
            dst = take(dst_parts, dst_pos, u, f)
            for _ in range(50):
                if not np.any(src == dst):
                    break
                dst = rng.permutation(dst)
            else:
                raise _IntraCollision
            perm[src] = dst
        return perm


@dataclass
class BvnResult:
    graph: HierarchicalGraph
    scale: float
    multiplicities: dict
    rewired: int
    unmatched_two_cycles: int
    rewire_norm_cost: float
    large: set = field(default_factory=set)


def bvn_sparsify(dense: DenseHierarchical, degree: int, seed: int,
                 large: set | None = None) -> BvnResult:
    """Sample D block permutations, symmetrize with the two-cycle partner,
    and rewire residual multi-edges inside large supervertices.

    The walk matrix is scale * adjacency with scale = lam / (2 D); every
    vertex of the output multigraph has multidegree exactly 2D.
    """
    rng = np.random.default_rng(seed)
    membership = dense.membership()
    sampler = BlockPermutationSampler(dense, rng)
    if large is None:
        large = {u for u in range(dense.n_blocks) if dense.sizes[u] > 3 * degree}

    # Each sample contributes (P + P^{-1} + f(P) + f(P)^{-1}) / 2.  Since f
    # agrees with P outside the 2-cycle vertices and deranges the 2-cycles
    # within, every undirected pair collects an even number of directed hits;
    # half that count is the edge multiplicity, at weight lam / (2 D) per
    # unit (rows of the multiplicity matrix sum to 2D).
    hits: dict = {}
    unmatched = 0

    def add_perm(p: np.ndarray):
        src = np.arange(len(p))
        for x, y in zip(src.tolist(), p.tolist()):
            if x == y:
                raise ValueError("permutation has a fixed point")
            key = (x, y) if x < y else (y, x)
            hits[key] = hits.get(key, 0) + 1

    for _ in range(degree):
        p = sampler.sample()
        f, un = two_cycle_partner(p, membership, rng)
        unmatched += un
        add_perm(p)
        add_perm(f)

    mult = {}
    for key, b in hits.items():
        if b % 2 != 0:
            raise ValueError(f"odd hit count at {key}; partner construction broken")
        mult[key] = b // 2

    # restructuring: peel multi-edges in large blocks down to multiplicity one
    # via the degree-preserving 4-vertex swap (a k-fold edge takes k-1 swaps;
    # at desk scale D is not far below the block sizes, so unlike the
    # asymptotic regime multiplicities above two do occur and are peeled too)
    rewired = 0
    multis = [k for k, m in mult.items()
              if m >= 2 and membership[k[0]] in large and membership[k[1]] in large]

    singles_by_block: dict = {}
    for (x, y), m in mult.items():
        if m == 1:
            u, v = membership[x], membership[y]
            key = (u, v) if u <= v else (v, u)
            singles_by_block.setdefault(key, []).append((x, y))

    def has_edge(x, y):
        return ((x, y) if x < y else (y, x)) in mult

    block_adj: dict = {}
    for (u, v) in singles_by_block:
        block_adj.setdefault(u, set()).add(v)
        block_adj.setdefault(v, set()).add(u)

    def peel_once(k) -> bool:
        alpha, beta = k
        u, v = membership[alpha], membership[beta]
        for (a_end, b_end, bv) in ((alpha, beta, v), (beta, alpha, u)):
            for w in sorted(block_adj.get(bv, ())):
                cand = singles_by_block.get((bv, w) if bv <= w else (w, bv), [])
                for idx in range(len(cand)):
                    g, dlt = cand[idx]
                    if membership[g] != bv:
                        g, dlt = dlt, g
                    if g in (a_end, b_end) or dlt in (a_end, b_end):
                        continue
                    if has_edge(a_end, g) or has_edge(b_end, dlt):
                        continue
                    # drop (g, dlt), shave one multiplicity, add two singles
                    cand.pop(idx)
                    gk = (g, dlt) if g < dlt else (dlt, g)
                    mult.pop(gk)
                    mult[k] -= 1
                    for nk in ((a_end, g), (b_end, dlt)):
                        nk = nk if nk[0] < nk[1] else (nk[1], nk[0])
                        mult[nk] = 1
                    return True
        return False

    for k in multis:
        while mult[k] > 1:
            if not peel_once(k):
                if mult[k] >= 3:
                    raise TripleEdge(f"could not peel multiplicity {mult[k]} at {k}")
                raise NoPerfectMatching("no usable single edge adjacent to a multi-edge")
            rewired += 1

    scale = dense.lam / (2 * degree)
    rows = []
    counts: dict = {}
    for (x, y), m in mult.items():
        u, v = membership[x], membership[y]
        key = (int(u), int(v)) if u <= v else (int(v), int(u))
        counts[key] = counts.get(key, 0) + m
        rows.extend([(x, y)] * m)
    edges = np.asarray(rows, dtype=np.int64)
    spec = _dense_spec(dense, counts, degree, "bvn_sparsified")
    graph = HierarchicalGraph(n=dense.n_total, edges=edges,
                              membership=membership, spec=spec)
    # one rewiring flips four multiplicities by one; operator cost <= 2*scale
    cost = 2.0 * scale * rewired if rewired else 0.0
    return BvnResult(graph=graph, scale=scale, multiplicities=mult,
                     rewired=rewired, unmatched_two_cycles=unmatched,
                     rewire_norm_cost=cost, large=large)


def operator_distance(a, b, scale: float = 1.0, tol: float = 1e-8,
                      seed: int = 0) -> float:
    """Largest singular value of (a - scale * b) via an implicit extreme
    eigensolve; both operands may be dense arrays or sparse matrices of the
    same shape, assumed symmetric."""
    import scipy.sparse.linalg as spla
    n = a.shape[0]

    def matvec(v):
        return a @ v - scale * (b @ v)

    op = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    probe = np.linalg.norm(matvec(v0 / np.linalg.norm(v0)))
    if probe < 1e-12:      # (near-)zero operator; ARPACK cannot start
        return float(probe)
    try:
        vals = spla.eigsh(op, k=1, which="LM", tol=tol, v0=v0,
                          return_eigenvectors=False, maxiter=50 * n)
        return float(abs(vals[0]))
    except spla.ArpackNoConvergence as exc:
        if len(exc.eigenvalues):
            return float(abs(exc.eigenvalues[0]))
        raise


def required_degree(T: float, p: float, lam: float, v_count: float,
                    method: str = "bvn", k: float = 64.0) -> float:
    """Degree prescription D >= k T^2 lam^2 p^-2 log|V| (bvn) or without the
    lam^2 factor (poisson)."""
    if T <= 0 or p <= 0 or lam <= 0:
        raise ValueError("T, p, lam must be positive")
    base = k * T * T / (p * p) * math.log(v_count)
    if method == "bvn":
        return base * lam * lam
    if method == "poisson":
        return base
    raise ValueError(f"unknown method {method!r}")
