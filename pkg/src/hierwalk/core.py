"""Supergraph data model, materialization, effective Hamiltonians, encoded oracle.

A supergraph spec describes a hierarchical graph symbolically: supervertex
sizes (arbitrary-precision ints) and superedge counts.  A materialized
``HierarchicalGraph`` only exists below a vertex cap; huge instances live as
specs and are analyzed through their effective Hamiltonian in the supervertex
subspace.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import CapExceeded, DegreeInfeasible, UnbalancedSpec

DEFAULT_VERTEX_CAP = 10**6


@dataclass
class SupergraphSpec:
    """Symbolic description of a hierarchical graph.

    ``sizes`` and ``edge_counts`` are Python ints and may be astronomically
    large; nothing here requires materialization.  ``diagonal_counts`` holds
    the number of intra-supervertex edges F_u when present.
    """

    vertices: list[int]
    edges: list[tuple[int, int]]
    sizes: dict[int, int]
    edge_counts: dict[tuple[int, int], int]
    degree: int
    diagonal_counts: dict[int, int] = field(default_factory=dict)
    init_vertex: int | None = None
    exit_vertex: int | None = None
    # supervertices allowed to break the D-regularity identity (entrance/exit
    # and, for lattice constructions, their corners)
    degree_exempt: set[int] = field(default_factory=set)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.edges = [self._key(u, v) for (u, v) in self.edges]
        self.edge_counts = {self._key(*e): int(c) for e, c in self.edge_counts.items()}
        self.sizes = {v: int(s) for v, s in self.sizes.items()}

    @staticmethod
    def _key(u, v):
        return (u, v) if u <= v else (v, u)

    def size(self, v) -> int:
        return self.sizes[v]

    def count(self, u, v) -> int:
        return self.edge_counts[self._key(u, v)]

    def neighbors(self, u) -> list[int]:
        out = []
        for a, b in self.edges:
            if a == u:
                out.append(b)
            elif b == u:
                out.append(a)
        return sorted(out)

    def total_vertices(self) -> int:
        return sum(self.sizes.values())

    def is_traversal_instance(self) -> bool:
        return self.init_vertex is not None and self.exit_vertex is not None

    def validate(self, require_regular: bool = True, require_balanced: bool = False) -> None:
        """Check the structural invariants; raise on violation."""
        for v in self.vertices:
            if self.sizes.get(v, 0) <= 0:
                raise ValueError(f"supervertex {v} has nonpositive size")
        for (u, v), c in self.edge_counts.items():
            if c <= 0:
                raise ValueError(f"superedge {(u, v)} has nonpositive count")
        if self.is_traversal_instance():
            if self.sizes[self.init_vertex] != 1 or self.sizes[self.exit_vertex] != 1:
                raise ValueError("traversal instances need unit entrance/exit sizes")
        if require_regular:
            for u in self.vertices:
                if u in self.degree_exempt:
                    continue
                total = sum(c for e, c in self.edge_counts.items() if u in e)
                total += 2 * self.diagonal_counts.get(u, 0)
                if total != self.degree * self.sizes[u]:
                    raise ValueError(
                        f"degree identity fails at {u}: {total} != D*s = "
                        f"{self.degree * self.sizes[u]}"
                    )
        if require_balanced:
            for (u, v), c in self.edge_counts.items():
                if c % self.sizes[u] != 0 or c % self.sizes[v] != 0:
                    raise UnbalancedSpec(
                        f"superedge {(u, v)}: count {c} not divisible by both "
                        f"endpoint sizes {self.sizes[u]}, {self.sizes[v]}"
                    )

    # -- serialization ----------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [[u, v] for (u, v) in self.edges],
            "sizes": {str(v): str(s) for v, s in self.sizes.items()},
            "edge_counts": [[u, v, str(c)] for (u, v), c in sorted(self.edge_counts.items())],
            "degree": self.degree,
            "diagonal_counts": {str(v): str(c) for v, c in self.diagonal_counts.items()},
            "init_vertex": self.init_vertex,
            "exit_vertex": self.exit_vertex,
            "degree_exempt": sorted(self.degree_exempt),
            "metadata": self.metadata,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SupergraphSpec":
        return cls(
            vertices=list(d["vertices"]),
            edges=[tuple(e) for e in d["edges"]],
            sizes={int(v): int(s) for v, s in d["sizes"].items()},
            edge_counts={(u, v): int(c) for u, v, c in d["edge_counts"]},
            degree=d["degree"],
            diagonal_counts={int(v): int(c) for v, c in d.get("diagonal_counts", {}).items()},
            init_vertex=d.get("init_vertex"),
            exit_vertex=d.get("exit_vertex"),
            degree_exempt=set(d.get("degree_exempt", [])),
            metadata=d.get("metadata", {}),
        )

    def dumps(self) -> str:
        return json.dumps({"spec": self.to_json_dict()}, indent=1)

    @classmethod
    def loads(cls, s: str) -> "SupergraphSpec":
        return cls.from_json_dict(json.loads(s)["spec"])


@dataclass
class HierarchicalGraph:
    """A materialized hierarchical graph: plain vertex/edge lists."""

    n: int
    edges: np.ndarray               # (m, 2) int array, u < v rows
    membership: np.ndarray          # vertex -> supervertex id
    spec: SupergraphSpec
    _neighbors: list | None = None

    @property
    def m(self) -> int:
        return len(self.edges)

    def adjacency(self) -> sp.csr_matrix:
        u, v = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(len(u))
        a = sp.coo_matrix((data, (u, v)), shape=(self.n, self.n))
        a = a + a.T
        return a.tocsr()

    def neighbor_lists(self) -> list[np.ndarray]:
        """Per-vertex edge-multiset neighbors (parallel edges repeated)."""
        if self._neighbors is None:
            ends = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
            other = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
            order = np.argsort(ends, kind="stable")
            ends, other = ends[order], other[order]
            splits = np.searchsorted(ends, np.arange(1, self.n))
            self._neighbors = np.split(other, splits)
        return self._neighbors

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.int64)
        np.add.at(d, self.edges[:, 0], 1)
        np.add.at(d, self.edges[:, 1], 1)
        return d

    def supervertex_members(self, u) -> np.ndarray:
        return np.nonzero(self.membership == u)[0]

    def supervertex_state(self, u) -> np.ndarray:
        """Uniform superposition over the members of S_u, as a dense vector."""
        members = self.supervertex_members(u)
        psi = np.zeros(self.n)
        psi[members] = 1.0 / math.sqrt(len(members))
        return psi

    def to_json_dict(self) -> dict:
        return {
            "spec": self.spec.to_json_dict(),
            "materialized": {
                "n": self.n,
                "membership": self.membership.tolist(),
                "edges": self.edges.tolist(),
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, d: dict) -> "HierarchicalGraph":
        mat = d["materialized"]
        return cls(
            n=mat["n"],
            edges=np.asarray(mat["edges"], dtype=np.int64).reshape(-1, 2),
            membership=np.asarray(mat["membership"], dtype=np.int64),
            spec=SupergraphSpec.from_json_dict(d["spec"]),
        )


def _biregular_wiring(left: np.ndarray, right: np.ndarray, k_left: int, k_right: int,
                      rng: np.random.Generator) -> list[tuple[int, int]]:
    """Random balanced bipartite wiring via stub matching.

    Every vertex of ``left`` gets exactly ``k_left`` edges into ``right`` and
    vice versa.  Parallel edges are swapped away whenever a simple wiring
    exists (per-vertex degree at most the opposite side); unit-size end
    supervertices legitimately force parallel edges, in which case the raw
    balanced pairing is kept.
    """
    stubs_l = np.repeat(left, k_left)
    stubs_r = np.repeat(right, k_right)
    if len(stubs_l) != len(stubs_r):
        raise DegreeInfeasible("stub counts differ; spec is inconsistent")
    simple_possible = k_left <= len(right) and k_right <= len(left)
    for _attempt in range(50):
        a = stubs_l.copy()
        b = stubs_r[rng.permutation(len(stubs_r))]
        if not simple_possible:
            return list(zip(a.tolist(), b.tolist()))
        if _repair_multi_edges(a, b, rng, forbid_same=False):
            return list(zip(a.tolist(), b.tolist()))
    raise DegreeInfeasible("could not realize a simple wiring after 50 restarts")


def _regular_wiring(verts: np.ndarray, k: int,
                    rng: np.random.Generator) -> list[tuple[int, int]]:
    """Random simple k-regular wiring within one vertex set (configuration
    model: pair the k copies of each vertex against each other, then swap
    away self-loops and parallels)."""
    if k > len(verts) - 1:
        raise DegreeInfeasible("intra-supervertex wiring needs 2F/s <= s - 1")
    stubs = np.repeat(verts, k)
    if len(stubs) % 2 != 0:
        raise DegreeInfeasible("odd number of intra stubs")
    half = len(stubs) // 2
    for _attempt in range(50):
        order = rng.permutation(len(stubs))
        a = stubs[order[:half]].copy()
        b = stubs[order[half:]].copy()
        if _repair_multi_edges(a, b, rng, forbid_same=True):
            return list(zip(a.tolist(), b.tolist()))
    raise DegreeInfeasible("could not realize a simple intra wiring after 50 restarts")


def _repair_multi_edges(a: np.ndarray, b: np.ndarray, rng: np.random.Generator,
                        forbid_same: bool) -> bool:
    """Swap right endpoints until all pairs (a_i, b_i) are distinct edges."""
    m = len(a)
    for _round in range(400):
        seen: dict[tuple[int, int], int] = {}
        bad: list[int] = []
        for i in range(m):
            key = (a[i], b[i]) if a[i] <= b[i] else (b[i], a[i])
            if (forbid_same and a[i] == b[i]) or key in seen:
                bad.append(i)
            else:
                seen[key] = i
        if not bad:
            return True
        for i in bad:
            j = rng.integers(m)
            b[i], b[j] = b[j], b[i]
    return False


def assemble_hierarchical(spec: SupergraphSpec, seed: int,
                          cap: int = DEFAULT_VERTEX_CAP) -> HierarchicalGraph:
    """Materialize a balanced hierarchical graph from a spec, deterministically.

    Each superedge (u, v) is wired as a random simple biregular bipartite
    graph in which every vertex of S_u has e_uv/s_u neighbors in S_v and every
    vertex of S_v has e_uv/s_v in S_u.  Divisibility failures raise
    ``UnbalancedSpec``; infeasible degrees raise ``DegreeInfeasible``.
    """
    total = spec.total_vertices()
    if total > cap:
        raise CapExceeded(f"{total} vertices exceed the cap {cap}")
    spec.validate(require_regular=False, require_balanced=True)

    rng = np.random.default_rng(seed)
    order = sorted(spec.vertices)
    offsets = {}
    pos = 0
    membership = np.empty(total, dtype=np.int64)
    for u in order:
        offsets[u] = pos
        membership[pos:pos + spec.sizes[u]] = u
        pos += spec.sizes[u]

    all_edges: list[tuple[int, int]] = []
    for (u, v) in sorted(spec.edges):
        e = spec.count(u, v)
        su, sv = spec.sizes[u], spec.sizes[v]
        ku, kv = e // su, e // sv
        left = np.arange(offsets[u], offsets[u] + su)
        right = np.arange(offsets[v], offsets[v] + sv)
        all_edges.extend(_biregular_wiring(left, right, ku, kv, rng))

    for u in sorted(spec.diagonal_counts):
        f = spec.diagonal_counts[u]
        if f == 0:
            continue
        su = spec.sizes[u]
        if (2 * f) % su != 0:
            raise UnbalancedSpec(f"2F_u = {2 * f} not divisible by s_u = {su} at {u}")
        verts = np.arange(offsets[u], offsets[u] + su)
        pairs = _regular_wiring(verts, 2 * f // su, rng)
        assert len(pairs) == f
        all_edges.extend(pairs)

    edges = np.asarray([(a, b) if a < b else (b, a) for a, b in all_edges],
                       dtype=np.int64).reshape(-1, 2)
    return HierarchicalGraph(n=total, edges=edges, membership=membership, spec=spec)


def validate_balanced(graph: HierarchicalGraph) -> dict:
    """Check that cross-edge counts per vertex are constant on every superedge.

    Returns {"balanced": bool, "worst": None | (superedge, vertex, expected, got)}.
    """
    spec = graph.spec
    counts: dict[tuple, dict[int, int]] = {e: {} for e in spec.edges}
    mem = graph.membership
    for a, b in graph.edges:
        ua, ub = mem[a], mem[b]
        if ua == ub:
            continue
        key = spec._key(ua, ub)
        if key not in counts:
            counts[key] = {}
        d = counts[key]
        d[a] = d.get(a, 0) + 1
        d[b] = d.get(b, 0) + 1
    worst = None
    worst_dev = 0
    for (u, v), percount in counts.items():
        declared = spec.edge_counts.get(spec._key(u, v), 0)
        for end, s_end in ((u, spec.sizes[u]), (v, spec.sizes[v])):
            expected = declared // s_end
            members = graph.supervertex_members(end)
            for x in members:
                got = percount.get(int(x), 0)
                dev = abs(got - expected)
                if dev > worst_dev:
                    worst_dev = dev
                    worst = {"superedge": (u, v), "vertex": int(x),
                             "expected": expected, "got": got}
    return {"balanced": worst is None, "worst": worst}


@dataclass
class EffectiveHamiltonian:
    """Dense symmetric matrix on the supervertex subspace."""

    matrix: np.ndarray
    labels: list[int]        # row index -> supervertex id

    @property
    def dim(self) -> int:
        return len(self.labels)

    def index_of(self, label) -> int:
        return self.labels.index(label)


def _log_ratio_entry(e: int, su: int, sv: int) -> float:
    """e / sqrt(su*sv) via logs of arbitrary-precision ints."""
    lg = math.log(e) - 0.5 * math.log(su) - 0.5 * math.log(sv)
    return math.exp(lg)


def effective_hamiltonian(spec: SupergraphSpec) -> EffectiveHamiltonian:
    """Project the adjacency matrix onto the supervertex subspace.

    Off-diagonal (u, v) entries are e_uv / sqrt(s_u s_v); the diagonal is
    2 F_u / s_u when intra-supervertex edges are present.  Entries are
    computed in log space so that specs with sizes like 2**1000 work as long
    as the ratios themselves fit in a double.
    """
    labels = sorted(spec.vertices)
    idx = {u: i for i, u in enumerate(labels)}
    h = np.zeros((len(labels), len(labels)))
    for (u, v), e in spec.edge_counts.items():
        val = _log_ratio_entry(e, spec.sizes[u], spec.sizes[v])
        h[idx[u], idx[v]] = val
        h[idx[v], idx[u]] = val
    for u, f in spec.diagonal_counts.items():
        if f:
            h[idx[u], idx[u]] = math.exp(math.log(2 * f) - math.log(spec.sizes[u]))
    return EffectiveHamiltonian(matrix=h, labels=labels)


def subspace_invariance_residual(graph: HierarchicalGraph,
                                 heff: EffectiveHamiltonian) -> float:
    """max_u || A|S_u>  -  sum_v H_uv |S_v> ||_2 on the full vertex space.

    Zero (up to float rounding) exactly when the supervertex subspace is
    invariant, i.e. when the graph is balanced.
    """
    adj = graph.adjacency()
    states = {u: graph.supervertex_state(u) for u in heff.labels}
    worst = 0.0
    for i, u in enumerate(heff.labels):
        lhs = adj @ states[u]
        rhs = np.zeros(graph.n)
        for j, v in enumerate(heff.labels):
            if heff.matrix[i, j] != 0.0:
                rhs += heff.matrix[i, j] * states[v]
        worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    return worst


class Invalid:
    """Distinguished INVALID oracle answer."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INVALID"


INVALID = Invalid()


class EncodedOracle:
    """Neighbor oracle over random injective codewords.

    Queries are (codeword, s) with s in [0, D); the answer is the codeword of
    the s-th neighbor under a per-vertex random ordering, or INVALID for
    non-codewords / out-of-range slots.  Every query bumps the counter.
    """

    def __init__(self, graph: HierarchicalGraph, seed: int, codeword_bits: int | None = None):
        n = graph.n
        if codeword_bits is None:
            codeword_bits = 2 * max(1, (n * n - 1).bit_length())
        if 2 ** codeword_bits < n * n:
            raise ValueError("codeword space must have size >= |V|^2")
        self.codeword_bits = codeword_bits
        self.degree_bound = graph.spec.degree
        rng = np.random.default_rng(seed)
        space = 2 ** codeword_bits
        codes: set[int] = set()
        encode = []
        while len(encode) < n:
            c = int(rng.integers(space))
            if c not in codes:
                codes.add(c)
                encode.append(c)
        self._encode = encode
        self._decode = {c: v for v, c in enumerate(encode)}
        nbrs = graph.neighbor_lists()
        self._ordered = [rng.permutation(nb).tolist() for nb in nbrs]
        self.queries = 0

    def encode(self, vertex: int) -> int:
        """Harness-side lookup; does not count as a query."""
        return self._encode[vertex]

    def query(self, codeword: int, s: int):
        self.queries += 1
        v = self._decode.get(codeword)
        if v is None:
            return INVALID
        if not 0 <= s < len(self._ordered[v]):
            return INVALID
        return self._encode[self._ordered[v][s]]

    def clone(self) -> "EncodedOracle":
        """Same encoding and neighbor orderings, fresh counter."""
        other = object.__new__(EncodedOracle)
        other.codeword_bits = self.codeword_bits
        other.degree_bound = self.degree_bound
        other._encode = self._encode
        other._decode = self._decode
        other._ordered = self._ordered
        other.queries = 0
        return other


def make_oracle(graph: HierarchicalGraph, seed: int,
                codeword_bits: int | None = None) -> EncodedOracle:
    return EncodedOracle(graph, seed, codeword_bits)
