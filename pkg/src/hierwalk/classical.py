"""Oracle-model classical baselines: non-backtracking walks, exploration
walks, small/large classification, reachability estimates, traversal."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import INVALID, EncodedOracle, HierarchicalGraph, SupergraphSpec
from .errors import NoTrials


class StopReason(Enum):
    REACHED_SMALL = "ReachedSmall"
    REVISITED_VERTEX = "RevisitedVertex"
    EXHAUSTED = "Exhausted"


@dataclass
class ExplorationOutcome:
    steps: int
    terminal: int
    reason: StopReason
    visited: set

    @property
    def success(self) -> bool:
        return self.reason is not StopReason.EXHAUSTED


def nonbacktracking_walk(graph: HierarchicalGraph, start: int, steps: int,
                         seed: int) -> np.ndarray:
    """Trajectory of a random non-backtracking walk.

    The first step is uniform over all incident edges; later steps are
    uniform over the non-reversing ones.  A degree-1 vertex forces a reversal
    (recorded by simply walking back).
    """
    nbrs = graph.neighbor_lists()
    rng = np.random.default_rng(seed)
    traj = np.empty(steps + 1, dtype=np.int64)
    traj[0] = start
    prev = -1
    cur = start
    for k in range(steps):
        options = nbrs[cur]
        if prev >= 0 and len(options) > 1:
            options = options[options != prev]
        nxt = int(options[rng.integers(len(options))])
        traj[k + 1] = nxt
        prev, cur = cur, nxt
    return traj


def classify_supervertices(spec: SupergraphSpec, Q: int, delta: float) -> dict:
    """small iff s_v <= Q/delta; boundary iff small with a large neighbor.

    Sizes are arbitrary-precision, so the threshold comparison is done as
    s_v * delta <= Q on exact ints when delta is a dyadic-friendly float.
    """
    if Q <= 0 or delta <= 0:
        raise ValueError("Q and delta must be positive")
    small = {v: (spec.sizes[v] * delta <= Q) for v in spec.vertices}
    boundary = {}
    for v in spec.vertices:
        boundary[v] = small[v] and any(not small[w] for w in spec.neighbors(v))
    return {
        "small": {v for v, s in small.items() if s},
        "large": {v for v, s in small.items() if not s},
        "boundary": {v for v, b in boundary.items() if b},
    }


def exploration_walk(graph: HierarchicalGraph, start: int, Q: int, seed: int,
                     small: set | None = None, visited: set | None = None,
                     delta: float | None = None) -> ExplorationOutcome:
    """Non-backtracking walk with the three stopping rules: entering a small
    supervertex (after at least one step), meeting a previously visited
    vertex, or exhausting Q steps."""
    if small is None:
        if delta is None:
            raise ValueError("need either the small set or delta")
        small = classify_supervertices(graph.spec, Q, delta)["small"]
    nbrs = graph.neighbor_lists()
    rng = np.random.default_rng(seed)
    seen = set(visited) if visited else set()
    seen.add(start)
    walk_visits = {start}
    prev = -1
    cur = start
    for step in range(1, Q + 1):
        options = nbrs[cur]
        if prev >= 0 and len(options) > 1:
            options = options[options != prev]
        nxt = int(options[rng.integers(len(options))])
        prev, cur = cur, nxt
        if graph.membership[cur] in small:
            walk_visits.add(cur)
            return ExplorationOutcome(step, cur, StopReason.REACHED_SMALL, walk_visits)
        if cur in seen or cur in walk_visits:
            walk_visits.add(cur)
            return ExplorationOutcome(step, cur, StopReason.REVISITED_VERTEX, walk_visits)
        walk_visits.add(cur)
        seen.add(cur)
    return ExplorationOutcome(Q, cur, StopReason.EXHAUSTED, walk_visits)


def estimate_p_reach(graph: HierarchicalGraph, v: int, w: int, Q: int,
                     trials: int, seed: int, delta: float = 0.01,
                     starts: int = 8) -> dict:
    """Empirical stand-in for the reachability probability: the max over
    sampled start vertices in S_v of the fraction of exploration walks that
    are successful and touch S_w."""
    if trials <= 0:
        raise NoTrials("need at least one trial")
    rng = np.random.default_rng(seed)
    members = graph.supervertex_members(v)
    pick = rng.choice(members, size=min(starts, len(members)), replace=False)
    small = classify_supervertices(graph.spec, Q, delta)["small"]
    best = 0.0
    best_err = 0.0
    for x in pick:
        hits = 0
        for k in range(trials):
            out = exploration_walk(graph, int(x), Q, int(rng.integers(2**63)),
                                   small=small)
            if out.success and any(graph.membership[u] == w for u in out.visited):
                hits += 1
        p = hits / trials
        if p >= best:
            best = p
            best_err = math.sqrt(max(p * (1 - p), 1.0 / trials) / trials)
    return {"p_reach": best, "stderr": best_err, "starts": len(pick)}


@dataclass
class TraversalOutcome:
    found_exit: bool
    queries: int


def classical_traversal(oracle: EncodedOracle, entrance_code: int, exit_code: int,
                        Q: int, policy: str, seed: int) -> TraversalOutcome:
    """Run a query policy against the oracle with budget Q.

    ``found_exit`` flags whether any oracle answer equals the exit codeword;
    the policies themselves never inspect it.  Policies: "rw" (simple random
    walk), "nbw" (non-backtracking, redrawing when a step returns the
    previous codeword), "dfs" (randomized depth-first search).
    """
    if oracle.queries != 0:
        raise ValueError("oracle must be fresh (counter zero); clone per trial")
    rng = np.random.default_rng(seed)
    D = oracle.degree_bound
    found = entrance_code == exit_code   # degenerate instance: already there

    def ask(code, s):
        nonlocal found
        ans = oracle.query(code, s)
        if ans is not INVALID and ans == exit_code:
            found = True
        return ans

    if policy == "rw":
        cur = entrance_code
        while oracle.queries < Q and not found:
            ans = ask(cur, int(rng.integers(D)))
            if ans is not INVALID:
                cur = ans
    elif policy == "nbw":
        cur, prev = entrance_code, None
        while oracle.queries < Q and not found:
            ans = ask(cur, int(rng.integers(D)))
            if ans is INVALID:
                continue
            if ans == prev and oracle.queries < Q:
                continue    # redraw; the wasted query still counts
            prev, cur = cur, ans
    elif policy == "dfs":
        slots = list(rng.permutation(D))
        stack = [(entrance_code, slots)]
        expanded = {entrance_code}
        while stack and oracle.queries < Q and not found:
            code, todo = stack[-1]
            if not todo:
                stack.pop()
                continue
            s = todo.pop()
            ans = ask(code, int(s))
            if ans is not INVALID and ans not in expanded:
                expanded.add(ans)
                stack.append((ans, list(rng.permutation(D))))
    else:
        raise ValueError(f"unknown policy {policy!r}")
    return TraversalOutcome(found_exit=found, queries=oracle.queries)


def traversal_success_rate(graph: HierarchicalGraph, Q: int, policy: str,
                           trials: int, seed: int,
                           oracle_bits: int | None = None) -> dict:
    """Fraction of independent oracle runs that see the exit codeword."""
    spec = graph.spec
    base = EncodedOracle(graph, seed, oracle_bits)
    entrance = int(graph.supervertex_members(spec.init_vertex)[0])
    exit_v = int(graph.supervertex_members(spec.exit_vertex)[0])
    entrance_code = base.encode(entrance)
    exit_code = base.encode(exit_v)
    rng = np.random.default_rng(seed + 1)
    hits = 0
    total_q = 0
    for _ in range(trials):
        oracle = base.clone()
        out = classical_traversal(oracle, entrance_code, exit_code, Q, policy,
                                  int(rng.integers(2**63)))
        hits += int(out.found_exit)
        total_q += out.queries
    return {"success_rate": hits / trials, "trials": trials,
            "mean_queries": total_q / trials, "Q": Q, "policy": policy}
