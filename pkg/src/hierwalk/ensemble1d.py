"""Line-supergraph ensembles: factor construction and the welded-tree instance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import EffectiveHamiltonian, SupergraphSpec
from .errors import InvalidWeights


def proper_factors(d: int) -> list[int]:
    return [k for k in range(1, d) if d % k == 0]


@dataclass
class LineEnsembleSpec:
    """Parameters of a 1D factor ensemble sample.

    ``ratios`` are the exact edge-edge ratios e_{i+1}/e_i; ``log_ratio_bound``
    is the bound delta on |log r_i| implied by the chosen factor subset, used
    by fluctuation-shape checks downstream.
    """

    n: int
    degree: int
    factor_weights: dict[int, float]
    ratios: list[Fraction] = field(default_factory=list)
    log_ratio_bound: float = 0.0

    def rising_bias(self) -> float:
        """E[log r] on the rising half under the sampling weights."""
        total = sum(self.factor_weights.values())
        return sum(w * math.log((self.degree - d) / d)
                   for d, w in self.factor_weights.items()) / total


def sample_factor_line(n: int, degree: int, factor_weights: dict[int, float],
                       seed: int) -> SupergraphSpec:
    """Sample a mirrored 1D hierarchical spec from the proper-factor ensemble.

    Supervertices 0..2n; s_0 = s_2n = 1 and e_1 = e_2n = D.  Interior vertex i
    on the rising half gets a left degree d_L sampled from ``factor_weights``
    (supported on proper factors of D) and right degree D - d_L; the falling
    half mirrors.  The center vertex takes the symmetric split D/2, so D must
    be even.  All sizes and counts come out integral by construction.
    """
    if degree <= 1 or degree % 2 != 0:
        raise InvalidWeights("degree must be an even integer > 1")
    allowed = set(proper_factors(degree))
    support = [d for d, w in factor_weights.items() if w > 0]
    if not support or any(d not in allowed for d in support):
        raise InvalidWeights(f"weights must be supported on proper factors of {degree}")
    weights = np.array([factor_weights[d] for d in support], dtype=float)
    weights = weights / weights.sum()

    rng = np.random.default_rng(seed)
    d_left = {i: int(rng.choice(support, p=weights)) for i in range(1, n)}
    d_left[n] = degree // 2
    for i in range(1, n):
        # mirror: d_R(n+i) = d_L(n-i)  =>  d_L(n+i) = D - d_L(n-i)
        d_left[n + i] = degree - d_left[n - i]

    # edges e_1..e_2n, e_i between supervertices i-1 and i
    e = {1: degree}
    for i in range(1, 2 * n):
        dl = d_left[i]
        dr = degree - dl
        assert e[i] % dl == 0
        e[i + 1] = e[i] // dl * dr
    sizes = {0: 1, 2 * n: 1}
    for i in range(1, 2 * n):
        assert e[i] % d_left[i] == 0
        sizes[i] = e[i] // d_left[i]

    ratios = [Fraction(e[i + 1], e[i]) for i in range(1, 2 * n)]
    bound = max(abs(math.log((degree - d) / d)) for d in support)

    spec = SupergraphSpec(
        vertices=list(range(2 * n + 1)),
        edges=[(i - 1, i) for i in range(1, 2 * n + 1)],
        sizes=sizes,
        edge_counts={(i - 1, i): e[i] for i in range(1, 2 * n + 1)},
        degree=degree,
        init_vertex=0,
        exit_vertex=2 * n,
        degree_exempt={0, 2 * n},
        metadata={"ensemble": "factor_line", "n": n, "seed": seed,
                  "log_ratio_bound": bound,
                  "factor_weights": {str(d): w for d, w in factor_weights.items()},
                  "ratios": [[r.numerator, r.denominator] for r in ratios]},
    )
    spec.validate(require_regular=True, require_balanced=True)
    return spec


def line_ensemble_of(spec: SupergraphSpec) -> LineEnsembleSpec:
    """Recover the ensemble descriptor of a sampled factor-line spec."""
    meta = spec.metadata
    return LineEnsembleSpec(
        n=meta["n"],
        degree=spec.degree,
        factor_weights={int(d): w for d, w in meta["factor_weights"].items()},
        ratios=[Fraction(a, b) for a, b in meta["ratios"]],
        log_ratio_bound=meta["log_ratio_bound"],
    )


def kappa_from_r(degree: int, r: float) -> float:
    """Edge-vertex ratio from the edge-edge ratio: kappa = D / (1 + r)."""
    if r <= 0:
        raise ValueError("edge-edge ratio must be positive")
    if isinstance(r, Fraction):
        return Fraction(degree) / (1 + r)
    return degree / (1.0 + r)


def welded_tree_line(n: int) -> tuple[SupergraphSpec, EffectiveHamiltonian]:
    """The welded-tree reference instance on a line of 2n supervertices.

    Sizes double from 1 up to 2^(n-1) and mirror back; superedge counts are
    2^i between tree levels and 2^n across the middle.  Returns the spec with
    true integer counts together with the normalized reference chain whose
    hoppings are 1 everywhere except sqrt(2) on the middle edge (the true
    effective Hamiltonian of the spec equals sqrt(2) times that chain).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    k = 2 * n
    sizes = {j: 2 ** j if j < n else 2 ** (k - 1 - j) for j in range(k)}
    counts = {}
    for j in range(1, k):
        if j <= n - 1:
            counts[(j - 1, j)] = 2 ** j
        elif j == n:
            counts[(j - 1, j)] = 2 ** n
        else:
            counts[(j - 1, j)] = 2 ** (k - j)
    spec = SupergraphSpec(
        vertices=list(range(k)),
        edges=[(j - 1, j) for j in range(1, k)],
        sizes=sizes,
        edge_counts=counts,
        degree=3,
        init_vertex=0,
        exit_vertex=k - 1,
        degree_exempt={0, k - 1},
        metadata={"ensemble": "welded_tree", "n": n},
    )
    spec.validate(require_regular=True, require_balanced=True)

    hop = np.ones(k - 1)
    hop[n - 1] = math.sqrt(2.0)
    h = np.zeros((k, k))
    for j in range(k - 1):
        h[j, j + 1] = h[j + 1, j] = hop[j]
    return spec, EffectiveHamiltonian(matrix=h, labels=list(range(k)))
