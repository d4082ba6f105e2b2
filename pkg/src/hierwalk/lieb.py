"""d-dimensional Lieb lattices, height fields, and gauge-constrained ensembles.

Sites are stored with doubled integer coordinates so that edge midpoints stay
exact: a coordinate tuple with all entries even is a cell site (Delta_0), one
odd entry marks an edge site (Delta_1) oriented along that axis.

A ratio assignment carries two families of consecutive-edge-count ratios:
``link`` ratios (crossing a Delta_1 site, the gauge-relevant ones) and
``site`` ratios (crossing an interior Delta_0 site along an axis).  Both are
exact ``Fraction`` values in construction mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg

from .core import SupergraphSpec
from .errors import GaugeViolated, NoPerfectMatching, NonIntegral


def _unit(d: int, axis: int) -> tuple:
    e = [0] * d
    e[axis] = 1
    return tuple(e)


def _add(x: tuple, y: tuple) -> tuple:
    return tuple(a + b for a, b in zip(x, y))


def _scale(x: tuple, c: int) -> tuple:
    return tuple(a * c for a in x)


class LiebLattice:
    """Cubic lattice of side N in d dimensions with a site on every edge."""

    def __init__(self, N: int, d: int):
        if N < 2 or d < 1:
            raise ValueError("need N >= 2 and d >= 1")
        self.N = N
        self.d = d
        self.sites0 = [_scale(x, 2) for x in np.ndindex(*(N,) * d)]
        self.sites1 = []
        for axis in range(d):
            for base in self.iter_links(axis):
                self.sites1.append(_add(_scale(base, 2), _unit(d, axis)))
        self.sites = self.sites0 + self.sites1
        self.index = {s: i for i, s in enumerate(self.sites)}

    def iter_links(self, axis: int):
        """Base points x of links (x, x + e_axis), i.e. Delta_1 sites."""
        shape = [self.N] * self.d
        shape[axis] = self.N - 1
        for x in np.ndindex(*shape):
            yield tuple(x)

    def iter_site_crossings(self, axis: int):
        """Delta_0 points interior along ``axis`` (both in- and out-edges exist)."""
        shape = [self.N] * self.d
        shape[axis] = self.N - 2
        for x in np.ndindex(*shape):
            y = list(x)
            y[axis] += 1
            yield tuple(y)

    def n_sites(self) -> int:
        return len(self.sites)

    def delta1_site(self, axis: int, base: tuple) -> tuple:
        return _add(_scale(base, 2), _unit(self.d, axis))

    def neighbors_of_delta1(self, axis: int, base: tuple) -> tuple:
        lo = _scale(base, 2)
        hi = _add(lo, _scale(_unit(self.d, axis), 2))
        return lo, hi

    def edges(self):
        """All Lieb edges as (delta0_doubled, delta1_doubled) pairs."""
        for axis in range(self.d):
            for base in self.iter_links(axis):
                mid = self.delta1_site(axis, base)
                lo, hi = self.neighbors_of_delta1(axis, base)
                yield lo, mid
                yield hi, mid


def build_lieb(N: int, d: int) -> LiebLattice:
    return LiebLattice(N, d)


@dataclass
class RatioAssignment:
    """Edge-edge ratios on a Lieb lattice, keyed by (axis, base point)."""

    N: int
    d: int
    link: dict            # (axis, x) -> ratio of up-edge / down-edge across Delta_1
    site: dict = field(default_factory=dict)   # (axis, x) across interior Delta_0

    def copy(self) -> "RatioAssignment":
        return RatioAssignment(self.N, self.d, dict(self.link), dict(self.site))

    def is_exact(self) -> bool:
        return all(isinstance(v, Fraction) for v in self.link.values())


@dataclass
class GaugeReport:
    satisfied: bool
    deviations: dict      # (axis_i, axis_j, cell) -> product of ratios around the 2-cell
    failing: list


def check_gauge(assignment: RatioAssignment, lattice: LiebLattice,
                tol: float = 1e-12) -> GaugeReport:
    """Product of link ratios around every 2-cell of the base lattice.

    Exact rational products when the assignment is exact, else compared to 1
    within ``tol``.  The hopping-ratio signs cancel pairwise on even loops, so
    only the oriented ratio product matters.
    """
    N, d = lattice.N, lattice.d
    exact = assignment.is_exact()
    deviations = {}
    failing = []
    for i in range(d):
        for j in range(i + 1, d):
            shape = [N] * d
            shape[i] = N - 1
            shape[j] = N - 1
            for cell in np.ndindex(*shape):
                x = tuple(cell)
                xi = _add(x, _unit(d, i))
                xj = _add(x, _unit(d, j))
                r1 = assignment.link[(i, x)]
                r2 = assignment.link[(j, xi)]
                r3 = assignment.link[(i, xj)]
                r4 = assignment.link[(j, x)]
                prod = (r1 * r2) / (r3 * r4)
                deviations[(i, j, x)] = prod
                if exact:
                    if prod != 1:
                        failing.append((i, j, x))
                else:
                    if abs(float(prod) - 1.0) > tol:
                        failing.append((i, j, x))
    return GaugeReport(satisfied=not failing, deviations=deviations, failing=failing)


def mountain_ratios(N: int, d: int, degree: int, f: int) -> RatioAssignment:
    """Uniform-bias landscape: ratio D/f - 1 while the crossing coordinate is
    at most N/2, its inverse beyond (on link and site crossings alike)."""
    if f <= 0 or degree % f != 0 or f >= degree:
        raise ValueError("f must be a proper factor of the degree")
    rho = Fraction(degree, f) - 1
    link = {}
    site = {}
    lattice = LiebLattice(N, d)
    for axis in range(d):
        for x in lattice.iter_links(axis):
            rising = 2 * x[axis] + 1 <= N      # half-integer coordinate <= N/2
            link[(axis, x)] = rho if rising else 1 / rho
        for x in lattice.iter_site_crossings(axis):
            rising = 2 * x[axis] <= N
            site[(axis, x)] = rho if rising else 1 / rho
    return RatioAssignment(N=N, d=d, link=link, site=site)


# ---------------------------------------------------------------------------
# square-ice fluctuations (d = 2)
# ---------------------------------------------------------------------------

@dataclass
class IceSample:
    """A zero-flux arrow configuration encoded as an integer height field.

    ``heights[x, y]`` changes by exactly +-1 across every link; the multiplier
    of the link ratio at (axis, base) is 2**(height difference).  Arrows are
    the signs of those differences relative to the all-plus reference.
    """

    N: int
    heights: np.ndarray

    def link_signs(self) -> dict:
        out = {}
        h = self.heights
        for x in range(self.N - 1):
            for y in range(self.N):
                out[(0, (x, y))] = int(h[x + 1, y] - h[x, y])
        for x in range(self.N):
            for y in range(self.N - 1):
                out[(1, (x, y))] = int(h[x, y + 1] - h[x, y])
        return out

    def multipliers(self) -> dict:
        return {k: Fraction(2) ** s for k, s in self.link_signs().items()}


def validate_zero_flux(link_signs: dict, N: int) -> list:
    """Plaquettes whose oriented sign sum is nonzero (empty iff valid)."""
    bad = []
    for x in range(N - 1):
        for y in range(N - 1):
            curl = (link_signs[(0, (x, y))] + link_signs[(1, (x + 1, y))]
                    - link_signs[(0, (x, y + 1))] - link_signs[(1, (x, y))])
            if curl != 0:
                bad.append((x, y))
    return bad


class SquareIceSampler:
    """Single-site Glauber dynamics on ice height functions, pinned at the origin."""

    def __init__(self, N: int, seed: int, burn_in_sweeps: int | None = None):
        self.N = N
        self.rng = np.random.default_rng(seed)
        # reference configuration: every step +1
        self.h = np.add.outer(np.arange(N), np.arange(N)).astype(np.int64)
        if burn_in_sweeps is None:
            burn_in_sweeps = 10 * N * N
        self.sweep(burn_in_sweeps)

    def _site_options(self, x: int, y: int) -> list[int]:
        vals = []
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = x + dx, y + dy
            if 0 <= a < self.N and 0 <= b < self.N:
                vals.append(self.h[a, b])
        lo, hi = min(vals), max(vals)
        if hi - lo == 2:
            return [lo + 1]
        return [lo - 1, lo + 1]

    def sweep(self, count: int = 1) -> None:
        N = self.N
        for _ in range(count):
            xs = self.rng.integers(0, N, size=N * N)
            ys = self.rng.integers(0, N, size=N * N)
            picks = self.rng.random(N * N)
            for x, y, p in zip(xs, ys, picks):
                if x == 0 and y == 0:
                    continue
                opts = self._site_options(int(x), int(y))
                self.h[x, y] = opts[int(p * len(opts))]

    def sample(self, thin_sweeps: int = 0) -> IceSample:
        if thin_sweeps:
            self.sweep(thin_sweeps)
        return IceSample(N=self.N, heights=self.h.copy())


def sample_square_ice(N: int, seed: int, burn_in_sweeps: int | None = None) -> IceSample:
    """One zero-flux configuration for the 2D Lieb construction."""
    return SquareIceSampler(N, seed, burn_in_sweeps).sample()


# ---------------------------------------------------------------------------
# dimer fluctuations (d = 2, N even)
# ---------------------------------------------------------------------------

@dataclass
class DimerSample:
    """A perfect matching on the N x N grid plus its face height function.

    Site-ratio multipliers are read off as height differences across the edge
    below (axis 0) or to the left (axis 1) of the crossing point; they take
    values in {8, 2, 1/2, 1/8}.
    """

    N: int
    matching: dict          # vertex -> partner, symmetric
    face_heights: np.ndarray  # (N+1, N+1); face (a, b) = [a-1,a] x [b-1,b]

    def multipliers(self) -> dict:
        out = {}
        h = self.face_heights
        N = self.N
        for x in range(1, N - 1):          # interior along axis 0
            for y in range(1, N):          # needs the edge below
                out[(0, (x, y))] = Fraction(2) ** int(h[x + 1, y] - h[x, y])
        for y in range(1, N - 1):
            for x in range(1, N):
                out[(1, (x, y))] = Fraction(2) ** int(h[x, y + 1] - h[x, y])
        return out

    def validate_matching(self) -> bool:
        seen = set()
        for v, w in self.matching.items():
            if self.matching.get(w) != v or v == w:
                return False
            seen.add(v)
        return len(seen) == self.N * self.N


def _dimer_face_heights(N: int, matching: dict) -> np.ndarray:
    """Standard dimer height on interior faces: crossing an edge with the
    black endpoint on the left changes the height by +1 (free) or -3 (dimer).

    Only interior faces (a, b), 1 <= a, b <= N-1, with face (a, b) the unit
    square [a-1, a] x [b-1, b], are assigned; the closure condition around
    every interior vertex is exactly the one-dimer-per-vertex rule.
    """
    h = np.zeros((N + 1, N + 1), dtype=np.int64)
    done = np.zeros((N + 1, N + 1), dtype=bool)
    done[1, 1] = True
    stack = [(1, 1)]

    def black(v):
        return (v[0] + v[1]) % 2 == 0

    def step(face, nbr):
        (a, b), (a2, b2) = face, nbr
        if a2 == a + 1:       # rightward across the vertical edge (a, b-1)-(a, b)
            p, q = (a, b - 1), (a, b)
            dimer = matching.get(p) == q
            sgn = 1 if black(q) else -1       # left of +x travel is the upper vertex
            return sgn * (-3 if dimer else 1)
        if a2 == a - 1:
            return -step(nbr, face)
        if b2 == b + 1:       # upward across the horizontal edge (a-1, b)-(a, b)
            p, q = (a - 1, b), (a, b)
            dimer = matching.get(p) == q
            sgn = 1 if black(p) else -1       # left of +y travel is the left vertex
            return sgn * (-3 if dimer else 1)
        if b2 == b - 1:
            return -step(nbr, face)
        raise ValueError("not adjacent")

    while stack:
        a, b = stack.pop()
        for a2, b2 in ((a + 1, b), (a - 1, b), (a, b + 1), (a, b - 1)):
            if 1 <= a2 <= N - 1 and 1 <= b2 <= N - 1 and not done[a2, b2]:
                h[a2, b2] = h[a, b] + step((a, b), (a2, b2))
                done[a2, b2] = True
                stack.append((a2, b2))
    return h


def brick_wall_matching(N: int) -> dict:
    if N % 2 != 0:
        raise NoPerfectMatching("grid side must be even")
    m = {}
    for y in range(N):
        for x in range(0, N, 2):
            m[(x, y)] = (x + 1, y)
            m[(x + 1, y)] = (x, y)
    return m


def sample_dimer_fluctuations(N: int, seed: int,
                              burn_in_sweeps: int | None = None) -> DimerSample:
    """Plaquette-rotation MCMC over perfect matchings, from the brick wall."""
    matching = brick_wall_matching(N)
    rng = np.random.default_rng(seed)
    if burn_in_sweeps is None:
        burn_in_sweeps = 10 * N * N
    attempts = burn_in_sweeps * (N - 1) * (N - 1)
    ax = rng.integers(0, N - 1, size=attempts)
    ay = rng.integers(0, N - 1, size=attempts)
    for x, y in zip(ax, ay):
        p00, p10 = (int(x), int(y)), (int(x) + 1, int(y))
        p01, p11 = (int(x), int(y) + 1), (int(x) + 1, int(y) + 1)
        if matching[p00] == p10 and matching[p01] == p11:
            matching[p00], matching[p01] = p01, p00
            matching[p10], matching[p11] = p11, p10
        elif matching[p00] == p01 and matching[p10] == p11:
            matching[p00], matching[p10] = p10, p00
            matching[p01], matching[p11] = p11, p01
    return DimerSample(N=N, matching=matching,
                       face_heights=_dimer_face_heights(N, matching))


def compose_fluctuations(base: RatioAssignment,
                         link_multipliers: dict | None = None,
                         site_multipliers: dict | None = None) -> RatioAssignment:
    """Multiply mountain ratios by fluctuation multipliers (gauge-preserving
    for link multipliers derived from a height potential; site multipliers do
    not enter the gauge condition at all)."""
    out = base.copy()
    if link_multipliers:
        for key, m in link_multipliers.items():
            out.link[key] = out.link[key] * m
    if site_multipliers:
        for key, m in site_multipliers.items():
            out.site[key] = out.site[key] * m
    return out


# ---------------------------------------------------------------------------
# ratios -> concrete hierarchical graph
# ---------------------------------------------------------------------------

def heights_to_graph(assignment, degree: int,
                     corner_count: int | None = None) -> SupergraphSpec:
    """Materialize the supergraph spec over the Lieb lattice from exact
    ratios or exact height fields.

    Edge counts are propagated axis by axis along lattice lines; a line
    starting at a boundary point inherits its first count from the already
    assigned axis edge at that point, which realizes the equal-boundary-count
    convention, with the corner seeded at 2D.  Raises ``NonIntegral`` when any
    vertex or edge count comes out fractional.
    """
    if isinstance(assignment, HeightFields):
        if assignment.mode != "exact":
            raise NonIntegral("construction mode needs exact height fields")
        assignment = heights_to_ratios(assignment)
    N, d = assignment.N, assignment.d
    lattice = LiebLattice(N, d)
    if not assignment.is_exact():
        raise NonIntegral("construction mode needs exact rational ratios")
    report = check_gauge(assignment, lattice)
    if not report.satisfied:
        raise GaugeViolated(f"{len(report.failing)} 2-cells violate the gauge condition")
    if corner_count is None:
        corner_count = 2 * degree

    low: dict = {}   # (axis, base) -> count of edge (x, x+e_axis/2)
    high: dict = {}  # (axis, base) -> count of edge (x+e_axis/2, x+e_axis)

    # all (axis, line base) pairs, in increasing distance from the origin so
    # that every seed can be read off an already processed axis line
    lines = []
    for axis in range(d):
        shape = [N] * d
        shape[axis] = 1
        for x in np.ndindex(*shape):
            lines.append((sum(x), axis, tuple(x)))
    lines.sort()

    origin = (0,) * d
    for _, axis, base in lines:
        if base == origin:
            seed_val = Fraction(corner_count)
        else:
            j = min(k for k in range(d) if base[k] > 0)
            if base[j] <= N - 2:
                seed_val = low[(j, base)]
            else:
                seed_val = high[(j, _add(base, _scale(_unit(d, j), -1)))]
        a = seed_val
        x = base
        for k in range(N - 1):
            r = assignment.link[(axis, x)]
            low[(axis, x)] = a
            b = a * r
            high[(axis, x)] = b
            if k < N - 2:
                nxt = _add(x, _unit(d, axis))
                rho = assignment.site[(axis, nxt)]
                a = b * rho
                x = nxt

    # sizes
    far = (N - 1,) * d
    sizes_frac: dict = {}
    for axis in range(d):
        for x in lattice.iter_links(axis):
            mid = lattice.delta1_site(axis, x)
            sizes_frac[mid] = (low[(axis, x)] + high[(axis, x)]) / degree
    for x0 in lattice.sites0:
        x = tuple(c // 2 for c in x0)
        total = Fraction(0)
        for axis in range(d):
            if x[axis] <= N - 2:
                total += low[(axis, x)]
            if x[axis] >= 1:
                total += high[(axis, _add(x, _scale(_unit(d, axis), -1)))]
        sizes_frac[x0] = total / degree

    bad = [(s, v) for s, v in sizes_frac.items() if v.denominator != 1]
    bad += [(k, v) for k, v in list(low.items()) + list(high.items())
            if v.denominator != 1]
    if bad:
        raise NonIntegral(f"{len(bad)} fractional counts, e.g. {bad[0]}")

    site_ids = {s: i for i, s in enumerate(lattice.sites)}
    sizes = {site_ids[s]: int(v) for s, v in sizes_frac.items()}
    origin_id = site_ids[_scale(origin, 2)]
    far_id = site_ids[_scale(far, 2)]
    sizes[origin_id] = 1
    sizes[far_id] = 1

    edges = []
    counts = {}
    for axis in range(d):
        for x in lattice.iter_links(axis):
            mid = site_ids[lattice.delta1_site(axis, x)]
            lo = site_ids[_scale(x, 2)]
            hi = site_ids[_scale(_add(x, _unit(d, axis)), 2)]
            edges.append((lo, mid))
            counts[(lo, mid)] = int(low[(axis, x)])
            edges.append((mid, hi))
            counts[(mid, hi)] = int(high[(axis, x)])

    balanced = all(c % sizes[u] == 0 and c % sizes[v] == 0
                   for (u, v), c in counts.items())
    spec = SupergraphSpec(
        vertices=list(range(lattice.n_sites())),
        edges=edges,
        sizes=sizes,
        edge_counts=counts,
        degree=degree,
        init_vertex=origin_id,
        exit_vertex=far_id,
        degree_exempt={origin_id, far_id},
        metadata={"ensemble": "lieb", "N": N, "d": d,
                  "site_labels": [list(s) for s in lattice.sites],
                  "balanced_splits": balanced},
    )
    spec.validate(require_regular=True, require_balanced=False)
    return spec


def build_mountain_spec(N: int, d: int, degree: int, f: int,
                        fluct: str = "none", seed: int = 0,
                        max_tries: int = 64) -> tuple[SupergraphSpec, RatioAssignment]:
    """Mountain landscape with optional ice/dimer fluctuations, retried over
    fluctuation seeds until all counts come out integral."""
    base = mountain_ratios(N, d, degree, f)
    if fluct == "none":
        return heights_to_graph(base, degree), base
    if d != 2:
        raise ValueError("ice/dimer fluctuations are defined for d = 2 only")
    last = None
    for k in range(max_tries):
        if fluct == "ice":
            mult = sample_square_ice(N, seed + k).multipliers()
            assignment = compose_fluctuations(base, link_multipliers=mult)
        elif fluct == "dimer":
            mult = sample_dimer_fluctuations(N, seed + k).multipliers()
            assignment = compose_fluctuations(base, site_multipliers=mult)
        else:
            raise ValueError(f"unknown fluctuation kind {fluct!r}")
        try:
            spec = heights_to_graph(assignment, degree)
            spec.metadata["fluct"] = fluct
            spec.metadata["fluct_tries"] = k + 1
            return spec, assignment
        except NonIntegral as exc:
            last = exc
    raise NonIntegral(f"no integral instance within {max_tries} tries: {last}")


# ---------------------------------------------------------------------------
# height fields
# ---------------------------------------------------------------------------

@dataclass
class HeightFields:
    """phi on the cell sublattice, chi^(i) per edge-orientation sublattice.

    Exact mode stores multiplicative heights (Fractions, exp of the log
    height); float mode stores additive log heights as produced by the
    Gaussian sampler.
    """

    N: int
    d: int
    mode: str                 # "exact" | "float"
    phi: dict
    chi: dict                 # axis -> {site: value}


def ratios_to_heights(assignment: RatioAssignment) -> HeightFields:
    """Integrate exact ratios into height fields along spanning trees.

    phi is integrated over the cell lattice from the origin (gauge required
    for consistency); each chi^(i) line is integrated along its own axis with
    the first site pinned to 1.
    """
    N, d = assignment.N, assignment.d
    phi = {(0,) * d: Fraction(1)}
    order = sorted(np.ndindex(*(N,) * d), key=sum)
    for x in order:
        x = tuple(x)
        if x in phi:
            continue
        j = min(k for k in range(d) if x[k] > 0)
        prev = _add(x, _scale(_unit(d, j), -1))
        phi[x] = phi[prev] * assignment.link[(j, prev)]
    # consistency on the remaining links (equivalent to the gauge condition)
    lattice = LiebLattice(N, d)
    for axis in range(d):
        for x in lattice.iter_links(axis):
            y = _add(x, _unit(d, axis))
            if phi[y] != phi[x] * assignment.link[(axis, x)]:
                raise GaugeViolated(f"link ({axis}, {x}) inconsistent with a potential")
    chi = {}
    for axis in range(d):
        field_ax = {}
        shape = [N] * d
        shape[axis] = 1
        for base in np.ndindex(*shape):
            base = tuple(base)
            val = Fraction(1)
            x = base
            field_ax[_add(_scale(x, 2), _unit(d, axis))] = val
            for k in range(N - 2):
                nxt = _add(x, _unit(d, axis))
                val = val * assignment.site[(axis, nxt)]
                field_ax[_add(_scale(nxt, 2), _unit(d, axis))] = val
                x = nxt
        chi[axis] = field_ax
    return HeightFields(N=N, d=d, mode="exact", phi=phi, chi=chi)


def heights_to_ratios(fields: HeightFields) -> RatioAssignment:
    """Differences of heights back into ratios (inverse of ratios_to_heights)."""
    N, d = fields.N, fields.d
    lattice = LiebLattice(N, d)
    link = {}
    site = {}
    for axis in range(d):
        for x in lattice.iter_links(axis):
            y = _add(x, _unit(d, axis))
            link[(axis, x)] = fields.phi[y] / fields.phi[x]
        for x in lattice.iter_site_crossings(axis):
            hi = _add(_scale(x, 2), _unit(d, axis))
            lo = _add(_scale(_add(x, _scale(_unit(d, axis), -1)), 2), _unit(d, axis))
            site[(axis, x)] = fields.chi[axis][hi] / fields.chi[axis][lo]
    return RatioAssignment(N=N, d=d, link=link, site=site)


# ---------------------------------------------------------------------------
# Gaussian free field sampler (analysis mode)
# ---------------------------------------------------------------------------

def _grid_graph(shape: tuple) -> tuple[list, list]:
    sites = [tuple(x) for x in np.ndindex(*shape)]
    index = {s: i for i, s in enumerate(sites)}
    edges = []
    for s in sites:
        for axis in range(len(shape)):
            t = _add(s, _unit(len(shape), axis))
            if t[axis] < shape[axis]:
                edges.append((index[s], index[t]))
    return sites, edges


def _gaussian_field(shape: tuple, J: dict | None, g: float,
                    rng: np.random.Generator, n_samples: int = 1) -> tuple[list, np.ndarray]:
    """Samples of the pinned lattice Gaussian with action
    sum_edges (phi_v - phi_w - J_vw)^2 / (2 g^2); phi(origin) = 0."""
    sites, edges = _grid_graph(shape)
    n = len(sites)
    lap = np.zeros((n, n))
    div = np.zeros(n)
    for (i, j) in edges:
        lap[i, i] += 1
        lap[j, j] += 1
        lap[i, j] -= 1
        lap[j, i] -= 1
        jval = 0.0
        if J is not None:
            jval = J.get((sites[i], sites[j]), 0.0)
        # mean-field normal equations: L mu = div(J)
        div[i] -= jval
        div[j] += jval
    red = lap[1:, 1:]
    mu = np.zeros(n)
    if J is not None:
        mu[1:] = np.linalg.solve(red, div[1:])
    chol = scipy.linalg.cholesky(red, lower=True)
    z = rng.standard_normal((n - 1, n_samples))
    fluct = g * scipy.linalg.solve_triangular(chol, z, lower=True, trans="T")
    out = np.zeros((n, n_samples))
    out[1:, :] = fluct
    out += mu[:, None]
    return sites, out


def sample_bgff(lattice: LiebLattice, J: dict | None = None, g: float = 1.0,
                seed: int = 0, n_samples: int = 1) -> list[HeightFields]:
    """Draw float-mode height fields: independent pinned Gaussians on the cell
    sublattice and on each edge-orientation sublattice.

    ``J`` maps "phi" or ("chi", axis) to a per-edge bias dict (keys are pairs
    of undoubled lattice points of that sublattice, oriented increasing).
    """
    N, d = lattice.N, lattice.d
    rng = np.random.default_rng(seed)
    J = J or {}
    phi_sites, phi_vals = _gaussian_field((N,) * d, J.get("phi"), g, rng, n_samples)
    chi_runs = {}
    for axis in range(d):
        shape = [N] * d
        shape[axis] = N - 1
        chi_runs[axis] = _gaussian_field(tuple(shape), J.get(("chi", axis)), g, rng, n_samples)
    out = []
    for k in range(n_samples):
        phi = {s: float(phi_vals[i, k]) for i, s in enumerate(phi_sites)}
        chi = {}
        for axis in range(d):
            sites, vals = chi_runs[axis]
            chi[axis] = {
                _add(_scale(s, 2), _unit(d, axis)): float(vals[i, k])
                for i, s in enumerate(sites)
            }
        out.append(HeightFields(N=N, d=d, mode="float", phi=phi, chi=chi))
    return out


def mountain_bias(N: int, d: int, degree: int, f: int) -> dict:
    """Per-edge bias fields matching the mountain landscape (for BGFF means)."""
    ratios = mountain_ratios(N, d, degree, f)
    phi_j = {}
    for axis in range(d):
        lattice = LiebLattice(N, d)
        for x in lattice.iter_links(axis):
            y = _add(x, _unit(d, axis))
            phi_j[(x, y)] = math.log(float(ratios.link[(axis, x)]))
    return {"phi": phi_j}


# ---------------------------------------------------------------------------
# grid Laplacian quadratic form (spectral bound check)
# ---------------------------------------------------------------------------

def grid_laplacian(N: int, d: int = 2, sparse: bool = False):
    sites, edges = _grid_graph((N,) * d)
    n = len(sites)
    if sparse:
        import scipy.sparse as sp
        rows, cols, vals = [], [], []
        for i, j in edges:
            rows += [i, j, i, j]
            cols += [i, j, j, i]
            vals += [1.0, 1.0, -1.0, -1.0]
        return sp.csc_matrix((vals, (rows, cols)), shape=(n, n))
    lap = np.zeros((n, n))
    for i, j in edges:
        lap[i, i] += 1
        lap[j, j] += 1
        lap[i, j] -= 1
        lap[j, i] -= 1
    return lap


def corner_quadratic_form(N: int, d: int = 2) -> float:
    """eps^T K^+ eps for eps = (far corner) - (origin) on the grid Laplacian."""
    import scipy.sparse.linalg as spla
    lap = grid_laplacian(N, d, sparse=True)
    n = lap.shape[0]
    eps = np.zeros(n)
    eps[0] = -1.0
    eps[-1] = 1.0
    red = lap[1:, :][:, 1:].tocsc()
    x = spla.spsolve(red, eps[1:])
    return float(eps[1:] @ x)
