"""Zero modes, spectra, inversion gap bounds, DOS windows, localization."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg

from .core import EffectiveHamiltonian, SupergraphSpec
from .errors import (CapExceeded, DegreeIdentityViolated, EvenChain,
                     GaugeViolated, ZeroHopping)
from .lieb import LiebLattice, RatioAssignment, check_gauge

DENSE_CAP = 8000
ZERO_TOL_REL = 1e-10


@dataclass
class ZeroMode:
    coefficients: np.ndarray
    support: str              # "line" | "delta0"
    residual: float


@dataclass
class SpectralSummary:
    eigenvalues: np.ndarray
    gap: float
    zero_count: int
    tol: float

    def stable_under(self, factor: float = 10.0) -> bool:
        alt = int(np.sum(np.abs(self.eigenvalues) < self.tol * factor))
        return alt == self.zero_count


def chain_hamiltonian(hoppings: np.ndarray, diagonal: np.ndarray | None = None) -> np.ndarray:
    n = len(hoppings) + 1
    h = np.zeros((n, n))
    idx = np.arange(n - 1)
    h[idx, idx + 1] = hoppings
    h[idx + 1, idx] = hoppings
    if diagonal is not None:
        h[np.arange(n), np.arange(n)] = diagonal
    return h


def hoppings_of_line_spec(spec: SupergraphSpec) -> np.ndarray:
    """Hopping amplitudes t_i = e_i / sqrt(s_{i-1} s_i) of a line spec."""
    k = len(spec.vertices)
    out = np.empty(k - 1)
    for i in range(1, k):
        e = spec.count(i - 1, i)
        out[i - 1] = math.exp(math.log(e) - 0.5 * math.log(spec.sizes[i - 1])
                              - 0.5 * math.log(spec.sizes[i]))
    return out


def zero_mode_line(hoppings) -> ZeroMode:
    """Closed-form zero mode of an odd chain with zero diagonal.

    Accepts the hopping list or a tridiagonal effective Hamiltonian.
    Even-site amplitudes are alternating products of hopping ratios (computed
    as sums of logs with a global max shift); odd sites vanish identically.
    """
    if isinstance(hoppings, EffectiveHamiltonian):
        hoppings = hoppings.matrix
    hoppings = np.asarray(hoppings, dtype=float)
    if hoppings.ndim == 2:
        hoppings = np.diag(hoppings, 1)
    n_sites = len(hoppings) + 1
    if n_sites % 2 == 0:
        raise EvenChain("zero mode exists only for odd chains")
    if np.any(hoppings == 0):
        raise ZeroHopping("all hoppings must be nonzero")
    logs = np.log(np.abs(hoppings))
    n_even = (n_sites + 1) // 2
    log_amp = np.zeros(n_even)
    # log |psi_{2j}| = sum_{k<j} (log t_{2k} - log t_{2k+1})
    log_amp[1:] = np.cumsum(logs[0:-1:2] - logs[1::2])
    log_amp -= log_amp.max()
    amps = np.exp(log_amp) * np.power(-1.0, np.arange(n_even))
    psi = np.zeros(n_sites)
    psi[::2] = amps
    psi /= np.linalg.norm(psi)
    h = chain_hamiltonian(hoppings)
    residual = float(np.linalg.norm(h @ psi))
    return ZeroMode(coefficients=psi, support="line", residual=residual)


def spectrum(matrix: np.ndarray, tol: float | None = None) -> SpectralSummary:
    """Dense eigen-decomposition with zero-mode counting and the gap above tol."""
    if isinstance(matrix, EffectiveHamiltonian):
        matrix = matrix.matrix
    n = matrix.shape[0]
    if n > DENSE_CAP:
        raise CapExceeded(f"dense solver capped at {DENSE_CAP}, got {n}")
    evals = scipy.linalg.eigvalsh(matrix)
    radius = float(np.max(np.abs(evals))) if n else 0.0
    if tol is None:
        tol = ZERO_TOL_REL * max(radius, 1.0)
    absvals = np.abs(evals)
    zero_count = int(np.sum(absvals < tol))
    nonzero = absvals[absvals >= tol]
    gap = float(nonzero.min()) if len(nonzero) else math.inf
    return SpectralSummary(eigenvalues=evals, gap=gap, zero_count=zero_count, tol=tol)


# ---------------------------------------------------------------------------
# exact inversion of even chains
# ---------------------------------------------------------------------------

def even_chain_inverse(hoppings: np.ndarray) -> tuple[np.ndarray, float]:
    """Closed-form inverse of an even zero-diagonal chain and the gap bound
    1 / (sqrt(2n) * max column l1 norm) <= |lambda_min|.

    Column b of the inverse is supported on the opposite parity above b:
    x_{b+1} = 1/t_b, then x_{b+1+2j} picks up a factor -t_{b+2j-1}/t_{b+2j}.
    """
    hoppings = np.asarray(hoppings, dtype=float)
    m = len(hoppings) + 1
    if m % 2 != 0:
        raise EvenChain("chain length must be even")
    if np.any(hoppings == 0):
        raise ZeroHopping("all hoppings must be nonzero")
    inv = np.zeros((m, m))
    for b in range(0, m - 1, 2):
        x = 1.0 / hoppings[b]
        inv[b + 1, b] = x
        i = b + 1
        while i + 2 < m:
            x = x * (-hoppings[i] / hoppings[i + 1])
            inv[i + 2, b] = x
            i += 2
    inv = inv + inv.T      # odd rows over even columns, mirrored by symmetry
    col_norms = np.abs(inv).sum(axis=0)
    bound = 1.0 / (math.sqrt(m) * float(col_norms.max()))
    return inv, bound


def even_chain_gap_bound(hoppings: np.ndarray) -> float:
    """Log-space version of the inversion bound, safe for long snake chains."""
    hoppings = np.asarray(hoppings, dtype=float)
    m = len(hoppings) + 1
    if m % 2 != 0:
        raise EvenChain("chain length must be even")
    logs = np.log(np.abs(hoppings))
    col_terms: list[list[float]] = [[] for _ in range(m)]
    for b in range(0, m - 1, 2):
        # log |inv[i, b]| for i = b+1, b+3, ...; each entry also feeds the
        # mirrored column's norm
        acc = -logs[b]
        col_terms[b].append(acc)
        col_terms[b + 1].append(acc)
        i = b + 1
        while i + 2 < m:
            acc += logs[i] - logs[i + 1]
            col_terms[b].append(acc)
            col_terms[i + 2].append(acc)
            i += 2
    worst = -math.inf
    for terms in col_terms:
        if not terms:
            continue
        tmax = max(terms)
        worst = max(worst, tmax + math.log(sum(math.exp(t - tmax) for t in terms)))
    return math.exp(-worst) / math.sqrt(m)


# ---------------------------------------------------------------------------
# Lieb-lattice Hamiltonians, zero modes, snake bound
# ---------------------------------------------------------------------------

def lieb_hamiltonian(assignment: RatioAssignment, lattice: LiebLattice) -> np.ndarray:
    """Canonical hopping matrix of a ratio assignment: every down edge gets
    amplitude 1, every up edge the link ratio, so hopping ratios across edge
    sites equal the assigned edge-edge ratios."""
    n = lattice.n_sites()
    h = np.zeros((n, n))
    for axis in range(lattice.d):
        for x in lattice.iter_links(axis):
            mid = lattice.index[lattice.delta1_site(axis, x)]
            lo, hi = lattice.neighbors_of_delta1(axis, x)
            h[lattice.index[lo], mid] = h[mid, lattice.index[lo]] = 1.0
            val = float(assignment.link[(axis, x)])
            h[lattice.index[hi], mid] = h[mid, lattice.index[hi]] = val
    return h


def _staircase_log_amplitudes(lattice: LiebLattice, link: dict,
                              log_weight) -> dict:
    """log |psi_x| over cell sites via the canonical staircase path: walk out
    each axis in turn, dividing by the link ratio at every step."""
    N, d = lattice.N, lattice.d
    out = {}
    for xm in np.ndindex(*(N,) * d):
        x = tuple(xm)
        acc = log_weight(x)
        pos = [0] * d
        for axis in range(d):
            while pos[axis] < x[axis]:
                acc -= math.log(float(link[(axis, tuple(pos))]))
                pos[axis] += 1
        out[x] = acc
    return out


def _mode_from_log_amplitudes(lattice: LiebLattice, log_amp: dict,
                              hamiltonian: np.ndarray) -> ZeroMode:
    shift = max(log_amp.values())
    psi = np.zeros(lattice.n_sites())
    for x, la in log_amp.items():
        sign = -1.0 if sum(x) % 2 else 1.0
        psi[lattice.index[tuple(2 * c for c in x)]] = sign * math.exp(la - shift)
    psi /= np.linalg.norm(psi)
    residual = float(np.linalg.norm(hamiltonian @ psi))
    return ZeroMode(coefficients=psi, support="delta0", residual=residual)


def zero_mode_lieb(assignment: RatioAssignment, lattice: LiebLattice) -> ZeroMode:
    """The unique cell-sublattice zero mode of ``lieb_hamiltonian`` under the
    gauge condition: staircase products of inverse link ratios, alternating
    sign, zero amplitude on edge sites."""
    report = check_gauge(assignment, lattice)
    if not report.satisfied:
        raise GaugeViolated("zero mode needs the gauge condition")
    log_amp = _staircase_log_amplitudes(lattice, assignment.link, lambda x: 0.0)
    h = lieb_hamiltonian(assignment, lattice)
    return _mode_from_log_amplitudes(lattice, log_amp, h)


def spec_link_ratios(spec: SupergraphSpec) -> tuple[RatioAssignment, LiebLattice]:
    """Recover the link-ratio assignment of a heights_to_graph spec."""
    meta = spec.metadata
    N, d = meta["N"], meta["d"]
    lattice = LiebLattice(N, d)
    link = {}
    for axis in range(d):
        for x in lattice.iter_links(axis):
            mid = lattice.index[lattice.delta1_site(axis, x)]
            lo = lattice.index[tuple(2 * c for c in x)]
            hi_pt = list(x)
            hi_pt[axis] += 1
            hi = lattice.index[tuple(2 * c for c in hi_pt)]
            link[(axis, x)] = Fraction(spec.count(mid, hi), spec.count(lo, mid))
    return RatioAssignment(N=N, d=d, link=link), lattice


def lieb_zero_mode_for_spec(spec: SupergraphSpec) -> ZeroMode:
    """Cell-sublattice zero mode of a heights_to_graph spec: the staircase
    products weighted by sqrt(s_x), checked against the spec's effective
    Hamiltonian."""
    from .core import effective_hamiltonian
    assignment, lattice = spec_link_ratios(spec)
    report = check_gauge(assignment, lattice)
    if not report.satisfied:
        raise GaugeViolated("spec counts violate the gauge condition")
    heff = effective_hamiltonian(spec)

    def log_weight(x):
        sid = lattice.index[tuple(2 * c for c in x)]
        return 0.5 * math.log(spec.sizes[sid])

    log_amp = _staircase_log_amplitudes(lattice, assignment.link, log_weight)
    return _mode_from_log_amplitudes(lattice, log_amp, heff.matrix)


def snake_route(lattice: LiebLattice) -> list[tuple]:
    """Serpentine route over the 2D Lieb lattice: full rows of sites joined by
    one vertical edge site at alternating ends; 2 N^2 - 1 sites total."""
    if lattice.d != 2:
        raise ValueError("snake route defined for d = 2")
    N = lattice.N
    route = []
    for y in range(N):
        xs = range(N) if y % 2 == 0 else range(N - 1, -1, -1)
        row = []
        for x in xs:
            row.append((2 * x, 2 * y))
            nxt = x + 1 if y % 2 == 0 else x - 1
            if 0 <= nxt < N:
                row.append((x + nxt, 2 * y))
        route.extend(row)
        if y < N - 1:
            turn_x = N - 1 if y % 2 == 0 else 0
            route.append((2 * turn_x, 2 * y + 1))
    return route


def snake_gap_bound(assignment: RatioAssignment, lattice: LiebLattice,
                    hamiltonian: np.ndarray | None = None) -> float:
    """Even-chain inversion bound along the snake route; interlacing makes it
    a lower bound on the spectral gap of the full Lieb Hamiltonian.

    The deleted vertices are the (N-1)^2 vertical edge sites away from the
    turn columns plus the final route site, leaving an even chain.
    """
    report = check_gauge(assignment, lattice)
    if not report.satisfied:
        raise GaugeViolated("snake bound requires the gauge condition")
    if hamiltonian is None:
        hamiltonian = lieb_hamiltonian(assignment, lattice)
    route = snake_route(lattice)[:-1]
    idx = [lattice.index[s] for s in route]
    hops = np.array([hamiltonian[idx[k], idx[k + 1]] for k in range(len(idx) - 1)])
    assert np.all(hops != 0)
    return even_chain_gap_bound(hops)


# ---------------------------------------------------------------------------
# density of states near zero
# ---------------------------------------------------------------------------

def dos_window(chain_sampler, n_sites: int, eps: float, trials: int, seed: int) -> dict:
    """Mean fraction of eigenvalues of sampled even chains inside (-eps, eps).

    ``chain_sampler(n_sites, seed)`` must return n_sites - 1 hoppings.  Also
    reports the pooled variance of log |t_i| for comparison against the
    window-mass normalization sigma^2 / log^2(1/eps).
    """
    if n_sites % 2 != 0:
        raise EvenChain("window statistics are defined for even chains")
    fractions = np.empty(trials)
    all_logs = []
    for k in range(trials):
        hops = np.asarray(chain_sampler(n_sites, seed + k), dtype=float)
        evals = scipy.linalg.eigvalsh(chain_hamiltonian(hops))
        fractions[k] = np.mean(np.abs(evals) < eps)
        all_logs.append(np.log(np.abs(hops)))
    logs = np.concatenate(all_logs)
    mu = float(fractions.mean())
    stderr = float(fractions.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return {
        "mu": mu,
        "stderr": stderr,
        "eps": eps,
        "n_sites": n_sites,
        "sigma2_log_t": float(logs.var(ddof=1)),
        "prediction": float(logs.var(ddof=1)) / math.log(1.0 / eps) ** 2,
    }


# ---------------------------------------------------------------------------
# transfer matrices and the Lyapunov exponent
# ---------------------------------------------------------------------------

def lyapunov(u_generator, energy: float, length: int, trials: int, seed: int,
             renorm_every: int = 32) -> dict:
    """Growth rate of transfer-matrix products (1/n) log ||X_n ... X_1||.

    ``u_generator(length, seed)`` yields the onsite sequence.  The running
    product is renormalized every ``renorm_every`` steps to avoid overflow.
    """
    if length < 10**3:
        raise ValueError("length must be at least 1000")
    rates = np.empty(trials)
    for k in range(trials):
        u = np.asarray(u_generator(length, seed + k), dtype=float)
        m = np.eye(2)
        log_norm = 0.0
        for i in range(length):
            step = np.array([[energy - u[i], -1.0], [1.0, 0.0]])
            m = step @ m
            if (i + 1) % renorm_every == 0:
                s = np.linalg.norm(m, 2)
                log_norm += math.log(s)
                m /= s
        log_norm += math.log(np.linalg.norm(m, 2))
        rates[k] = log_norm / length
    mean = float(rates.mean())
    stderr = float(rates.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return {"lambda_f": mean, "stderr": stderr, "trials": trials, "length": length}


def uniform_onsite(low: float = 0.0, high: float = 1.0):
    def gen(length, seed):
        return np.random.default_rng(seed).uniform(low, high, size=length)
    return gen


def aubry_andre_onsite(lam: float, alpha: float, phase: float = 0.0,
                       b: float | None = None):
    """Quasiperiodic onsite sequence u_n = 2 lam cos(2 pi n b + phase) /
    (1 - alpha cos(2 pi n b + phase)) with b the golden ratio by default."""
    if b is None:
        b = (math.sqrt(5.0) + 1.0) / 2.0

    def gen(length, seed=0):
        n = np.arange(length)
        c = np.cos(2 * math.pi * n * b + phase)
        return 2 * lam * c / (1 - alpha * c)
    return gen


# ---------------------------------------------------------------------------
# diagonal disorder
# ---------------------------------------------------------------------------

def diagonal_effective_hamiltonian(spec: SupergraphSpec) -> EffectiveHamiltonian:
    """Line spec with intra-supervertex counts F_i: tridiagonal hoppings plus
    onsite terms 2 F_i / s_i, after checking D s_i = 2 F_i + adjacent counts."""
    k = len(spec.vertices)
    for i in spec.vertices:
        if i in spec.degree_exempt:
            continue
        adj = sum(c for e, c in spec.edge_counts.items() if i in e)
        f = spec.diagonal_counts.get(i, 0)
        if adj + 2 * f != spec.degree * spec.sizes[i]:
            raise DegreeIdentityViolated(
                f"at {i}: {adj} + 2*{f} != {spec.degree}*{spec.sizes[i]}")
    hop = hoppings_of_line_spec(spec)
    diag = np.array([2.0 * spec.diagonal_counts.get(i, 0) / spec.sizes[i]
                     for i in range(k)])
    h = chain_hamiltonian(hop, diag)
    return EffectiveHamiltonian(matrix=h, labels=list(range(k)))


def anderson_chain(n_sites: int, hopping: float, seed: int) -> np.ndarray:
    """Constant-hopping chain with onsite disorder uniform on [0, 1] (the
    geometric-mean superedge restriction makes all hoppings equal)."""
    rng = np.random.default_rng(seed)
    return chain_hamiltonian(np.full(n_sites - 1, hopping), rng.uniform(0, 1, n_sites))
