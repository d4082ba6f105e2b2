import math

import numpy as np
import pytest

from hierwalk import (build_lieb, even_chain_inverse, lieb_hamiltonian,
                      mountain_ratios, snake_gap_bound, spectrum,
                      zero_mode_lieb, zero_mode_line)
from hierwalk.ensemble1d import sample_factor_line
from hierwalk.errors import DegreeIdentityViolated, EvenChain, GaugeViolated
from hierwalk.lieb import build_mountain_spec
from hierwalk.spectral import (anderson_chain, aubry_andre_onsite,
                               chain_hamiltonian, diagonal_effective_hamiltonian,
                               dos_window, even_chain_gap_bound,
                               hoppings_of_line_spec, lieb_zero_mode_for_spec,
                               lyapunov, snake_route, uniform_onsite)


def factor_hoppings(n, seed, degree=6):
    spec = sample_factor_line(n, degree, {2: 1.0, 3: 1.0}, seed)
    return hoppings_of_line_spec(spec)


def test_zero_mode_line_examples():
    z = zero_mode_line(np.ones(4))
    assert np.allclose(z.coefficients, np.array([1, 0, -1, 0, 1]) / math.sqrt(3))
    z = zero_mode_line(np.array([1.0, 2.0]))
    assert np.allclose(z.coefficients, np.array([2, 0, -1]) / math.sqrt(5))
    # matrix input works too
    z2 = zero_mode_line(chain_hamiltonian(np.array([1.0, 2.0])))
    assert np.allclose(z2.coefficients, z.coefficients)
    with pytest.raises(EvenChain):
        zero_mode_line(np.ones(3))


def test_zero_mode_matches_eigensolver():
    for seed in range(20):
        hop = factor_hoppings(8, seed)
        z = zero_mode_line(hop)
        h = chain_hamiltonian(hop)
        evals, evecs = np.linalg.eigh(h)
        v = evecs[:, np.argmin(np.abs(evals))]
        err = min(np.max(np.abs(v - z.coefficients)),
                  np.max(np.abs(v + z.coefficients)))
        assert err <= 1e-8
        assert z.residual <= 1e-9 * np.max(np.abs(evals))


def test_odd_even_zero_counts():
    for seed in range(25):
        hop = factor_hoppings(6, seed)
        s_odd = spectrum(chain_hamiltonian(hop))
        assert s_odd.zero_count == 1 and s_odd.stable_under()
        s_even = spectrum(chain_hamiltonian(hop[:-1]))
        assert s_even.zero_count == 0 and s_even.stable_under()


def test_spectrum_three_site():
    s = spectrum(chain_hamiltonian(np.ones(2)))
    assert np.allclose(np.sort(s.eigenvalues), [-math.sqrt(2), 0, math.sqrt(2)], atol=1e-12)
    assert s.gap == pytest.approx(math.sqrt(2))
    assert s.zero_count == 1


def test_even_chain_inverse_examples():
    inv, bound = even_chain_inverse(np.array([3.0]))
    assert np.allclose(inv, [[0, 1 / 3], [1 / 3, 0]])
    inv, _ = even_chain_inverse(np.ones(3))
    assert np.allclose(inv, np.linalg.inv(chain_hamiltonian(np.ones(3))), atol=1e-12)
    with pytest.raises(EvenChain):
        even_chain_inverse(np.ones(2))


def test_even_chain_inverse_random_and_bound():
    rng = np.random.default_rng(7)
    for _ in range(60):
        n = int(rng.integers(1, 51))
        hop = rng.uniform(0.3, 3.0, size=2 * n - 1)
        inv, bound = even_chain_inverse(hop)
        h = chain_hamiltonian(hop)
        ref = np.linalg.inv(h)
        assert np.max(np.abs(inv - ref)) <= 1e-10 * np.max(np.abs(ref))
        lam_min = np.min(np.abs(np.linalg.eigvalsh(h)))
        assert bound <= lam_min * (1 + 1e-12)
        assert even_chain_gap_bound(hop) == pytest.approx(bound, rel=1e-9)
        # support: nonzero entries only at odd/even index pairs
        rows, cols = np.nonzero(np.abs(inv) > 1e-15)
        assert np.all((rows + cols) % 2 == 1)


def test_interlacing_on_truncation():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(2, 30))
        hop = rng.uniform(0.3, 3.0, size=2 * n - 1)
        big = np.sort(np.linalg.eigvalsh(chain_hamiltonian(hop)))
        small = np.sort(np.linalg.eigvalsh(chain_hamiltonian(hop[:-1])))
        assert np.all(big[:-1] <= small + 1e-12)
        assert np.all(small <= big[1:] + 1e-12)


def test_end_product_fluctuation_shape():
    # 5th percentile of log(|psi_0 psi_2n| n) stays above -3 sqrt(dhat^2 n log 20)
    for n in (11, 51, 101):
        vals = []
        dhat = 0.0
        for seed in range(500):
            spec = sample_factor_line(n, 6, {2: 1.0, 3: 1.0}, seed)
            dhat = spec.metadata["log_ratio_bound"]
            z = zero_mode_line(hoppings_of_line_spec(spec))
            psi = z.coefficients
            vals.append(math.log(abs(psi[0] * psi[-1]) * n))
        floor = -3.0 * math.sqrt(dhat**2 * n * math.log(20.0))
        assert np.percentile(vals, 5) >= floor


def test_zero_mode_lieb_uniform_and_paths():
    lat = build_lieb(3, 2)
    flat = mountain_ratios(3, 2, 4, 2)
    z = zero_mode_lieb(flat, lat)
    cells = [i for i, s in enumerate(lat.sites) if all(c % 2 == 0 for c in s)]
    mags = np.abs(z.coefficients[cells])
    assert np.allclose(mags, mags[0])
    edge_sites = [i for i in range(lat.n_sites()) if i not in cells]
    assert np.allclose(z.coefficients[edge_sites], 0.0)
    bad = mountain_ratios(3, 2, 30, 10)
    bad.link[(0, (0, 0))] *= 2
    with pytest.raises(GaugeViolated):
        zero_mode_lieb(bad, lat)


def test_zero_mode_lieb_matches_kernel():
    spec, asg = build_mountain_spec(4, 2, 30, 10, fluct="ice", seed=1)
    lat = build_lieb(4, 2)
    h = lieb_hamiltonian(asg, lat)
    z = zero_mode_lieb(asg, lat)
    evals, evecs = np.linalg.eigh(h)
    kernel = evecs[:, np.abs(evals) < 1e-10]
    proj = kernel @ (kernel.T @ z.coefficients)
    assert np.max(np.abs(proj - z.coefficients)) <= 1e-8
    zs = lieb_zero_mode_for_spec(spec)
    assert zs.residual <= 1e-9 * np.max(np.abs(evals)) * 700  # scale of Heff


def test_lieb_zero_counts():
    for N in (3, 4):
        s = spectrum(lieb_hamiltonian(mountain_ratios(N, 2, 30, 10), build_lieb(N, 2)))
        assert s.zero_count == (N - 1) ** 2 + 1
    s = spectrum(lieb_hamiltonian(mountain_ratios(3, 3, 30, 10), build_lieb(3, 3)))
    assert s.zero_count == 29


def test_snake_route_shape_and_bound():
    lat = build_lieb(4, 2)
    route = snake_route(lat)
    assert len(route) == 2 * 16 - 1
    assert len(set(route)) == len(route)
    for a, b in zip(route, route[1:]):
        assert sum(abs(x - y) for x, y in zip(a, b)) == 1
    for seed in range(3):
        spec, asg = build_mountain_spec(4, 2, 30, 10, fluct="ice", seed=seed)
        h = lieb_hamiltonian(asg, lat)
        bound = snake_gap_bound(asg, lat, h)
        assert 0 < bound <= spectrum(h).gap


def test_dos_window_trivial_cases():
    def uniform_chain(n, seed):
        return np.ones(n - 1)

    out = dos_window(uniform_chain, 16, eps=10.0, trials=3, seed=0)
    assert out["mu"] == 1.0
    rigid_gap = 2 * math.sin(math.pi / (2 * (16 + 1)))
    out = dos_window(uniform_chain, 16, eps=rigid_gap * 0.9, trials=3, seed=0)
    assert out["mu"] == 0.0
    with pytest.raises(EvenChain):
        dos_window(uniform_chain, 15, eps=1.0, trials=1, seed=0)


def test_lyapunov_free_and_disordered():
    flat = lyapunov(lambda n, s: np.zeros(n), energy=0.0, length=2000, trials=2, seed=0)
    assert abs(flat["lambda_f"]) <= 1e-3
    out = lyapunov(uniform_onsite(), energy=0.5, length=20000, trials=4, seed=1)
    assert out["lambda_f"] > 5 * out["stderr"] > 0


def test_aubry_andre_formula():
    lam, alpha, phase = 0.5, 0.2, 0.3
    gen = aubry_andre_onsite(lam, alpha, phase)
    u0 = gen(1)[0]
    assert u0 == pytest.approx(2 * lam * math.cos(phase) / (1 - alpha * math.cos(phase)))


def test_diagonal_effective_hamiltonian():
    spec = sample_factor_line(4, 6, {2: 1.0}, seed=0)
    h0 = diagonal_effective_hamiltonian(spec)
    assert np.allclose(np.diag(h0.matrix), 0.0)
    # add intra edges without fixing the degree: identity violated
    spec.diagonal_counts = {4: spec.sizes[4]}
    with pytest.raises(DegreeIdentityViolated):
        diagonal_effective_hamiltonian(spec)


def test_constant_shift_spectrum():
    hop = factor_hoppings(6, 2)
    base = np.linalg.eigvalsh(chain_hamiltonian(hop))
    f = 1.5
    shifted = np.linalg.eigvalsh(chain_hamiltonian(hop, np.full(13, 2 * f)))
    assert np.max(np.abs(shifted - base - 2 * f)) <= 1e-10


def test_anderson_chain_structure():
    h = anderson_chain(10, 0.8, seed=0)
    assert np.allclose(np.diag(h, 1), 0.8)
    d = np.diag(h)
    assert np.all((0 <= d) & (d <= 1))
