import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import brentq

from hierwalk import kappa_from_r, sample_factor_line, welded_tree_line
from hierwalk.errors import InvalidWeights


def test_forced_minimal_line():
    spec = sample_factor_line(1, 2, {1: 1.0}, seed=0)
    assert [spec.sizes[i] for i in range(3)] == [1, 2, 1]
    assert [spec.count(0, 1), spec.count(1, 2)] == [2, 2]


def test_rising_falling_ratios():
    # D = 6 with d_L = 2 on the rising half: r = 2 rising, 1/2 falling
    spec = sample_factor_line(5, 6, {2: 1.0}, seed=3)
    e = [spec.count(i - 1, i) for i in range(1, 11)]
    ratios = [Fraction(e[i + 1], e[i]) for i in range(9)]
    assert all(r == 2 for r in ratios[:4])
    assert ratios[4] == 1  # symmetric peak split D/2
    assert all(r == Fraction(1, 2) for r in ratios[5:])


def test_invalid_weights():
    with pytest.raises(InvalidWeights):
        sample_factor_line(3, 6, {4: 1.0}, seed=0)   # 4 is not a factor of 6
    with pytest.raises(InvalidWeights):
        sample_factor_line(3, 5, {1: 1.0}, seed=0)   # odd degree


def test_divisibility_property_many_seeds():
    # every e_i divides by the sampled left degree, over many draws
    for seed in range(300):
        spec = sample_factor_line(1 + seed % 20, 6, {1: 1.0, 2: 1.0, 3: 1.0}, seed)
        k = len(spec.vertices)
        for i in range(1, k - 1):
            e_l = spec.count(i - 1, i)
            e_r = spec.count(i, i + 1)
            # exact degree identity on big ints
            assert e_l + e_r == spec.degree * spec.sizes[i]
            assert e_l % spec.sizes[i] == 0
        # mirror symmetry
        for i in range(k):
            assert spec.sizes[i] == spec.sizes[k - 1 - i]


def test_ratios_recorded_exactly():
    spec = sample_factor_line(6, 6, {2: 1.0, 3: 1.0}, seed=11)
    ratios = [Fraction(a, b) for a, b in spec.metadata["ratios"]]
    e = [spec.count(i - 1, i) for i in range(1, 13)]
    assert ratios == [Fraction(e[i + 1], e[i]) for i in range(11)]
    assert spec.metadata["log_ratio_bound"] >= max(abs(math.log(float(r))) for r in ratios)


def test_line_ensemble_descriptor():
    from hierwalk.ensemble1d import line_ensemble_of
    spec = sample_factor_line(5, 6, {2: 1.0, 3: 1.0}, seed=7)
    ens = line_ensemble_of(spec)
    assert ens.n == 5 and ens.degree == 6
    assert all(abs(math.log(float(r))) <= ens.log_ratio_bound + 1e-12
               for r in ens.ratios)
    # rising half carries a positive mean log ratio under these weights
    assert ens.rising_bias() > 0


def test_kappa_from_r():
    assert kappa_from_r(6, 2) == pytest.approx(2.0)
    assert kappa_from_r(2, 1) == pytest.approx(1.0)
    assert kappa_from_r(4, 3) == pytest.approx(1.0)
    assert kappa_from_r(6, Fraction(2)) == Fraction(2)
    with pytest.raises(ValueError):
        kappa_from_r(4, -1.0)


def test_welded_tree_sizes_and_hoppings():
    spec, chain = welded_tree_line(3)
    assert [spec.sizes[i] for i in range(6)] == [1, 2, 4, 4, 2, 1]
    hop = np.diag(chain.matrix, 1)
    assert np.allclose(hop, [1, 1, math.sqrt(2), 1, 1])
    spec2, _ = welded_tree_line(2)
    assert [spec2.sizes[i] for i in range(4)] == [1, 2, 2, 1]


def test_welded_tree_vertex_total():
    spec, _ = welded_tree_line(6)
    assert spec.total_vertices() == 126
    spec, _ = welded_tree_line(10)
    assert spec.total_vertices() == 2046


def test_welded_top_eigenvector_sinh_form():
    # top eigenvector amplitudes follow sinh(k j) with
    # sinh((n+1) k) / sinh(n k) = sqrt(2)
    for n in (3, 5, 8):
        _, chain = welded_tree_line(n)
        k = brentq(lambda x: math.sinh((n + 1) * x) / math.sinh(n * x) - math.sqrt(2),
                   1e-9, 5.0)
        j = np.arange(1, 2 * n + 1, dtype=float)
        profile = np.sinh(k * np.minimum(j, 2 * n + 1 - j))
        psi = profile / np.linalg.norm(profile)
        lam = float(psi @ chain.matrix @ psi)
        assert np.linalg.norm(chain.matrix @ psi - lam * psi) <= 1e-8
