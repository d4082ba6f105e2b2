import math

import numpy as np
import pytest

from hierwalk import (bvn_decompose, bvn_sparsify, dense_from_effective,
                      operator_distance, poisson_sparsify, required_degree,
                      welded_tree_line)
from hierwalk.errors import (NotDoublyStochastic, ProbabilityOverflow,
                             Reducible, SizeUnderflow)
from hierwalk.sparsify import BlockPermutationSampler, two_cycle_partner


def welded_dense(n=4, total=800):
    _, chain = welded_tree_line(n)
    return dense_from_effective(chain.matrix, total)


def test_dense_two_block_example():
    t = np.array([[0.0, 1.0], [1.0, 0.0]])
    d = dense_from_effective(t, 8)
    assert d.lam == pytest.approx(1.0)
    assert np.allclose(d.pi, [0.5, 0.5])
    assert list(d.sizes) == [4, 4]
    assert d.block_weight(0, 1) == pytest.approx(0.25)
    a = d.full_adjacency()
    assert np.allclose(a.sum(axis=1), d.lam)


def test_dense_welded_doubling_profile():
    d = welded_dense(5, 2500)
    ratios = d.sizes[1:5] / d.sizes[:4]
    assert np.all(ratios > 1.9)          # roughly doubling up to the middle
    assert np.all(d.sizes == d.sizes[::-1])
    assert d.row_sum_dev <= 1e-1


def test_dense_self_loop_weights():
    t = np.array([[0.5, 1.0], [1.0, 0.5]])
    d = dense_from_effective(t, 10)
    su = d.sizes[0]
    assert d.block_weight(0, 0) == pytest.approx(0.5 * su / (su * (su - 1)))
    a = d.full_adjacency()
    assert np.allclose(a.sum(axis=1), d.lam, atol=1e-9)
    assert np.all(np.diag(a) == 0)


def test_dense_errors():
    with pytest.raises(Reducible):
        dense_from_effective(np.diag([1.0, 2.0]), 10)
    t = np.zeros((3, 3))
    t[0, 1] = t[1, 0] = 1.0
    t[1, 2] = t[2, 1] = 0.001
    with pytest.raises(SizeUnderflow):
        dense_from_effective(t, 12)


def test_poisson_probability_formula_and_degree():
    t = np.array([[0.0, 1.0], [1.0, 0.0]])
    d = dense_from_effective(t, 8)
    # p = w * D / lam = 1/4 at D = 1
    g, scale = poisson_sparsify(d, 1, seed=0)
    assert scale == pytest.approx(1.0)
    with pytest.raises(ProbabilityOverflow):
        poisson_sparsify(d, 5, seed=0)
    dense = welded_dense(4, 1200)
    degs = []
    for seed in range(30):
        g, _ = poisson_sparsify(dense, 20, seed=seed)
        degs.append(g.degrees().mean())
    se = np.std(degs, ddof=1) / math.sqrt(len(degs))
    assert abs(np.mean(degs) - 20) <= 3 * se + 0.05


def test_bvn_decompose_examples():
    p = np.eye(4)[[1, 2, 3, 0]]
    terms = bvn_decompose(p)
    assert len(terms) == 1
    assert terms[0][0] == pytest.approx(1.0)
    assert np.array_equal(terms[0][1], p)

    m = np.array([[0.3, 0.7], [0.7, 0.3]])
    terms = bvn_decompose(m)
    weights = sorted(w for w, _ in terms)
    assert weights == pytest.approx([0.3, 0.7])

    rng = np.random.default_rng(1)
    x = rng.uniform(0.2, 1.0, (6, 6))
    for _ in range(3000):
        x /= x.sum(axis=1, keepdims=True)
        x /= x.sum(axis=0, keepdims=True)
    terms = bvn_decompose(x, tol=1e-9)
    assert len(terms) <= 26
    recon = sum(w * p for w, p in terms)
    assert np.max(np.abs(recon - x)) <= 1e-8

    with pytest.raises(NotDoublyStochastic):
        bvn_decompose(np.array([[0.5, 0.2], [0.5, 0.8]]))


def test_block_sampler_flows_and_law():
    dense = welded_dense(4, 600)
    rng = np.random.default_rng(0)
    sampler = BlockPermutationSampler(dense, rng)
    mem = dense.membership()
    counts = np.zeros((dense.n_blocks, dense.n_blocks))
    for _ in range(40):
        p = sampler.sample()
        assert np.array_equal(np.sort(p), np.arange(dense.n_total))
        assert np.all(p != np.arange(dense.n_total))
        for u in range(dense.n_blocks):
            members = np.nonzero(mem == u)[0]
            tgt = np.bincount(mem[p[members]], minlength=dense.n_blocks)
            counts[u] += tgt
    counts /= 40
    for (u, v), target in sampler.flows.items():
        assert counts[u, v] == pytest.approx(target, abs=1.0)


def test_two_cycle_partner_properties():
    dense = welded_dense(3, 240)
    rng = np.random.default_rng(2)
    sampler = BlockPermutationSampler(dense, rng)
    mem = dense.membership()
    n = dense.n_total
    for _ in range(20):
        p = sampler.sample()
        f, unmatched = two_cycle_partner(p, mem, rng)
        assert np.array_equal(np.sort(f), np.arange(n))
        # the symmetrized term is exactly symmetric
        def as_matrix(q):
            m = np.zeros((n, n))
            m[np.arange(n), q] = 1.0
            return m
        term = as_matrix(p) + as_matrix(p).T + as_matrix(f) + as_matrix(f).T
        assert np.array_equal(term, term.T)
        # partner differs from p only inside two-cycle vertices
        two = {x for x in range(n) if p[p[x]] == x}
        outside = np.array(sorted(set(range(n)) - two), dtype=np.int64)
        if len(outside):
            assert np.array_equal(f[outside], p[outside])
        assert unmatched >= 0


def test_bvn_sparsify_structure():
    dense = welded_dense(4, 800)
    res = bvn_sparsify(dense, 24, seed=3)
    deg = res.graph.degrees()
    assert deg.min() == deg.max() == 48          # 2D-regular multigraph
    mem = res.graph.membership
    for (x, y), m in res.multiplicities.items():
        if mem[x] in res.large and mem[y] in res.large:
            assert m == 1
    assert res.rewired > 0
    adj = res.graph.adjacency().toarray() * res.scale
    assert np.allclose(adj, adj.T)
    assert np.allclose(adj.sum(axis=1), dense.lam, atol=1e-9)


def test_operator_distance():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((60, 60))
    a = a + a.T
    assert operator_distance(a, a) <= 1e-9
    e = np.zeros((60, 60))
    e[3, 7] = e[7, 3] = 1.0
    assert operator_distance(a + e, a) == pytest.approx(1.0, rel=1e-5)
    for _ in range(10):
        b = rng.standard_normal((200, 200))
        b = b + b.T
        c = rng.standard_normal((200, 200))
        c = c + c.T
        ref = np.linalg.norm(b - 0.5 * c, 2)
        assert operator_distance(b, c, scale=0.5) == pytest.approx(ref, rel=1e-5)


def test_distance_shrinks_with_degree():
    dense = welded_dense(4, 800)
    a = dense.full_adjacency()
    degrees = [16, 32, 64, 128]
    med = []
    for D in degrees:
        dists = []
        for seed in range(20):
            res = bvn_sparsify(dense, D, seed=seed)
            adj = res.graph.adjacency().toarray() * res.scale
            dists.append(operator_distance(a, adj))
        med.append(np.median(dists))
    logd = np.log(degrees)
    logm = np.log(med)
    slope = np.polyfit(logd, logm, 1)[0]
    assert -0.7 <= slope <= -0.3


def test_required_degree():
    assert required_degree(10, 0.1, 2.0, math.e, "bvn") == pytest.approx(2_560_000)
    assert required_degree(10, 0.1, 2.0, math.e, "poisson") == pytest.approx(640_000)
    base = required_degree(10, 0.1, 1.0, 100.0, "poisson")
    assert required_degree(20, 0.1, 1.0, 100.0, "poisson") > base
    assert required_degree(10, 0.05, 1.0, 100.0, "poisson") > base
