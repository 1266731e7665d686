import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splinecpr.errors import NodeError
from splinecpr.generator import bspline, phi1
from splinecpr.sampling import (NodeSet, SampleSet, chebyshev_nodes, default_nodes, sup_norm,
                                take_samples)
from splinecpr.signal import CoeffSeq, eval_signal, eval_signal_deriv


def _signal(seed, n=6):
    r = np.random.default_rng(seed)
    return CoeffSeq(int(r.integers(-3, 3)), r.uniform(-1, 1, n) + 1j * r.uniform(-1, 1, n))


@pytest.mark.parametrize("N, nf, nd", [(3, 5, 1), (4, 7, 3), (6, 11, 7)])
def test_default_node_counts(N, nf, nd):
    nodes = default_nodes(N)
    assert nodes.gamma.size == nf and nodes.gamma_prime.size == nd
    assert nodes.hermite_order == N


def test_default_nodes_reject_small_n():
    with pytest.raises(NodeError):
        default_nodes(2)


def test_chebyshev_nodes_inside_and_sorted():
    x = chebyshev_nodes(9)
    assert np.all(np.diff(x) > 0) and x[0] > 0 and x[-1] < 1
    assert x[4] == pytest.approx(0.5)


@pytest.mark.parametrize("gamma", [[0.1, 0.1, 0.5], [0.0, 0.5, 0.7], [0.2, 1.0, 0.4]])
def test_nodeset_validation(gamma):
    with pytest.raises(NodeError):
        NodeSet(np.array(gamma))


def test_hermite_order_needs_matching_counts():
    with pytest.raises(NodeError):
        NodeSet(chebyshev_nodes(7), chebyshev_nodes(2)).hermite_order


def test_noiseless_samples_are_exact():
    g = bspline(4)
    c = _signal(1)
    nodes = default_nodes(4)
    S = take_samples(c, g, nodes)
    assert list(S.intervals) == list(range(c.k_minus, c.k_plus + 4))
    for i, j in enumerate(S.intervals):
        f = eval_signal(c, g, nodes.gamma + j)
        df = eval_signal_deriv(c, g, nodes.gamma_prime + j)
        assert np.allclose(S.values_f[i], np.abs(f) ** 2, rtol=0, atol=1e-14)
        assert np.allclose(S.values_df[i], np.abs(df) ** 2, rtol=0, atol=1e-14)


def test_period_scaling():
    g = bspline(3)
    c = _signal(2)
    S1 = take_samples(c, g, default_nodes(3, 1.0))
    S2 = take_samples(c, g, default_nodes(3, 2.0))
    assert np.allclose(S1.values_f, S2.values_f)
    # d/dx of f(x/2) is f'(x/2)/2
    assert np.allclose(S1.values_df, 4 * S2.values_df)


def test_seeded_noise_is_reproducible():
    g, c, nodes = bspline(3), _signal(3), default_nodes(3)
    a = take_samples(c, g, nodes, 1e-3, seed=9)
    b = take_samples(c, g, nodes, 1e-3, seed=9)
    d = take_samples(c, g, nodes, 1e-3, seed=10)
    assert np.array_equal(a.values_f, b.values_f) and np.array_equal(a.values_df, b.values_df)
    assert not np.array_equal(a.values_f, d.values_f)


def test_noise_bounded_and_nonnegative():
    g, c, nodes = bspline(4), _signal(4), default_nodes(4)
    clean = take_samples(c, g, nodes)
    noisy = take_samples(c, g, nodes, 1e-2, seed=0)
    bound = 1e-2 * noisy.sup_norm ** 2
    assert np.all(np.abs(noisy.values_f - clean.values_f) <= bound + 1e-15)
    assert np.all(noisy.values_f >= 0) and np.all(noisy.values_df >= 0)
    with pytest.raises(ValueError):
        take_samples(c, g, nodes, -1.0)


def test_sup_norm_close_to_grid_max():
    g, c = bspline(3), _signal(5)
    x = np.linspace(c.k_minus, c.k_plus + 3, 20001)
    assert sup_norm(c, g) == pytest.approx(np.abs(eval_signal(c, g, x)).max(), rel=1e-6)


def test_zero_signal_samples():
    S = take_samples(CoeffSeq(0, []), bspline(3), default_nodes(3), intervals=[0, 1])
    assert not S.values_f.any() and not S.values_df.any()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([3, 4, 5]))
def test_gauge_invariance_of_samples(seed, N):
    g, nodes = bspline(N), default_nodes(N)
    c = _signal(seed)
    base = take_samples(c, g, nodes, 1e-4, seed=1)
    # conjugation and quarter turns are exact in floating point
    for other in (c.conj(), c * 1j, c * -1, c.conj() * -1j):
        s = take_samples(other, g, nodes, 1e-4, seed=1)
        assert np.array_equal(s.values_f, base.values_f)
        assert np.array_equal(s.values_df, base.values_df)
    z = np.exp(1j * np.random.default_rng(seed).uniform(0, 2 * np.pi))
    s = take_samples(c * z, g, nodes)
    clean = take_samples(c, g, nodes)
    assert np.allclose(s.values_f, clean.values_f, rtol=1e-13, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1e-2))
def test_csv_and_json_round_trip(seed, noise):
    g = phi1()
    nodes = default_nodes(4, period=1.5)
    S = take_samples(_signal(seed), g, nodes, noise, seed=seed)
    T = SampleSet.from_csv(S.to_csv(), period=1.5, noise=noise, seed=seed)
    assert np.array_equal(T.values_f, S.values_f) and np.array_equal(T.values_df, S.values_df)
    assert T.nodes == S.nodes and np.array_equal(T.intervals, S.intervals)
    U = SampleSet.from_json(S.to_json())
    assert np.array_equal(U.values_f, S.values_f) and U.nodes == S.nodes
    assert U.sup_norm == S.sup_norm


def test_csv_has_version_and_header():
    S = take_samples(CoeffSeq(0, [1]), bspline(3), default_nodes(3))
    lines = S.to_csv().splitlines()
    assert lines[0].startswith("#") and lines[1] == "j,node,kind,value"
    with pytest.raises(ValueError):
        SampleSet.from_csv("a,b,c,d\n1,2,3,4\n")
