import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splinecpr.errors import GramRankError, SpanningError
from splinecpr.frame_analysis import spanning_dimension
from splinecpr.generator import Generator, bspline, phi1
from splinecpr.gram_recovery import (build_basis_system, factor_gram, gram_from_samples, gram_of,
                                     outer_row, sym_index)
from splinecpr.sampling import NodeSet, take_samples
from splinecpr.signal import CoeffSeq, dist_up_to_equiv


def test_sym_index_order():
    assert sym_index(3) == [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]


def test_outer_row_quadratic_form():
    v = np.array([1.0, 2.0, -1.0])
    G = np.array([[2.0, 0.5, 1], [0.5, 1, -1], [1, -1, 3]])
    coords = [G[m, n] for m, n in sym_index(3)]
    assert outer_row(v) @ coords == pytest.approx(v @ G @ v)


def test_phi1_basis_system():
    sys = build_basis_system(phi1())
    assert sys.nodes.size == 6 and np.all((sys.nodes > 0) & (sys.nodes < 1))
    assert np.isfinite(sys.cond) and sys.cond < 1e6


def test_b3_lacks_spanning_property():
    with pytest.raises(SpanningError) as exc:
        build_basis_system(bspline(3))
    assert exc.value.dimension == 5


def test_b1_single_node():
    sys = build_basis_system(bspline(1))
    assert sys.nodes.size == 1 and np.allclose(sys.A, [[1.0]])


@pytest.mark.parametrize("g", [bspline(2), bspline(3), bspline(4), phi1()], ids=str)
def test_dimension_agrees_with_exact_rank(g):
    L = g.support_length
    want = spanning_dimension(g)
    try:
        build_basis_system(g)
        got = L * (L + 1) // 2
    except SpanningError as exc:
        got = exc.dimension
    assert got == want


def test_gram_examples():
    assert np.array_equal(gram_of([1, 1j, 0]), np.diag([1.0, 1.0, 0.0]))
    assert np.array_equal(gram_of([1, 1, 1]), np.ones((3, 3)))
    sys = build_basis_system(phi1())
    assert not gram_from_samples(sys, np.zeros(6)).any()
    with pytest.raises(ValueError):
        gram_from_samples(sys, np.zeros(5))


def test_factor_examples():
    assert np.allclose(factor_gram(np.diag([1.0, 1.0, 0.0])), [1, 1j, 0])
    assert np.allclose(factor_gram(np.diag([4.0, 0.0, 0.0])), [2, 0, 0])
    assert not factor_gram(np.zeros((3, 3))).any()
    with pytest.raises(GramRankError):
        factor_gram(np.eye(3))
    with pytest.raises(GramRankError):
        factor_gram(np.diag([1.0, 0.0, -0.5]))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_factor_round_trip(L, seed):
    r = np.random.default_rng(seed)
    w = r.normal(size=L) + 1j * r.normal(size=L)
    assert dist_up_to_equiv(w, factor_gram(gram_of(w))).dist <= 1e-8 * np.linalg.norm(w)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gram_from_exact_samples(seed):
    g = phi1()
    sys = build_basis_system(g)
    r = np.random.default_rng(seed)
    w = r.normal(size=3) + 1j * r.normal(size=3)
    c = CoeffSeq(-2, w)
    S = take_samples(c, g, NodeSet(sys.nodes), intervals=[0])
    G = gram_from_samples(sys, S.values_f[0])
    assert np.allclose(G, gram_of(w), atol=1e-10 * np.abs(w).max() ** 2)


def test_gauge_invariance_of_gram():
    w = np.array([1 + 2j, -0.5, 0.3j])
    assert np.array_equal(gram_of(w.conj()), gram_of(w))
    assert np.array_equal(gram_of(1j * w), gram_of(w))
    assert np.allclose(gram_of(np.exp(0.4j) * w), gram_of(w), atol=1e-14)


def test_degenerate_generator_dimension():
    g = Generator(((1, 0), (1, 0)))
    with pytest.raises(SpanningError) as exc:
        build_basis_system(g)
    assert exc.value.dimension == 1
