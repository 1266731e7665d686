import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splinecpr.errors import GeneratorError
from splinecpr.generator import (Generator, bspline, eval_generator, eval_generator_deriv,
                                 figure1_generator, local_basis_matrix, phi1)


@pytest.mark.parametrize("x, want", [(0.5, 0.125), (1.0, 0.5), (1.5, 0.75), (3.5, 0.0), (-1.0, 0.0)])
def test_b3_values(x, want):
    assert eval_generator(bspline(3), x) == pytest.approx(want, abs=1e-15)


def test_b3_derivative_at_peak():
    assert eval_generator_deriv(bspline(3), 1.5) == pytest.approx(0.0, abs=1e-15)


def test_b3_exact_pieces():
    g = bspline(3)
    F = Fraction
    assert g.pieces == ((0, 0, F(1, 2)), (F(1, 2), 1, -1), (F(1, 2), -1, F(1, 2)))
    assert g.support_length == 3 and g.degree == 2


@pytest.mark.parametrize("x, want", [(0.5, 0.0625), (3.0, 0.0), (1.0, 0.5)])
def test_phi1_values(x, want):
    assert eval_generator(phi1(), x) == pytest.approx(want, abs=1e-15)


def test_phi1_degree_exceeds_support():
    g = phi1()
    assert g.support_length == 3 and g.degree == 3


@pytest.mark.parametrize("N", [1, 2, 3, 4, 5, 6])
def test_partition_of_unity(N):
    g = bspline(N)
    x = np.random.default_rng(N).uniform(0, 10, 1000)
    total = sum(eval_generator(g, x - k) for k in range(-N, 12))
    assert np.max(np.abs(total - 1)) < 1e-12


@pytest.mark.parametrize("g", [bspline(3), bspline(4), bspline(5), phi1()], ids=str)
def test_derivative_matches_finite_differences(g):
    x = np.random.default_rng(0).uniform(0.01, g.support_length - 0.01, 300)
    x = x[np.abs(x - np.round(x)) > 1e-3]
    h = 1e-6
    fd = (eval_generator(g, x + h) - eval_generator(g, x - h)) / (2 * h)
    d = eval_generator_deriv(g, x)
    assert np.allclose(d, fd, rtol=1e-6, atol=1e-6)


def test_local_basis_b3_rows():
    H = local_basis_matrix(bspline(3))
    # rows: B3(t+2), B3(t+1), B3(t)
    assert np.allclose(H, [[0.5, -1, 0.5], [0.5, 1, -1], [0, 0, 0.5]])


def test_local_basis_b1():
    assert np.array_equal(local_basis_matrix(bspline(1)), [[1.0]])


def test_local_basis_rejects_dependent_shifts():
    g = Generator(((1, 0), (1, 0)))
    with pytest.raises(GeneratorError):
        local_basis_matrix(g)


def test_local_basis_padding():
    H = local_basis_matrix(bspline(3), 5)
    assert H.shape == (3, 5) and not H[:, 3:].any()
    with pytest.raises(GeneratorError):
        local_basis_matrix(bspline(4), 3)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([3, 4, 5]), st.integers(0, 2**32 - 1))
def test_local_basis_round_trip(N, seed):
    g = bspline(N)
    r = np.random.default_rng(seed)
    w = r.normal(size=N) + 1j * r.normal(size=N)
    t = r.uniform(0, 1, 20)
    direct = sum(w[i] * eval_generator(g, t + N - 1 - i) for i in range(N))
    d = local_basis_matrix(g).T @ w
    mono = np.polynomial.polynomial.polyval(t, d)
    assert np.allclose(direct, mono, atol=1e-12)


def test_figure1_generator_smoothness():
    smooth, printed = figure1_generator(), figure1_generator(printed=True)
    assert smooth.is_differentiable()
    assert printed.is_continuous() and not printed.is_differentiable()
    # both start as t^2/2 in the dilated variable: psi(2s) = 2 s^2
    assert smooth.pieces[0] == printed.pieces[0]


def test_json_round_trip():
    g = phi1()
    doc = json.loads(json.dumps(g.to_json()))
    assert Generator.from_json(doc) == g


@pytest.mark.parametrize("doc", [
    {"L": 2, "degree": 1, "pieces": [["1", "0"]]},
    {"L": 1, "degree": 0, "pieces": [["1", "2"]]},
    {"degree": 1, "pieces": [["1"]]},
    {"L": 1, "degree": 0, "pieces": [["x"]]},
])
def test_json_rejects_malformed(doc):
    with pytest.raises(GeneratorError):
        Generator.from_json(doc)


@pytest.mark.parametrize("bad", [0, -1, 2.5])
def test_bspline_rejects_bad_order(bad):
    with pytest.raises(GeneratorError):
        bspline(bad)
