import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splinecpr.errors import NodeError
from splinecpr.frame_analysis import (RealFrame, certify_by_recovery, cpr_sufficient, falsify_cpr,
                                      spanning_dimension, vandermonde_frame, verify_certificate)
from splinecpr.generator import bspline, phi1
from splinecpr.sampling import chebyshev_nodes


def _frame(N):
    return vandermonde_frame(N, chebyshev_nodes(2 * N - 1), chebyshev_nodes(2 * N - 5))


@pytest.mark.parametrize("N, size", [(3, 6), (4, 10), (6, 18)])
def test_frame_size(N, size):
    f = _frame(N)
    assert len(f) == size == 4 * N - 6 and f.N == N


def test_frame_vectors():
    f = vandermonde_frame(3, [0.1, 0.2, 0.3, 0.4, 0.5], [0.25])
    assert np.allclose(f.vectors[1], [1, 0.2, 0.04])
    assert np.allclose(f.vectors[-1], [0, 1, 0.5])
    assert f.labels[-1] == (0.25, "df")


def test_frame_rejects_bad_nodes():
    with pytest.raises(NodeError):
        vandermonde_frame(3, [0.1, 0.1, 0.3, 0.4, 0.5], [0.25])
    with pytest.raises(NodeError):
        vandermonde_frame(3, [0.1, 0.3, 0.4, 0.5], [0.25])


@pytest.mark.parametrize("g, deriv, want", [
    (bspline(3), False, 5), (bspline(3), True, 6), (phi1(), False, 6),
    (bspline(1), False, 1), (bspline(2), False, 3),
])
def test_spanning_dimension(g, deriv, want):
    assert spanning_dimension(g, deriv) == want


@pytest.mark.parametrize("N", [2, 3, 4, 5])
def test_spanning_dimension_bounded(N):
    L = N
    assert spanning_dimension(bspline(N)) <= L * (L + 1) // 2


def test_cpr_sufficient():
    full = _frame(3)
    assert cpr_sufficient(full)
    assert not cpr_sufficient(RealFrame(full.vectors[:5]))
    assert not cpr_sufficient(RealFrame(np.eye(3)))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sufficient_implies_certified(seed):
    r = np.random.default_rng(seed)
    gamma = np.sort(r.uniform(0.05, 0.95, 5))
    gp = r.uniform(0.05, 0.95, 1)
    if np.min(np.diff(gamma)) < 1e-3:
        return
    f = vandermonde_frame(3, gamma, gp)
    if cpr_sufficient(f):
        assert certify_by_recovery(f, trials=50, seed=seed, tol=1e-6)["passed"]


def test_certify_small():
    rep = certify_by_recovery(_frame(4), trials=100, seed=1)
    assert rep["passed"] and rep["failures"] == 0 and rep["max_dist"] <= 1e-8


def test_certify_needs_labels():
    with pytest.raises(NodeError):
        certify_by_recovery(RealFrame(np.eye(3)), trials=1)


def test_falsify_standard_basis():
    f = RealFrame(np.eye(3))
    res = falsify_cpr(f, restarts=20, seed=0)
    assert res.found and res.verified
    assert verify_certificate(f, res.x, res.y)
    assert np.allclose(np.abs(res.x), np.abs(res.y), atol=1e-6)


def test_falsify_inconclusive_on_hermite_frame():
    res = falsify_cpr(_frame(3), restarts=30, seed=0)
    assert not res.found and res.residual > 1e-10


def test_falsify_rejects_low_rank():
    with pytest.raises(ValueError):
        falsify_cpr(RealFrame(np.array([[1.0, 0, 0], [0, 1, 0]])))


def test_reports_are_json_ready():
    import json
    json.dumps(certify_by_recovery(_frame(3), trials=5))
    json.dumps(falsify_cpr(RealFrame(np.eye(2)), restarts=5).to_dict())
    json.dumps(_frame(3).to_dict())
