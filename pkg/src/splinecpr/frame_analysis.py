"""Finite-dimensional frame analysis.

Helpers for real frames ``{a_i} in R^N`` acting on ``C^N`` through
``x -> |<a_i, x>|``: the monomial/derivative frame behind Hermite sampling,
exact spanning dimensions of generator outer products, a sufficient
retrievability test, Monte-Carlo certification and a counterexample search.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.optimize

from .errors import NodeError
from .generator import Generator, _exact_rank
from .gram_recovery import outer_row, sym_index
from .local_recovery import am_from_samples, recover_block
from .sampling import NodeSet
from .signal import dist_up_to_equiv

__all__ = [
    "RealFrame",
    "vandermonde_frame",
    "spanning_dimension",
    "cpr_sufficient",
    "certify_by_recovery",
    "falsify_cpr",
    "FalsifierResult",
]


@dataclass
class RealFrame:
    """``M`` real vectors in ``R^N`` (rows of ``vectors``) with labels."""

    vectors: np.ndarray
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        if not self.labels:
            self.labels = [(None, "v")] * self.vectors.shape[0]

    @property
    def N(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return self.vectors.shape[0]

    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.vectors))

    def measure(self, x) -> np.ndarray:
        """``|<a_i, x>|^2`` for every frame vector."""
        v = self.vectors @ np.asarray(x, dtype=complex)
        return v.real ** 2 + v.imag ** 2

    def to_dict(self) -> dict:
        return {"vectors": self.vectors.tolist(),
                "labels": [[n, k] for n, k in self.labels]}


def vandermonde_frame(N: int, gamma, gamma_prime) -> RealFrame:
    """``(1, g, ..., g^{N-1})`` for ``g`` in ``gamma`` and
    ``(0, 1, 2g', ..., (N-1) g'^{N-2})`` for ``g'`` in ``gamma_prime``."""
    gamma = np.asarray(gamma, dtype=float).ravel()
    gamma_prime = np.asarray(gamma_prime, dtype=float).ravel()
    if N < 3 or gamma.size != 2 * N - 1 or gamma_prime.size != 2 * N - 5:
        raise NodeError(f"need 2N-1 = {2 * N - 1} and 2N-5 = {2 * N - 5} nodes, "
                        f"got {gamma.size} and {gamma_prime.size}")
    for x, what in ((gamma, "function"), (gamma_prime, "derivative")):
        if np.unique(x).size != x.size:
            raise NodeError(f"{what} nodes must be distinct")
    k = np.arange(N)
    V = gamma[:, None] ** k
    Vd = np.zeros((gamma_prime.size, N))
    Vd[:, 1:] = k[1:] * gamma_prime[:, None] ** (k[1:] - 1)
    labels = [(float(g), "f") for g in gamma] + [(float(g), "df") for g in gamma_prime]
    return RealFrame(np.vstack([V, Vd]), labels)


def _poly_mul(p, q):
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return out


def _outer_coefficient_rows(rows):
    """For polynomial entries ``Phi_r``, the coefficient vectors of ``Phi_m Phi_n``."""
    L = len(rows)
    return [_poly_mul(rows[m], rows[n]) for m, n in sym_index(L)]


def spanning_dimension(g: Generator, use_derivative: bool = False) -> int:
    """Exact ``dim span{Phi(x) Phi(x)^T : x in (0, 1)}`` (plus ``Phi'`` terms).

    Each entry of ``Phi(x) Phi(x)^T`` is a polynomial in ``x``; the span
    equals the span of the matrix-valued monomial coefficients, whose rank
    is computed in rational arithmetic.
    """
    phi = [list(p) for p in reversed(g.pieces)]
    mats = [_outer_coefficient_rows(phi)]
    if use_derivative:
        dphi = [list(p) for p in reversed(g.derivative_pieces())]
        mats.append(_outer_coefficient_rows(dphi))
    # columns: (entry, power); rows of the stacked system are the powers
    stacked = []
    for entries in mats:
        width = max(len(e) for e in entries)
        for power in range(width):
            stacked.append([e[power] if power < len(e) else Fraction(0) for e in entries])
    return _exact_rank(stacked)


def cpr_sufficient(frame: RealFrame, rel_tol: float = 1e-9) -> bool:
    """Whether ``{a a^T}`` spans the symmetric matrices (exact rank).

    Float entries are converted to rationals exactly, so the rank is that
    of the frame as stored. ``rel_tol`` is used only as a quick floating
    point pre-check that skips the exact computation in clear cases.
    """
    N = frame.N
    need = N * (N + 1) // 2
    if len(frame) < need:
        return False
    rows = np.array([outer_row(a) for a in frame.vectors])
    s = np.linalg.svd(rows, compute_uv=False)
    if s[need - 1] > rel_tol * s[0]:
        return True
    exact = [[Fraction(float(v)) for v in r] for r in rows]
    return _exact_rank(exact) == need


def _frame_nodes(frame: RealFrame) -> NodeSet:
    gamma = [n for n, k in frame.labels if k == "f"]
    gprime = [n for n, k in frame.labels if k == "df"]
    if not gamma:
        raise NodeError("frame carries no node labels; build it with vandermonde_frame")
    return NodeSet(np.array(gamma), np.array(gprime))


def certify_by_recovery(frame: RealFrame, trials: int = 1000, seed: int = 0,
                        noise: float = 0.0, tol: float = 1e-8) -> dict:
    """Monte-Carlo check that the frame's measurements determine ``x``.

    Draws ``trials`` complex Gaussian vectors, measures them, recovers with
    :func:`~splinecpr.local_recovery.recover_block` and reports the worst
    distance relative to ``|x|``. A pass is probabilistic evidence only.
    """
    nodes = _frame_nodes(frame)
    N = frame.N
    # measurement order must follow the sorted node set
    order_f = np.argsort([n for n, k in frame.labels if k == "f"])
    order_df = np.argsort([n for n, k in frame.labels if k == "df"])
    nf = order_f.size
    rng = np.random.default_rng(seed)
    worst, failures = 0.0, 0
    for _ in range(trials):
        x = rng.normal(size=N) + 1j * rng.normal(size=N)
        y = frame.measure(x)
        if noise:
            y = y + noise * np.abs(y).max() * rng.uniform(-1, 1, y.size)
        try:
            am = am_from_samples(y[:nf][order_f], y[nf:][order_df], nodes)
            b = recover_block(am)
        except Exception:  # noqa: BLE001 - any failure counts against the frame
            failures += 1
            continue
        worst = max(worst, float(dist_up_to_equiv(x, b.d).dist / np.linalg.norm(x)))
    return {"N": N, "trials": trials, "seed": seed, "max_dist": worst,
            "failures": failures, "passed": bool(failures == 0 and worst <= tol), "tol": tol}


@dataclass
class FalsifierResult:
    """``x`` and ``y`` with equal frame magnitudes but not equivalent, if found."""

    found: bool
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    residual: float = float("inf")
    s_norm: float = 0.0
    verified: bool = False

    def to_dict(self) -> dict:
        out = {"found": self.found, "residual": self.residual, "s_norm": self.s_norm,
               "verified": self.verified}
        if self.found:
            out["x"] = [[float(v.real), float(v.imag)] for v in self.x]
            out["y"] = [[float(v.real), float(v.imag)] for v in self.y]
        return out


def _objective(v, A):
    N = A.shape[1]
    xr, xi, yr, yi = v.reshape(4, N)
    S = np.outer(xr, xr) + np.outer(xi, xi) - np.outer(yr, yr) - np.outer(yi, yi)
    m = np.einsum("in,nk,ik->i", A, S, A)
    F = m @ m
    Q = float(np.sum(S * S))
    if Q == 0.0:
        return 1.0, np.zeros_like(v)
    M = A.T @ (m[:, None] * A)
    dF = 4 * np.concatenate([M @ xr, M @ xi, -M @ yr, -M @ yi])
    dQ = 4 * np.concatenate([S @ xr, S @ xi, -S @ yr, -S @ yi])
    R = F / Q ** 2
    return R, dF / Q ** 2 - 2 * F * dQ / Q ** 3


def verify_certificate(frame: RealFrame, x, y, tol: float = 1e-8) -> bool:
    """Equal magnitudes on every frame vector yet inequivalent."""
    mx, my = frame.measure(x), frame.measure(y)
    scale = max(float(np.abs(mx).max()), float(np.abs(my).max()), 1e-300)
    same = float(np.abs(mx - my).max()) <= tol * scale
    apart = dist_up_to_equiv(x, y).dist > 1e-6 * max(np.linalg.norm(x), np.linalg.norm(y))
    return bool(same and apart)


def falsify_cpr(frame: RealFrame, restarts: int = 100, seed: int = 0,
                res_tol: float = 1e-10, s_tol: float = 1e-6) -> FalsifierResult:
    """Search for ``x, y`` with ``|<a, x>| = |<a, y>|`` on the frame, ``x !~ y``.

    Minimizes ``sum_i (a_i^T S a_i)^2 / |S|_F^4`` with
    ``S = Re(x x^*) - Re(y y^*)`` from random starts. A candidate is kept
    when the ratio is below ``res_tol`` and ``|S|_F > s_tol`` for unit
    ``(x, y)``, and is then checked directly on the measurements.
    Failure to find one is inconclusive, not a proof.

    Raises:
        ValueError: frame rank below ``N``.
    """
    A = frame.vectors
    N = frame.N
    if frame.rank() < N:
        raise ValueError(f"frame has rank {frame.rank()} < {N}")
    A = A / np.linalg.norm(A, axis=1, keepdims=True).clip(1e-300)
    rng = np.random.default_rng(seed)
    best = FalsifierResult(False)
    for _ in range(restarts):
        v0 = rng.normal(size=4 * N)
        res = scipy.optimize.minimize(_objective, v0, args=(A,), jac=True, method="L-BFGS-B",
                                      options={"maxiter": 500, "ftol": 1e-30, "gtol": 1e-14})
        v = res.x / np.linalg.norm(res.x)
        R, _ = _objective(v, A)
        xr, xi, yr, yi = v.reshape(4, N)
        S = np.outer(xr, xr) + np.outer(xi, xi) - np.outer(yr, yr) - np.outer(yi, yi)
        s_norm = float(np.linalg.norm(S))
        if R < best.residual:
            best = FalsifierResult(False, residual=float(R), s_norm=s_norm)
        if R < res_tol and s_norm > s_tol:
            x, y = xr + 1j * xi, yr + 1j * yi
            ok = verify_certificate(frame, x, y)
            if ok:
                return FalsifierResult(True, x, y, float(R), s_norm, True)
    return best
