"""Per-interval conjugate phase retrieval of a polynomial from Hermite samples.

On one unit interval the signal is a polynomial ``p(t) = sum_k d_k t^k``
with ``d`` in ``C^N``. Its squared magnitude and that of its derivative are

    |p(t)|^2  = sum_m A_m(d) t^m,          m = 0 .. 2N-2
    |p'(t)|^2 = sum_m A_m(d') t^(m-2),     m = 2 .. 2N-2

with ``A_m(s) = sum_j s_j conj(s_{m-j})`` and ``d' = (k d_k)_k``. The
samples give these autocorrelation-type sequences through two Vandermonde
solves; ``recover_block`` then peels off ``d`` entry by entry, first under
the assumption that the entries are real (after fixing the phase of the
leading nonzero one) and, once a genuinely complex entry is met, through
products with that entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import DegenerateRecoveryError, InconsistentMagnitudesError, NodeError
from .sampling import NodeSet

__all__ = ["AmSeq", "LocalBlock", "am_of", "am_from_samples", "recover_block"]

COND_WARN = 1e12


@dataclass
class AmSeq:
    """``a = (A_0, ..., A_{2N-2})`` of ``d`` and ``a_deriv = (A_2, ..., A_{2N-2})`` of ``d'``."""

    a: np.ndarray
    a_deriv: np.ndarray
    cond: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    source: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.a_deriv = np.asarray(self.a_deriv, dtype=float)
        if self.a.size % 2 == 0 or self.a_deriv.size != self.a.size - 2:
            raise ValueError("need 2N-1 values of A and 2N-3 values of A'")

    @property
    def N(self) -> int:
        return (self.a.size + 1) // 2

    def deriv_full(self) -> np.ndarray:
        """``A_m(d')`` for ``m = 0 .. 2N-2`` (the first two vanish)."""
        return np.concatenate([[0.0, 0.0], self.a_deriv])

    def consistency_defect(self) -> float:
        """Violation of ``A'_{2N-3} = (N-1)(N-2) A_{2N-3}``, ``A'_{2N-2} = (N-1)^2 A_{2N-2}``."""
        N = self.N
        ad = self.deriv_full()
        return float(max(abs(ad[2 * N - 3] - (N - 1) * (N - 2) * self.a[2 * N - 3]),
                         abs(ad[2 * N - 2] - (N - 1) ** 2 * self.a[2 * N - 2])))

    def reversed(self) -> "AmSeq":
        """Sequences of the reversed coefficient vector ``(d_{N-1}, ..., d_0)``."""
        N = self.N
        a = self.a[::-1].copy()
        ad = self.deriv_full()
        m_rev = 2 * N - 2 - np.arange(2 * N - 1)
        ad_rev = ((N - 1) ** 2 - (N - 1) * m_rev) * self.a[m_rev] + ad[m_rev]
        return AmSeq(a, ad_rev[2:], dict(self.cond), list(self.warnings))


@dataclass
class LocalBlock:
    """Recovered monomial coefficients of one interval, in canonical form.

    ``d[k0] > 0`` and, unless ``real_flag``, ``Im d[k1] > 0``. ``residual``
    is ``||am_of(d) - am||`` over both sequences.
    """

    d: np.ndarray
    k0: int | None = None
    k1: int | None = None
    real_flag: bool = True
    residual: float = 0.0
    j: int | None = None
    expansion: str = "plain"
    shift: float = 0.0

    def to_dict(self) -> dict:
        return {"j": self.j, "re": self.d.real.tolist(), "im": self.d.imag.tolist(),
                "k0": self.k0, "k1": self.k1, "real_flag": self.real_flag,
                "residual": self.residual, "expansion": self.expansion,
                "shift": self.shift}


def _antidiagonal_sums(re: np.ndarray, im: np.ndarray) -> np.ndarray:
    # Q_jk = Re(s_j conj s_k); summing anti-diagonals of Q gives A_m. Written
    # with real parts only so that conjugating s or multiplying by a power of
    # i leaves the result bitwise unchanged.
    Q = np.outer(re, re) + np.outer(im, im)
    n = re.size
    F = Q[:, ::-1]
    return np.array([np.trace(F, offset=n - 1 - m) for m in range(2 * n - 1)])


def am_of(d) -> AmSeq:
    """Forward map ``d -> (A_m(d), A_m(d'))``."""
    d = np.asarray(d, dtype=complex).ravel()
    k = np.arange(d.size)
    a = _antidiagonal_sums(d.real, d.imag)
    ad = _antidiagonal_sums(k * d.real, k * d.imag)
    return AmSeq(a, ad[2:])


def am_from_samples(values_f, values_df, nodes: NodeSet, N: int | None = None) -> AmSeq:
    """Solve the Vandermonde systems for ``A_m(d)`` and ``A_m(d')``.

    ``values_f`` are ``|p(gamma)|^2`` on the ``2N-1`` function nodes and
    ``values_df`` are ``|p'(gamma')|^2`` on the ``2N-5`` derivative nodes, in
    the node set's order. The two leading derivative coefficients follow
    from the identity with ``A_{2N-3}(d)`` and ``A_{2N-2}(d)``; their
    contribution is removed from the derivative samples before solving.
    Both systems are solved by LU with partial pivoting. The samples are
    kept on the result so that :func:`recover_block` can re-solve about
    other expansion points.

    A smaller ``N`` than the node set's order fits the sequences of a lower
    degree polynomial by least squares, which averages noise when the
    signal is known to live in that space.
    """
    if N is None:
        N = nodes.hermite_order
    elif not 3 <= N <= nodes.hermite_order:
        raise NodeError(f"cannot fit N={N} with a node set for N={nodes.hermite_order}")
    vf = np.asarray(values_f, dtype=float).ravel()
    vdf = np.asarray(values_df, dtype=float).ravel()
    if vf.size != nodes.gamma.size or vdf.size != nodes.gamma_prime.size:
        raise NodeError("sample count does not match the node set")
    a, ad, cond = _solve_vandermonde(vf, vdf, nodes.gamma, nodes.gamma_prime, N)
    warnings = [f"{k} Vandermonde condition number {v:.3g} exceeds {COND_WARN:.0e}"
                for k, v in cond.items() if v > COND_WARN]
    am = AmSeq(a, ad, cond, warnings)
    am.source = (vf, vdf, nodes.gamma, nodes.gamma_prime)
    return am


def _solve(V, y):
    if V.shape[0] == V.shape[1]:
        return np.linalg.solve(V, y)
    return np.linalg.lstsq(V, y, rcond=None)[0]


def _solve_vandermonde(vf, vdf, gamma, gprime, N):
    V = np.vander(gamma, 2 * N - 1, increasing=True)
    a = _solve(V, vf)
    cond = {"function": float(np.linalg.cond(V))}
    top3 = (N - 1) * (N - 2) * a[2 * N - 3]
    top2 = (N - 1) ** 2 * a[2 * N - 2]
    rhs = vdf - top3 * gprime ** (2 * N - 5) - top2 * gprime ** (2 * N - 4)
    if gprime.size:
        Vp = np.vander(gprime, 2 * N - 5, increasing=True)
        low = _solve(Vp, rhs)
        cond["derivative"] = float(np.linalg.cond(Vp))
    else:
        low = np.zeros(0)
    return a, np.concatenate([low, [top3, top2]]), cond


def _sample_misfit(d, source) -> float:
    vf, vdf, gamma, gprime = source
    P = np.polynomial.polynomial
    f = P.polyval(gamma, d)
    df = P.polyval(gprime, P.polyder(d)) if gprime.size else np.zeros(0)
    r = np.concatenate([np.abs(f) ** 2 - vf, np.abs(df) ** 2 - vdf])
    return float(np.linalg.norm(r))


class _Sweep:
    """Bookkeeping for the entry-by-entry reconstruction."""

    def __init__(self, am: AmSeq):
        self.N = am.N
        self.A = am.a
        self.Ad = am.deriv_full()
        self.full = [None] * self.N   # complex value once fully known
        self.real = [False] * self.N  # entry known to be real
        self.re = [None] * self.N     # real part once known

    def set_real(self, k, value):
        self.full[k] = complex(value)
        self.re[k] = float(value)
        self.real[k] = True

    def q(self, j, k):
        """``Re(d_j conj d_k)`` from current knowledge."""
        f, re = self.full, self.re
        if j == k:
            return abs(f[j]) ** 2
        if f[j] is not None and f[k] is not None:
            return (f[j] * np.conj(f[k])).real
        if self.real[j] and re[k] is not None:
            return f[j].real * re[k]
        if self.real[k] and re[j] is not None:
            return f[k].real * re[j]
        raise DegenerateRecoveryError(f"pair ({j}, {k}) needed before it is known")

    def known(self, m, skip):
        """Known parts of ``A_m(d)`` and ``A_m(d')`` excluding pairs in ``skip``."""
        s, sd = 0.0, 0.0
        for j in range(max(0, m - self.N + 1), m // 2 + 1):
            k = m - j
            if (j, k) in skip:
                continue
            if j < k and (self.full[j] == 0 or self.full[k] == 0):
                continue
            v = self.q(j, k)
            w = 1.0 if j == k else 2.0
            s += w * v
            sd += w * j * k * v
        return s, sd


def _solve2(M, b, tol, what):
    M = np.asarray(M, dtype=float)
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    if abs(det) <= tol * np.abs(M).max() ** 2:
        raise DegenerateRecoveryError(f"degenerate recovery step ({what})")
    return np.linalg.solve(M, np.asarray(b, dtype=float))


def _lsq1(col, b):
    col = np.asarray(col, dtype=float)
    return float(col @ np.asarray(b, dtype=float) / (col @ col))


def _sweep(am: AmSeq, eta: float, k1_eta: float | None = None):
    N = am.N
    A = am.a
    S = _Sweep(am)
    scale = float(max(np.abs(A).max(), np.abs(am.a_deriv).max() if am.a_deriv.size else 0.0))
    if scale == 0.0:
        return np.zeros(N, complex), None, None
    tau = eta * scale
    tau1 = tau if k1_eta is None else k1_eta * scale

    evens = [k for k in range(N) if A[2 * k] > tau]
    if not evens:
        raise InconsistentMagnitudesError(
            "inconsistent magnitudes: no positive leading coefficient")
    k0 = evens[0]
    for k in range(k0):
        S.set_real(k, 0.0)
    d0 = float(np.sqrt(A[2 * k0]))
    S.set_real(k0, d0)

    k1 = None
    n = 1
    while k0 + n <= N - 1:
        t = k0 + 2 * n - 1
        if t <= N - 1:
            m = k0 + t
            s, _ = S.known(m, {(k0, t)})
            S.re[t] = (A[m] - s) / (2 * d0)
        h, t, m = k0 + n, k0 + 2 * n, 2 * k0 + 2 * n
        skip = {(h, h)} | ({(k0, t)} if t <= N - 1 else set())
        s, sd = S.known(m, skip)
        b = [A[m] - s, S.Ad[m] - sd]
        if t <= N - 1:
            R, mod2 = _solve2([[2 * d0, 1.0], [2 * k0 * t * d0, h * h]], b, 1e-14,
                              f"real sweep at index {h}")
            S.re[t] = R
        else:
            mod2 = _lsq1([1.0, h * h], b)
        im2 = mod2 - S.re[h] ** 2
        if im2 > tau1:
            k1 = h
            S.full[h] = complex(S.re[h], np.sqrt(im2))
            break
        if im2 < -tau:
            raise InconsistentMagnitudesError(
                f"inconsistent magnitudes: |d_{h}|^2 < (Re d_{h})^2 by {-im2:.3g}")
        S.set_real(h, S.re[h])
        n += 1

    if k1 is not None:
        im1 = S.full[k1].imag
        re1 = S.re[k1]
        for l in range(1, N - k1):
            m, t, p = 2 * k1 + l, 2 * k1 - k0 + l, k1 + l
            skip = {(k1, p)} | ({(k0, t)} if t <= N - 1 else set())
            s, sd = S.known(m, skip)
            b = [A[m] - s, S.Ad[m] - sd]
            if t <= N - 1:
                R, P = _solve2([[2 * d0, 2.0], [2 * k0 * t * d0, 2.0 * k1 * p]], b, 1e-14,
                               f"complex sweep at index {p}")
                S.re[t] = R
            else:
                P = _lsq1([2.0, 2.0 * k1 * p], b)
            S.full[p] = complex(S.re[p], (P - S.re[p] * re1) / im1)
    d = np.array([0j if v is None else v for v in S.full])
    return d, k0, k1


def _taylor_matrix(n: int, a: float) -> np.ndarray:
    """``T`` with ``coeffs(p(. + a)) = T @ coeffs(p)`` for degree < n."""
    k = np.arange(n)
    T = np.zeros((n, n))
    for col in range(n):
        for row in range(col + 1):
            T[row, col] = comb(col, row) * a ** (col - row)
    return T


def _shifted(am: AmSeq, a: float) -> AmSeq:
    """Sequences of ``t -> p(t + a)``.

    Re-solved from the samples on the shifted nodes when they are known,
    otherwise obtained as Taylor shifts of ``|p|^2`` and ``|p'|^2``.
    """
    if am.source is not None:
        vf, vdf, gamma, gprime = am.source
        a_new, ad_new, _ = _solve_vandermonde(vf, vdf, gamma - a, gprime - a, am.N)
        return AmSeq(a_new, ad_new)
    n = am.a.size
    a_new = _taylor_matrix(n, a) @ am.a
    ad_new = _taylor_matrix(n - 2, a) @ am.a_deriv
    return AmSeq(a_new, ad_new)


def _pivot_score(am: AmSeq, a: float) -> float:
    """``min(|p(a)|, |Im(p'(a) conj p(a))| / |p(a)|)`` from the sequences alone."""
    P = np.polynomial.polynomial
    p2 = P.polyval(a, am.a)
    if p2 <= 0:
        return 0.0
    dp2 = P.polyval(a, am.a_deriv)
    re_cross = 0.5 * P.polyval(a, P.polyder(am.a))
    im_cross2 = max(dp2 * p2 - re_cross ** 2, 0.0)
    return min(np.sqrt(p2), np.sqrt(im_cross2 / p2))


SHIFT_GRID = np.linspace(0.0, 1.0, 9)[1:]
FINE_MARGIN = 1e3


def recover_block(am: AmSeq, eta: float = 1e-8, consistency_tol: float = 1e-6,
                  j: int | None = None, robust: bool = True,
                  fine_eta: float | None = 1e-13) -> LocalBlock:
    """Recover ``d`` (up to phase and conjugation) from its ``A_m`` sequences.

    The sweep is run on the sequences as given. With ``robust`` it is also
    run on the reversed coefficient vector and on the polynomial re-expanded
    about ``t = 0.5`` and the two grid points of ``(0, 1]`` with the
    best-conditioned pivots. Each candidate is mapped back to the original
    monomial basis; the one reproducing the raw samples best is kept (the
    ``A_m`` residual is used when the samples are not attached). A candidate
    found only under ``fine_eta`` must beat the others by ``FINE_MARGIN``.

    Args:
        am: the two sequences, e.g. from :func:`am_from_samples`.
        eta: relative zero threshold ``tau = eta * max|A|`` for locating the
            first nonzero and first non-real entries; square-root arguments
            in ``[-tau, 0)`` are clamped to zero.
        consistency_tol: relative tolerance for the identity linking the two
            top coefficients of ``A(d)`` and ``A(d')``.
        j: interval index stored on the block.
        robust: try the extra expansions described above.
        fine_eta: second, smaller threshold for deciding where the first
            non-real entry is. Entries whose squared imaginary part lies
            between the two thresholds are tried both as real and as
            complex. ``None`` disables this (appropriate for noisy data).

    Raises:
        InconsistentMagnitudesError: data no polynomial can produce.
        DegenerateRecoveryError: a 2x2 step is singular.
    """
    N = am.N
    scale = float(np.abs(am.a).max())
    if am.consistency_defect() > consistency_tol * max(scale, 1e-300) * (N - 1) ** 2:
        raise InconsistentMagnitudesError(
            "inconsistent magnitudes: derivative and function sequences disagree")

    plans = [("plain", 0.0)]
    if robust and scale > 0:
        plans.append(("reversed", 0.0))
        scores = [(_pivot_score(am, a), a) for a in SHIFT_GRID]
        picks = {a for _, a in sorted(scores, reverse=True)[:2]} | {0.5}
        plans += [("shift", a) for a in sorted(picks)]

    k1_etas = [None] if fine_eta is None or fine_eta >= eta else [None, fine_eta]
    candidates = []
    errors = []
    for (kind, a), k1_eta in ((p, e) for p in plans for e in k1_etas):
        try:
            if kind == "reversed":
                d = _sweep(am.reversed(), eta, k1_eta)[0][::-1]
            elif kind == "shift":
                e = _sweep(_shifted(am, a), eta, k1_eta)[0]
                d = _taylor_matrix(N, -a) @ e
            else:
                d = _sweep(am, eta, k1_eta)[0]
        except (InconsistentMagnitudesError, DegenerateRecoveryError) as exc:
            errors.append(exc)
            continue
        d = _canonical(d, eta)
        fit = _sample_misfit(d, am.source) if am.source is not None else _residual(d, am)
        candidates.append((fit, k1_eta is not None, d, kind, a))
    if not candidates:
        raise errors[0]
    # the fine threshold adds freedom that can fit rounding noise, so its
    # candidates must beat the standard ones by a wide margin
    coarse = [c for c in candidates if not c[1]]
    best = min(candidates, key=lambda c: c[0])
    if coarse:
        best_coarse = min(coarse, key=lambda c: c[0])
        if best[1] and best[0] * FINE_MARGIN > best_coarse[0]:
            best = best_coarse
    _, _, d, kind, a = best
    k0, k1 = _marks(d, eta)
    return LocalBlock(d, k0, k1, k1 is None, _residual(d, am), j, kind, a)


def _residual(d, am: AmSeq) -> float:
    fwd = am_of(d)
    return float(np.linalg.norm(np.concatenate([fwd.a - am.a, fwd.a_deriv - am.a_deriv])))


def _marks(d, eta):
    scale = np.abs(d).max() if d.size else 0.0
    if scale == 0:
        return None, None
    tau = np.sqrt(eta) * scale
    nz = np.flatnonzero(np.abs(d) > tau)
    k0 = int(nz[0]) if nz.size else None
    im = np.flatnonzero(np.abs(d.imag) > tau)
    return k0, (int(im[0]) if im.size else None)


def _canonical(d, eta):
    # first nonzero entry real positive, first complex entry in the upper half-plane
    scale = np.abs(d).max()
    if scale == 0:
        return d
    tau = np.sqrt(eta) * scale
    k0 = int(np.flatnonzero(np.abs(d) > tau)[0])
    d = d * (np.conj(d[k0]) / abs(d[k0]))
    d[k0] = abs(d[k0])
    im = np.flatnonzero(np.abs(d.imag) > tau)
    if im.size and d[im[0]].imag < 0:
        d = d.conj()
    return d
