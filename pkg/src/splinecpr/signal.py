"""Coefficient sequences, signal evaluation and the retrievability predicate.

A signal is ``f(x) = sum_k c_k phi(x / period - k)`` with finitely many
nonzero complex ``c_k``. Two signals are *equivalent* when one is a
unimodular multiple of the other or of its conjugate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .generator import Generator, eval_generator, eval_generator_deriv

__all__ = [
    "CoeffSeq",
    "Decomposition",
    "CPRVerdict",
    "EquivResult",
    "eval_signal",
    "eval_signal_deriv",
    "decompose",
    "is_cpr",
    "dist_up_to_equiv",
    "coefficient_errors",
    "canonical_form",
    "ambiguity_partner",
]


@dataclass(eq=False)
class CoeffSeq:
    """Finitely supported complex sequence ``c_offset, ..., c_{offset+n-1}``.

    Exact leading and trailing zeros are stripped on construction so that
    ``k_minus`` and ``k_plus`` are the first and last nonzero indices.
    """

    offset: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=complex)).copy()
        nz = np.flatnonzero(c)
        if nz.size == 0:
            self.offset, self.coeffs = 0, np.zeros(0, dtype=complex)
            return
        self.offset = int(self.offset) + int(nz[0])
        self.coeffs = c[nz[0]:nz[-1] + 1]

    @classmethod
    def from_dict(cls, doc) -> "CoeffSeq":
        re = np.asarray(doc["re"], dtype=float)
        im = np.asarray(doc.get("im", np.zeros_like(re)), dtype=float)
        if re.shape != im.shape:
            raise ValueError("'re' and 'im' must have the same length")
        return cls(int(doc["offset"]), re + 1j * im)

    def to_dict(self) -> dict:
        return {
            "offset": self.offset,
            "re": [float(v) for v in self.coeffs.real],
            "im": [float(v) for v in self.coeffs.imag],
        }

    # numpy scalars must defer to __rmul__, and array conversion must not
    # fall back to __getitem__, which is defined for every integer index
    __array_ufunc__ = None

    def __array__(self, dtype=None, copy=None):
        return self.coeffs if dtype is None else self.coeffs.astype(dtype)

    def __iter__(self):
        return iter(self.coeffs)

    def __len__(self):
        return self.coeffs.size

    @property
    def is_zero(self) -> bool:
        return self.coeffs.size == 0

    @property
    def k_minus(self) -> int:
        return self.offset

    @property
    def k_plus(self) -> int:
        return self.offset + self.coeffs.size - 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.coeffs.size)

    def __getitem__(self, k: int) -> complex:
        i = k - self.offset
        if 0 <= i < self.coeffs.size:
            return complex(self.coeffs[i])
        return 0j

    def window(self, lo: int, hi: int) -> np.ndarray:
        """Coefficients ``c_lo, ..., c_hi`` (inclusive), zero-filled."""
        out = np.zeros(max(hi - lo + 1, 0), dtype=complex)
        if self.is_zero or hi < lo:
            return out
        a, b = max(lo, self.k_minus), min(hi, self.k_plus)
        if a <= b:
            out[a - lo:b - lo + 1] = self.coeffs[a - self.offset:b - self.offset + 1]
        return out

    def conj(self) -> "CoeffSeq":
        return CoeffSeq(self.offset, self.coeffs.conj())

    def __mul__(self, z) -> "CoeffSeq":
        return CoeffSeq(self.offset, self.coeffs * z)

    __rmul__ = __mul__

    def trimmed(self, tol: float) -> "CoeffSeq":
        """Drop leading/trailing entries with magnitude at most ``tol``."""
        big = np.flatnonzero(np.abs(self.coeffs) > tol)
        if big.size == 0:
            return CoeffSeq(0, [])
        return CoeffSeq(self.offset + big[0], self.coeffs[big[0]:big[-1] + 1])

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def __repr__(self):
        return f"CoeffSeq(offset={self.offset}, coeffs={np.array2string(self.coeffs, precision=4)})"


def _shift_sum(c: CoeffSeq, table_eval, L: int, x, period: float):
    s = np.asarray(x, dtype=float) / period
    out = np.zeros(s.shape, dtype=complex)
    if c.is_zero:
        return out if out.ndim else complex(out)
    r = np.floor(s).astype(int)
    for lag in range(L):
        k = r - lag
        i = k - c.offset
        ok = (i >= 0) & (i < c.coeffs.size)
        coef = np.where(ok, c.coeffs[np.clip(i, 0, c.coeffs.size - 1)], 0)
        out = out + coef * table_eval(s - k)
    return out if out.ndim else complex(out)


def eval_signal(c: CoeffSeq, g: Generator, x, period: float = 1.0):
    """``f(x) = sum_k c_k g(x / period - k)``, summed over active shifts only."""
    return _shift_sum(c, lambda u: eval_generator(g, u), g.support_length, x, period)


def eval_signal_deriv(c: CoeffSeq, g: Generator, x, period: float = 1.0):
    """Derivative of :func:`eval_signal` with respect to ``x``."""
    val = _shift_sum(c, lambda u: eval_generator_deriv(g, u), g.support_length, x, period)
    return val / period


@dataclass
class Decomposition:
    """Split of ``c`` into a real-up-to-phase head, a middle and a tail.

    Indices ``k <= kappa_minus`` satisfy ``Im(conj(xi1) c_k) = 0`` and
    ``k >= kappa_plus`` satisfy ``Im(conj(xi2) c_k) = 0``. ``middle`` is
    the (possibly empty) index range strictly between them.
    """

    k_minus: int
    k_plus: int
    xi1: complex
    xi2: complex
    kappa_minus: int
    kappa_plus: int
    middle: range

    @property
    def middle_empty(self) -> bool:
        return len(self.middle) == 0


def _threshold(c: CoeffSeq, eta: float) -> float:
    return eta * float(np.max(np.abs(c.coeffs))) if not c.is_zero else 0.0


def decompose(c: CoeffSeq, eta: float = 1e-10) -> Decomposition:
    """Head/middle/tail decomposition of a nonzero sequence.

    ``xi1`` and ``xi2`` are the phases of the first and last coefficients.
    Zero and reality tests use the threshold ``eta * max|c_k|``. For a
    sequence that is real up to a phase, ``kappa_minus = k_plus`` and
    ``kappa_plus = k_plus + 1``.
    """
    if c.is_zero:
        raise ValueError("cannot decompose the zero sequence")
    tau = _threshold(c, eta)
    idx = np.flatnonzero(np.abs(c.coeffs) > tau)
    km, kp = c.offset + int(idx[0]), c.offset + int(idx[-1])
    xi1 = c[km] / abs(c[km])
    xi2 = c[kp] / abs(c[kp])

    kappa_minus = km
    while kappa_minus < kp and abs((np.conj(xi1) * c[kappa_minus + 1]).imag) <= tau:
        kappa_minus += 1

    kappa_plus = kp + 1
    while kappa_plus - 1 > kappa_minus and abs((np.conj(xi2) * c[kappa_plus - 1]).imag) <= tau:
        kappa_plus -= 1

    if kappa_minus + 2 <= kappa_plus < kp + 1:
        middle = range(kappa_minus + 1, kappa_plus)
    else:
        middle = range(0)
    return Decomposition(km, kp, complex(xi1), complex(xi2), kappa_minus, kappa_plus, middle)


@dataclass
class CPRVerdict:
    """Outcome of :func:`is_cpr`.

    ``condition`` names the first violated requirement (``"zero-run"`` for a run
    of ``L-1`` vanishing coefficients, ``"collinear-window"`` for a window whose
    coefficients are collinear in the plane, ``"L1"``/``"L2-zero"``/
    ``"L2-pairs"`` for the small-support rules) and ``index`` the shift at
    which it fails.
    """

    ok: bool
    condition: str | None = None
    index: int | None = None
    short: bool = False
    decomposition: Decomposition | None = None

    def __bool__(self):
        return self.ok


def _pair_im_sum(c: CoeffSeq, lo: int, hi: int) -> float:
    w = c.window(lo, hi)
    s = 0.0
    for a in range(w.size):
        for b in range(a + 1, w.size):
            s += abs((w[a] * np.conj(w[b])).imag)
    return s


def is_cpr(c: CoeffSeq, L: int, eta: float = 1e-10) -> CPRVerdict:
    """Decide whether ``sum_k c_k phi(. - k)`` is conjugate phase retrievable.

    Assumes the generator has support length ``L`` and that the space is
    locally retrievable on every unit interval. ``short`` flags sequences
    with ``k_plus - k_minus < L - 1``, for which the index ranges are used
    as written.
    """
    if L < 1:
        raise ValueError("support length must be positive")
    if c.is_zero:
        raise ValueError("the zero signal has no retrievability verdict")
    dec = decompose(c, eta)
    tau = _threshold(c, eta)
    tau2 = eta * float(np.max(np.abs(c.coeffs))) ** 2
    km, kp = dec.k_minus, dec.k_plus
    short = kp - km < L - 1
    nonzero = lambda k: abs(c[k]) > tau

    if L == 1:
        nz = [k for k in range(km, kp + 1) if nonzero(k)]
        if len(nz) > 1:
            return CPRVerdict(False, "L1", nz[1], short, dec)
        return CPRVerdict(True, None, None, short, dec)

    if L == 2:
        for k in range(km, kp + 1):
            if not nonzero(k):
                return CPRVerdict(False, "L2-zero", k, short, dec)
        breaks = [k for k in range(km, kp)
                  if abs((c[k] * np.conj(c[k + 1])).imag) > tau2]
        if len(breaks) > 1:
            return CPRVerdict(False, "L2-pairs", breaks[1], short, dec)
        return CPRVerdict(True, None, None, short, dec)

    for k in range(km - L + 2, kp + 1):
        if not any(nonzero(k + l) for l in range(L - 1)):
            return CPRVerdict(False, "zero-run", k, short, dec)
    if not dec.middle_empty:
        for k in range(dec.kappa_minus + 1, dec.kappa_plus + L - 2):
            if _pair_im_sum(c, k - L + 2, k) <= tau2:
                return CPRVerdict(False, "collinear-window", k, short, dec)
    return CPRVerdict(True, None, None, short, dec)


@dataclass
class EquivResult:
    """Distance modulo phase and conjugation, with the aligned copy."""

    dist: float
    aligned: object
    conjugated: bool
    phase: complex
    errors: dict = field(default_factory=dict)


def _as_common_arrays(c, d):
    if isinstance(c, CoeffSeq) or isinstance(d, CoeffSeq):
        c = c if isinstance(c, CoeffSeq) else CoeffSeq(0, c)
        d = d if isinstance(d, CoeffSeq) else CoeffSeq(0, d)
        if c.is_zero and d.is_zero:
            return np.zeros(0, complex), np.zeros(0, complex), 0, True
        los = [s.k_minus for s in (c, d) if not s.is_zero]
        his = [s.k_plus for s in (c, d) if not s.is_zero]
        lo, hi = min(los), max(his)
        return c.window(lo, hi), d.window(lo, hi), lo, True
    a = np.asarray(c, dtype=complex).ravel()
    b = np.asarray(d, dtype=complex).ravel()
    n = max(a.size, b.size)
    a = np.concatenate([a, np.zeros(n - a.size)])
    b = np.concatenate([b, np.zeros(n - b.size)])
    return a, b, 0, False


def dist_up_to_equiv(c, d, rel_floor: float = 0.05) -> EquivResult:
    """``min_{z, sigma} ||c - z sigma(d)||_2`` over unimodular ``z``.

    ``sigma`` ranges over identity and conjugation; for fixed ``sigma`` the
    optimal ``z`` is the phase of ``<c, sigma(d)>``. Works on arrays (padded
    at the end) or on :class:`CoeffSeq` (aligned by index). The returned
    ``errors`` are those of :func:`coefficient_errors` for the aligned copy.
    """
    a, b, lo, seq = _as_common_arrays(c, d)
    best = None
    for conjugated in (False, True):
        e = b.conj() if conjugated else b
        ip = np.vdot(e, a)  # sum a_k conj(e_k)
        z = ip / abs(ip) if abs(ip) > 0 else 1.0 + 0j
        r = float(np.linalg.norm(a - z * e))
        if best is None or r < best[0]:
            best = (r, z * e, conjugated, complex(z))
    r, aligned, conjugated, z = best
    errors = coefficient_errors(a, aligned, rel_floor)
    if seq:
        aligned = CoeffSeq(lo, aligned)
    return EquivResult(r, aligned, conjugated, z, errors)


def coefficient_errors(truth, estimate, rel_floor: float = 0.05) -> dict:
    """Per-coefficient relative errors of the real and imaginary parts.

    Entries whose true real (imaginary) part is below
    ``rel_floor * max|c_k|`` are left out of the relative maximum and their
    absolute error is reported under ``max_abs_re_small``
    (``max_abs_im_small``) instead.
    """
    t, e, _, _ = _as_common_arrays(truth, estimate)
    scale = float(np.max(np.abs(t))) if t.size else 0.0
    out = {"l2": float(np.linalg.norm(t - e)),
           "l2_rel": float(np.linalg.norm(t - e) / np.linalg.norm(t)) if scale > 0 else 0.0}
    for part, name in ((np.real, "re"), (np.imag, "im")):
        pt, pe = part(t), part(e)
        big = np.abs(pt) >= rel_floor * scale if scale > 0 else np.zeros(t.shape, bool)
        rel = np.abs((pt - pe)[big] / pt[big])
        out[f"max_rel_{name}"] = float(rel.max()) if rel.size else 0.0
        small = np.abs(pt - pe)[~big]
        out[f"max_abs_{name}_small"] = float(small.max()) if small.size else 0.0
    return out


def canonical_form(v, eta: float = 1e-8) -> np.ndarray:
    """Representative of ``v`` modulo phase and conjugation.

    The first entry above ``eta * max|v|`` is rotated to the positive real
    axis; then, if some entry has an imaginary part above the same
    threshold, the first such entry is made to have positive imaginary part.
    """
    v = np.asarray(v, dtype=complex).copy()
    scale = float(np.max(np.abs(v))) if v.size else 0.0
    if scale == 0.0:
        return v
    tau = eta * scale
    k0 = int(np.flatnonzero(np.abs(v) > tau)[0])
    v *= np.conj(v[k0]) / abs(v[k0])
    v[k0] = abs(v[k0])
    im = np.flatnonzero(np.abs(v.imag) > tau)
    if im.size and v[im[0]].imag < 0:
        v = v.conj()
    return v


def _split_phase_partner(c: CoeffSeq, cut: int) -> CoeffSeq:
    """Rotate everything right of ``cut`` by a phase; keep the most distant."""
    left, right = c.window(c.k_minus, cut), c.window(cut + 1, c.k_plus)
    best = None
    for theta in (math.pi / 2, 1.0, 2.0):
        g = CoeffSeq(c.k_minus, np.concatenate([left, np.exp(1j * theta) * right]))
        d = dist_up_to_equiv(c, g).dist
        if best is None or d > best[0]:
            best = (d, g)
    return best[1]


def _reflect_partner(c: CoeffSeq, k: int, width: int) -> CoeffSeq:
    """Reflect ``c_n, n > k`` across the line of the window ``[k-width+1, k]``."""
    w = c.window(k - width + 1, k)
    theta = float(np.angle(w[np.argmax(np.abs(w))])) if np.any(w) else 0.0
    left = c.window(c.k_minus, k)
    right = c.window(k + 1, c.k_plus)
    return CoeffSeq(c.k_minus, np.concatenate([left, np.exp(2j * theta) * right.conj()]))


def ambiguity_partner(c: CoeffSeq, L: int, verdict: CPRVerdict | None = None) -> CoeffSeq:
    """A sequence with the same magnitudes ``|f|`` but not equivalent to ``c``.

    Built from the first violated condition in ``verdict``: a vanishing run
    lets the two sides take independent phases; a collinear window lets the
    part to its right be reflected (conjugated about the window's line).

    Raises:
        ValueError: if ``c`` is retrievable.
    """
    verdict = verdict if verdict is not None else is_cpr(c, L)
    if verdict.ok:
        raise ValueError("sequence is conjugate phase retrievable; no partner exists")
    k = verdict.index
    if verdict.condition == "zero-run":
        return _split_phase_partner(c, k - 1)
    if verdict.condition in ("L1", "L2-zero"):
        return _split_phase_partner(c, k - 1)
    if verdict.condition == "L2-pairs":
        return _reflect_partner(c, k, 1)
    return _reflect_partner(c, k, L - 1)
