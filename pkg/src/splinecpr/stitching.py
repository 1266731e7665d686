"""Sewing per-interval windows into one coefficient sequence.

Interval ``j`` yields a window ``w_j = (c_{j-L+1}, ..., c_j)`` known only up
to a unimodular factor and conjugation. Neighbouring windows share ``L-1``
coefficients; matching them fixes the relative transform whenever the
shared coefficients are not all on one line through the origin. Where they
are, the conjugation choice is genuinely free and is reported as
unresolved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import StitchError
from .local_recovery import LocalBlock
from .signal import CoeffSeq

__all__ = ["StitchTolerances", "AlignmentState", "block_to_window", "stitch"]


def block_to_window(b, H: np.ndarray) -> np.ndarray:
    """Shift coefficients ``w`` with ``H^T w = d`` for a block's monomial vector ``d``.

    ``H`` has one row per active shift. When it has more columns than rows
    (sampling in a larger polynomial space than the generator needs) the
    system is solved in the least-squares sense.
    """
    d = b.d if isinstance(b, LocalBlock) else np.asarray(b, dtype=complex)
    H = np.asarray(H, dtype=float)
    if d.size != H.shape[1]:
        raise ValueError(f"block has {d.size} monomials, H has {H.shape[1]} columns")
    if not np.any(d):
        return np.zeros(H.shape[0], dtype=complex)
    if H.shape[0] == H.shape[1]:
        return np.linalg.solve(H.T, d)
    return np.linalg.lstsq(H.T.astype(complex), d, rcond=None)[0]


@dataclass
class StitchTolerances:
    """Thresholds used by :func:`stitch` (all relative)."""

    anchor: float = 1e-8       # |Im(w_a conj w_b)| vs max|w|^2
    margin: float = 10.0       # residual ratio deciding conjugation
    sigma_floor: float = 1e-9  # larger residual must exceed this * |overlap|
    consistency: float = 1e-6  # accepted overlap mismatch * |overlap|
    zero: float = 1e-12        # windows below this * max window norm are gaps
    anchor_policy: str = "first"  # or "strongest": largest |Im| pair / |w|^2
    average: bool = False      # final c_k: |w|^2-weighted mean over aligned windows
    global_scale: bool = False  # consistency relative to the largest window, not the overlap


@dataclass
class AlignmentState:
    """Per-interval transforms ``w -> z * sigma(w)`` chosen by :func:`stitch`.

    ``transforms[j]`` is ``(z, conjugated, status)`` with ``status`` one of
    ``"anchor"``, ``"resolved"``, ``"unresolved-sigma"``, ``"gap"``.
    """

    anchor: int | None
    transforms: dict = field(default_factory=dict)
    real: bool = False
    overlap_residuals: dict = field(default_factory=dict)

    @property
    def unresolved(self) -> list:
        return sorted(j for j, t in self.transforms.items() if t[2] == "unresolved-sigma")

    @property
    def gaps(self) -> list:
        return sorted(j for j, t in self.transforms.items() if t[2] == "gap")

    def to_dict(self) -> dict:
        return {
            "anchor": self.anchor,
            "real": self.real,
            "transforms": {str(j): {"z": [z.real, z.imag], "conjugated": s, "status": st}
                           for j, (z, s, st) in sorted(self.transforms.items())},
            "overlap_residuals": {str(j): r for j, r in sorted(self.overlap_residuals.items())},
            "unresolved": self.unresolved,
        }


def _align(piece, target, tol: StitchTolerances):
    """Best ``(z, conj, status, residual)`` mapping ``piece`` onto ``target``."""
    tnorm = float(np.linalg.norm(target))
    fits = []
    for conj in (False, True):
        e = piece.conj() if conj else piece
        ip = np.vdot(e, target)
        z = ip / abs(ip) if abs(ip) > 0 else 1.0 + 0j
        fits.append((float(np.linalg.norm(target - z * e)), conj, complex(z)))
    fits.sort(key=lambda f: f[0])
    (r0, conj, z), (r1, _, _) = fits
    decided = r1 > tol.sigma_floor * tnorm and r1 >= tol.margin * r0
    status = "resolved" if decided else "unresolved-sigma"
    if tnorm == 0.0 or np.linalg.norm(piece) == 0.0:
        status = "gap"
    return z, conj, status, r0


def _pair_strength(w) -> float:
    best = 0.0
    for a in range(w.size):
        for b in range(a + 1, w.size):
            best = max(best, abs((w[a] * np.conj(w[b])).imag))
    return best


def _choose_anchor(W, js, live, thr, policy):
    qualified = [j for j in js if live[j] and _pair_strength(W[j]) > thr]
    if not qualified:
        return None
    if policy == "strongest":
        return max(qualified, key=lambda j: _pair_strength(W[j]) / np.vdot(W[j], W[j]).real)
    return qualified[0]


def stitch(windows, tol: StitchTolerances | None = None):
    """Assemble a coefficient sequence from ``(j, window)`` pairs.

    Windows must sit on consecutive intervals. Propagation starts from the
    first window containing two coefficients that are not collinear in the
    plane (or from the first nonzero window, flagging the output as real,
    if there is none), then runs right and left. With
    ``anchor_policy="strongest"`` the qualifying window whose most
    independent pair is largest relative to its norm is used instead,
    which keeps poorly determined edge windows from seeding noisy runs.
    Each new interval is rotated (and conjugated, if that fits the shared coefficients better by
    at least ``tol.margin``) onto the coefficients already placed, and
    contributes the one coefficient it newly exposes. With ``average`` the
    final coefficients are instead weighted means over every aligned
    window containing them, which reduces noise.

    Returns:
        ``(CoeffSeq, AlignmentState)``.

    Overlap mismatches are measured against the overlap itself, or with
    ``global_scale`` against the largest window. The latter suits noisy
    data, whose errors do not shrink with the local signal.

    Raises:
        StitchError: shared coefficients disagree beyond ``tol.consistency``.
    """
    tol = tol or StitchTolerances()
    items = sorted((int(j), np.asarray(w, dtype=complex)) for j, w in windows)
    if not items:
        return CoeffSeq(0, []), AlignmentState(None, real=True)
    js = [j for j, _ in items]
    if js != list(range(js[0], js[0] + len(js))):
        raise StitchError("windows must be on consecutive intervals")
    W = dict(items)
    L = items[0][1].size
    scale = max(float(np.linalg.norm(w)) for _, w in items)
    if scale == 0.0:
        return CoeffSeq(0, []), AlignmentState(None, real=True)
    amax2 = max(float(np.abs(w).max()) ** 2 for _, w in items)
    live = {j: float(np.linalg.norm(w)) > tol.zero * scale for j, w in items}

    anchor = _choose_anchor(W, js, live, tol.anchor * amax2, tol.anchor_policy)
    state = AlignmentState(anchor)
    if anchor is None:
        state.real = True
        anchor = next(j for j in js if live[j])
        state.anchor = anchor

    c = {}
    for r, v in enumerate(W[anchor]):
        c[anchor - L + 1 + r] = v
    state.transforms[anchor] = (1.0 + 0j, False, "anchor")
    aligned = {anchor: W[anchor]}

    def place(j, shared_idx, new_idx, piece, new_value):
        target = np.array([c.get(k, 0j) for k in shared_idx])
        if not live[j]:
            state.transforms[j] = (1.0 + 0j, False, "gap")
            c.setdefault(new_idx, 0j)
            return
        z, conj, status, resid = _align(piece, target, tol)
        tnorm = float(np.linalg.norm(target))
        state.overlap_residuals[j] = resid
        ref = scale if tol.global_scale else max(tnorm, float(np.linalg.norm(piece)))
        if status != "gap" and resid > tol.consistency * ref:
            raise StitchError(
                f"inconsistent blocks: overlap mismatch {resid:.3g} at interval {j}", interval=j)
        state.transforms[j] = (z, conj, status)
        if status == "gap":
            # nothing shared: start a new segment with this window as given
            for r, v in enumerate(W[j]):
                c[j - L + 1 + r] = v
            return
        v = np.conj(new_value) if conj else new_value
        c[new_idx] = z * v
        aligned[j] = z * (W[j].conj() if conj else W[j])

    for j in range(anchor + 1, js[-1] + 1):
        shared = list(range(j - L + 1, j))
        place(j, shared, j, W[j][:-1], W[j][-1])
    for j in range(anchor - 1, js[0] - 1, -1):
        shared = list(range(j - L + 2, j + 1))
        place(j, shared, j - L + 1, W[j][1:], W[j][0])

    if tol.average:
        num, den = {}, {}
        for j, w in aligned.items():
            weight = float(np.vdot(w, w).real) ** 2
            for r, v in enumerate(w):
                k = j - L + 1 + r
                num[k] = num.get(k, 0j) + weight * v
                den[k] = den.get(k, 0.0) + weight
        for k in num:
            if den[k] > 0:
                c[k] = num[k] / den[k]

    lo, hi = min(c), max(c)
    seq = CoeffSeq(lo, [c.get(k, 0j) for k in range(lo, hi + 1)])
    return seq, state
