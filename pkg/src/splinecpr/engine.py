"""End-to-end recovery: samples -> per-interval blocks -> windows -> sequence."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.optimize

from .errors import CPRError, GeneratorError, NodeError, RecoveryError
from .generator import (Generator, eval_generator, eval_generator_deriv, figure1_generator,
                        local_basis_matrix)
from .gram_recovery import build_basis_system, factor_gram, gram_from_samples
from .local_recovery import am_from_samples, recover_block
from .sampling import NodeSet, SampleSet, chebyshev_nodes, default_nodes, take_samples
from .signal import CoeffSeq, dist_up_to_equiv, is_cpr
from .stitching import StitchTolerances, block_to_window, stitch

__all__ = [
    "Tolerances",
    "RecoveryConfig",
    "recover_signal",
    "verify_recovery",
    "figure1_config",
    "figure1_coefficients",
    "draw_signal",
    "run_trial",
    "refine_window",
    "window_misfit",
    "refine_sequence",
]

log = logging.getLogger(__name__)

# windows whose sample misfit exceeds this many noise levels are refitted
REPAIR_FACTOR = 3.0
# a polished sequence must match every sample to this many noise levels
MISFIT_FACTOR = 10.0


@dataclass
class Tolerances:
    """Every threshold used along the pipeline (all relative)."""

    local_eta: float = 1e-8
    fine_eta: float | None = 1e-13
    consistency: float = 1e-6
    gram_rank: float = 1e-6
    anchor: float = 1e-8
    sigma_margin: float = 10.0
    sigma_floor: float = 1e-9
    stitch: float = 1e-6
    zero_block: float = 1e-12
    trim: float = 1e-7
    cpr_eta: float = 1e-10
    anchor_policy: str = "first"
    average: bool = False
    refine: bool = False  # least-squares polish of each window on its own samples
    global_scale: bool = False

    @classmethod
    def for_noise(cls, noise: float) -> "Tolerances":
        """Defaults widened so that noise of relative size ``noise`` in the
        samples is not mistaken for inconsistency."""
        if noise <= 0:
            return cls()
        # sample errors reach the coefficients through square roots, hence
        # the sqrt scaling; the realness test on A_m ratios stays linear
        root = float(np.sqrt(noise))
        return cls(
            local_eta=max(1e-8, 5 * noise),
            fine_eta=None,
            consistency=max(1e-6, 1e3 * noise),
            gram_rank=max(1e-6, 1e3 * noise),
            anchor=max(1e-8, 10 * root),
            sigma_floor=max(1e-9, root),
            stitch=max(1e-6, 100 * root),
            zero_block=max(1e-12, root),
            trim=max(1e-7, root),
            anchor_policy="strongest",
            average=True,
            refine=True,
            global_scale=True,
        )

    def stitch_tolerances(self) -> StitchTolerances:
        return StitchTolerances(anchor=self.anchor, margin=self.sigma_margin,
                                sigma_floor=self.sigma_floor, consistency=self.stitch,
                                zero=self.zero_block, anchor_policy=self.anchor_policy,
                                average=self.average, global_scale=self.global_scale)


@dataclass
class RecoveryConfig:
    """What to sample and how to recover.

    ``n_monomials`` is the local polynomial space dimension used by the
    Hermite pathway (``N``) and fixes the node counts; it defaults to the
    generator's order and may exceed it. ``fit_monomials`` is the space the
    ``A_m`` are fitted in. It defaults to the generator's order, so surplus
    nodes give a least-squares fit instead of fitting noise in monomials
    the signal cannot have. ``nodes`` default to Chebyshev nodes.
    """

    generator: Generator
    pathway: str = "hermite"
    nodes: NodeSet | None = None
    noise: float = 0.0
    seed: int = 0
    period: float = 1.0
    n_monomials: int | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    fit_monomials: int | None = None

    def __post_init__(self):
        if self.pathway not in ("hermite", "gram"):
            raise ValueError(f"unknown pathway {self.pathway!r}")
        if self.n_monomials is None:
            self.n_monomials = self.generator.order
        if self.n_monomials < self.generator.order:
            raise GeneratorError("n_monomials is below the generator's order")
        if self.pathway == "hermite" and self.nodes is None:
            self.nodes = default_nodes(self.n_monomials, self.period)
        if self.pathway == "gram" and self.nodes is None:
            sys = build_basis_system(self.generator)
            self.nodes = NodeSet(sys.nodes, np.zeros(0), self.period)
        if self.nodes.period != self.period:
            self.nodes = NodeSet(self.nodes.gamma, self.nodes.gamma_prime, self.period)
        if self.pathway == "hermite":
            N = self.nodes.hermite_order
            if N != self.n_monomials:
                raise NodeError(f"node set is for N={N}, config has N={self.n_monomials}")
        if self.fit_monomials is None:
            self.fit_monomials = min(self.n_monomials, max(self.generator.order, 3))
        if self.pathway == "hermite" and not (
                self.generator.order <= self.fit_monomials <= self.n_monomials):
            raise GeneratorError(f"fit_monomials={self.fit_monomials} outside "
                                 f"[{self.generator.order}, {self.n_monomials}]")

    def with_noise(self, noise: float, seed: int | None = None) -> "RecoveryConfig":
        return replace(self, noise=noise, seed=self.seed if seed is None else seed,
                       tolerances=Tolerances.for_noise(noise))

    def to_dict(self) -> dict:
        return {
            "pathway": self.pathway,
            "generator": self.generator.to_json(),
            "nodes": self.nodes.to_dict(),
            "noise": self.noise,
            "seed": self.seed,
            "period": self.period,
            "n_monomials": self.n_monomials,
            "fit_monomials": self.fit_monomials,
            "tolerances": asdict(self.tolerances),
        }


def _shift_rows(fn, g: Generator, t) -> np.ndarray:
    L = g.support_length
    t = np.asarray(t, dtype=float)
    return np.stack([fn(g, t + L - 1 - r) for r in range(L)], axis=-1).reshape(t.size, L)


def _sample_design(nodes: NodeSet, g: Generator):
    return np.vstack([_shift_rows(eval_generator, g, nodes.gamma),
                      _shift_rows(eval_generator_deriv, g, nodes.gamma_prime) / nodes.period])


def window_misfit(w, values_f, values_df, nodes: NodeSet, g: Generator) -> float:
    """Largest absolute gap between the samples and those ``w`` predicts."""
    A = _sample_design(nodes, g)
    y = np.concatenate([np.ravel(values_f), np.ravel(values_df)])
    v = A @ np.asarray(w, dtype=complex)
    return float(np.abs(v.real ** 2 + v.imag ** 2 - y).max()) if y.size else 0.0


def refine_window(w, values_f, values_df, nodes: NodeSet, g: Generator) -> np.ndarray:
    """Polish ``w`` by Gauss-Newton on ``sum (|a_i . w|^2 - y_i)^2``.

    ``a_i`` are the shifted generator (and derivative) values at the
    nodes; derivative samples are taken in the physical variable, so they
    are compared as is with ``|Phi'(t) . w|^2 / period^2``. The algebraic
    window is a good start but square roots amplify noise where the
    window is weak; the fit brings it down to the noise floor.
    """
    A = _sample_design(nodes, g)
    y = np.concatenate([np.ravel(values_f), np.ravel(values_df)])
    return _fit_magnitudes(A, y, w)


def _fit_magnitudes(A, y, w):
    L = A.shape[1]
    w = np.asarray(w, dtype=complex)
    if not w.any() or y.size < 2 * L - 1:
        return w
    # the global phase is a null direction: rotate the largest entry onto
    # the positive axis and keep its imaginary part out of the fit
    p = int(np.argmax(np.abs(w)))
    w = w * (abs(w[p]) / w[p])
    free = np.ones(2 * L, dtype=bool)
    free[L + p] = False

    def full(v):
        x = np.zeros(2 * L)
        x[free] = v
        return x

    def resid(v):
        x = full(v)
        u, s = A @ x[:L], A @ x[L:]
        return u * u + s * s - y

    def jac(v):
        x = full(v)
        u, s = A @ x[:L], A @ x[L:]
        return np.hstack([2 * u[:, None] * A, 2 * s[:, None] * A])[:, free]

    v0 = np.concatenate([w.real, w.imag])[free]
    res = scipy.optimize.least_squares(resid, v0, jac=jac, method="lm", xtol=1e-15, ftol=1e-15)
    if np.sum(res.fun ** 2) >= np.sum(resid(v0) ** 2):
        return w
    x = full(res.x)
    return x[:L] + 1j * x[L:]


def _global_design(samples: SampleSet, g: Generator, lo: int, n: int):
    """Rows ``a`` with ``|a . c|^2`` the samples, ``c`` indexed from ``lo``."""
    local = _sample_design(samples.nodes, g)
    L = g.support_length
    rows, y = [], []
    for i, j in enumerate(samples.intervals):
        block = np.zeros((local.shape[0], n))
        for r in range(L):
            k = int(j) - L + 1 + r - lo
            if 0 <= k < n:
                block[:, k] = local[:, r]
        rows.append(block)
        y.append(np.concatenate([samples.values_f[i], samples.values_df[i]]))
    return np.vstack(rows), np.concatenate(y)


def refine_sequence(c: CoeffSeq, samples: SampleSet, g: Generator):
    """Fit every coefficient of ``c`` to all samples at once.

    Returns the polished sequence and the largest per-sample misfit.
    Shared coefficients tie neighbouring intervals together, which settles
    weak windows that their own samples leave ambiguous.
    """
    L = g.support_length
    lo = min(c.k_minus, int(samples.intervals.min()) - L + 1)
    hi = max(c.k_plus, int(samples.intervals.max()))
    n = hi - lo + 1
    A, y = _global_design(samples, g, lo, n)
    w = np.array([c[k] for k in range(lo, hi + 1)], dtype=complex)
    w = _fit_magnitudes(A, y, w)
    v = A @ w
    return CoeffSeq(lo, w), float(np.abs(v.real ** 2 + v.imag ** 2 - y).max())


def _repair_windows(windows, samples: SampleSet, cfg: RecoveryConfig, diag: dict):
    """Refit windows whose samples disagree with them beyond the noise.

    Under noise the local solver can settle on a wrong branch where a
    window is weak. Neighbouring windows share all but one coefficient, so
    shifted copies of them are tried as starting points for the fit.
    """
    g, nodes = cfg.generator, samples.nodes
    scale = max(samples.sup_norm ** 2, float(samples.values_f.max()))
    thr = REPAIR_FACTOR * cfg.noise * scale
    data = [(samples.values_f[i], samples.values_df[i]) for i in range(len(windows))]
    miss = [np.inf if w is None else window_misfit(w, *data[i], nodes, g)
            for i, (_, w) in enumerate(windows)]
    order = list(range(len(windows)))
    for sweep in (order, order[::-1]):
        for i in sweep:
            if miss[i] <= thr:
                continue
            starts = []
            if i > 0 and windows[i - 1][1] is not None:
                starts.append(np.append(windows[i - 1][1][1:], 0))
            if i + 1 < len(windows) and windows[i + 1][1] is not None:
                starts.append(np.insert(windows[i + 1][1][:-1], 0, 0))
            for st in starts:
                w = refine_window(st, *data[i], nodes, g)
                m = window_misfit(w, *data[i], nodes, g)
                if m < miss[i]:
                    windows[i], miss[i] = (windows[i][0], w), m
            if miss[i] <= thr:
                diag["repaired"].append(windows[i][0])
    bad = [windows[i][0] for i in order if miss[i] > thr and windows[i][1] is not None]
    if bad:
        diag["warnings"].append(f"sample misfit above noise on intervals {bad}")
    return windows


def _hermite_windows(samples: SampleSet, cfg: RecoveryConfig, diag: dict):
    g = cfg.generator
    N = cfg.fit_monomials
    H = local_basis_matrix(g, N)
    tol = cfg.tolerances
    # derivative samples are with respect to x = period * t
    dscale = cfg.period ** 2
    polish = tol.refine and cfg.noise > 0
    windows, failed = [], {}
    for i, j in enumerate(samples.intervals):
        j = int(j)
        try:
            am = am_from_samples(samples.values_f[i], samples.values_df[i] * dscale,
                                 samples.nodes, N)
            block = recover_block(am, eta=tol.local_eta, consistency_tol=tol.consistency,
                                  j=j, fine_eta=tol.fine_eta)
        except CPRError as exc:
            if not polish:
                raise RecoveryError(f"interval {j}: {exc}", interval=j, cause=exc) from exc
            # rebuilt from its neighbours below
            failed[j] = exc
            windows.append((j, None))
            diag["intervals"].append({"j": j, "error": str(exc)})
            continue
        diag["intervals"].append({"j": j, "residual": block.residual, "k0": block.k0,
                                  "k1": block.k1, "real_flag": block.real_flag,
                                  "cond": am.cond})
        diag["warnings"].extend(f"interval {j}: {w}" for w in am.warnings)
        w = block_to_window(block, H)
        if tol.refine:
            w = refine_window(w, samples.values_f[i], samples.values_df[i], samples.nodes, g)
        windows.append((j, w))
    if polish:
        windows = _repair_windows(windows, samples, cfg, diag)
    for j, w in windows:
        if w is None:
            exc = failed[j]
            raise RecoveryError(f"interval {j}: {exc}", interval=j, cause=exc) from exc
    return windows


def _gram_windows(samples: SampleSet, cfg: RecoveryConfig, diag: dict):
    sys = build_basis_system(cfg.generator)
    if not np.allclose(np.sort(samples.nodes.gamma), sys.nodes, rtol=0, atol=1e-15):
        raise NodeError("samples were not taken at the selected basis nodes")
    windows = []
    for i, j in enumerate(samples.intervals):
        j = int(j)
        G = gram_from_samples(sys, samples.values_f[i])
        try:
            w = factor_gram(G, rank_tol=cfg.tolerances.gram_rank)
        except CPRError as exc:
            raise RecoveryError(f"interval {j}: {exc}", interval=j, cause=exc) from exc
        diag["intervals"].append({"j": j, "cond": {"gram": sys.cond}})
        windows.append((j, w))
    return windows


def recover_signal(samples: SampleSet, cfg: RecoveryConfig):
    """Recover the coefficient sequence behind ``samples``.

    With noisy Hermite samples and ``tolerances.refine`` set (the default
    from :meth:`Tolerances.for_noise`), each window is polished on its own
    samples, windows that still misfit are refitted from their
    neighbours, and the stitched sequence is fitted to all samples at
    once. The overlap test is then replaced by a check that every sample
    is matched to within ``MISFIT_FACTOR`` noise levels.

    Returns:
        ``(CoeffSeq, diagnostics)`` where diagnostics hold per-interval
        residuals and condition numbers, the alignment state and warnings.

    Raises:
        RecoveryError: any per-interval or stitching failure, tagged with
            the interval index.
    """
    diag = {"intervals": [], "warnings": [], "pathway": cfg.pathway, "repaired": []}
    if len(samples) == 0 or (not samples.values_f.any() and not samples.values_df.any()):
        diag["alignment"] = None
        return CoeffSeq(0, []), diag
    if cfg.pathway == "hermite":
        windows = _hermite_windows(samples, cfg, diag)
    else:
        windows = _gram_windows(samples, cfg, diag)
    st = cfg.tolerances.stitch_tolerances()
    polish = cfg.pathway == "hermite" and cfg.tolerances.refine and cfg.noise > 0
    if polish:
        # noisy overlaps are judged by the final fit to the samples instead
        st = replace(st, consistency=np.inf)
    try:
        seq, state = stitch(windows, st)
    except CPRError as exc:
        raise RecoveryError(str(exc), interval=getattr(exc, "interval", None), cause=exc) from exc
    if polish and not seq.is_zero:
        seq, misfit = refine_sequence(seq, samples, cfg.generator)
        scale = max(samples.sup_norm ** 2, float(samples.values_f.max()))
        diag["misfit"] = misfit / scale
        if misfit > MISFIT_FACTOR * cfg.noise * scale:
            raise RecoveryError(f"inconsistent samples: misfit {misfit / scale:.3g} exceeds "
                                f"{MISFIT_FACTOR:g} x noise {cfg.noise:g}")
    diag["alignment"] = state.to_dict()
    diag["unresolved"] = state.unresolved
    if diag["warnings"]:
        log.info("%d warnings", len(diag["warnings"]))
    if not seq.is_zero:
        seq = seq.trimmed(cfg.tolerances.trim * float(np.abs(seq.coeffs).max()))
    return seq, diag


def verify_recovery(truth: CoeffSeq, recovered: CoeffSeq, rel_floor: float = 0.05) -> dict:
    """Aligned distance and per-coefficient relative errors.

    Real (imaginary) parts smaller than ``rel_floor * max|c_k|`` are left
    out of ``max_rel_re`` (``max_rel_im``) and reported absolutely.
    """
    res = dist_up_to_equiv(truth, recovered, rel_floor)
    norm = truth.norm()
    out = {"dist": res.dist, "dist_rel": res.dist / norm if norm > 0 else res.dist,
           "conjugated": res.conjugated, "phase": [res.phase.real, res.phase.imag]}
    out.update(res.errors)
    return out


def figure1_config(printed: bool = False, noise: float = 1e-5, seed: int = 0,
                   n_monomials: int = 4) -> RecoveryConfig:
    """Quadratic generator on knots ``0, 2, 4, 6`` sampled on ``(0, 2) + 2Z``.

    ``n_monomials = 4`` takes 7 function and 3 derivative nodes per
    interval; the ``A_m`` are still fitted for quadratics, by least squares.
    """
    g = figure1_generator(printed)
    nodes = NodeSet(chebyshev_nodes(2 * n_monomials - 1), chebyshev_nodes(2 * n_monomials - 5), 2.0)
    return RecoveryConfig(g, "hermite", nodes, noise, seed, 2.0, n_monomials,
                          Tolerances.for_noise(noise))


def figure1_coefficients(seed: int, k1: int = -3, k2: int = 1) -> CoeffSeq:
    """Real and imaginary parts uniform in ``[-1, 1]`` for ``k1 <= k <= k2``."""
    rng = np.random.default_rng(seed)
    n = k2 - k1 + 1
    return CoeffSeq(k1, rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n))


def draw_signal(rng, L: int, length=(6, 10), low: float = -1.0, high: float = 1.0,
                offset: int = 0, require_cpr: bool = True, max_tries: int = 1000) -> CoeffSeq:
    """Random coefficients with real and imaginary parts uniform in ``[low, high]``.

    ``length`` is an inclusive range for the number of coefficients. With
    ``require_cpr`` draws are repeated until :func:`~splinecpr.signal.is_cpr`
    accepts the sequence for support length ``L``.
    """
    lo, hi = (length, length) if np.isscalar(length) else length
    for _ in range(max_tries):
        n = int(rng.integers(lo, hi + 1))
        c = CoeffSeq(offset, rng.uniform(low, high, n) + 1j * rng.uniform(low, high, n))
        if c.is_zero:
            continue
        if not require_cpr or is_cpr(c, L):
            return c
    raise RuntimeError(f"no retrievable sequence in {max_tries} draws")


def run_trial(c: CoeffSeq, cfg: RecoveryConfig, rel_floor: float = 0.05) -> dict:
    """Sample ``c`` per ``cfg``, recover, and compare with the truth."""
    samples = take_samples(c, cfg.generator, cfg.nodes, cfg.noise, cfg.seed)
    try:
        rec, diag = recover_signal(samples, cfg)
    except RecoveryError as exc:
        return {"ok": False, "error": str(exc), "interval": exc.interval}
    report = verify_recovery(c, rec, rel_floor)
    report.update(ok=True, recovered=rec.to_dict(), unresolved=diag.get("unresolved", []),
                  warnings=len(diag["warnings"]))
    return report
