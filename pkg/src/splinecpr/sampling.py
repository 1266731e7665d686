"""Sampling node sets and phaseless (Hermite) samples.

Nodes are given in the normalized interval ``(0, 1)``. With shift spacing
``period`` the physical sample positions on interval ``j`` are
``(gamma + j) * period``. Sample values are squared magnitudes.

Noise model: ``z = |f|^2 + ||f||_inf^2 * e`` with ``e`` uniform in
``[-noise, noise]``, clamped at zero. The random stream of interval ``j``
comes from ``numpy.random.SeedSequence(seed, spawn_key=(j mod 2**32,))``,
drawing the function-sample noise first and then the derivative-sample
noise, so a fixed seed reproduces every value bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NodeError
from .generator import Generator
from .signal import CoeffSeq, eval_signal, eval_signal_deriv

__all__ = [
    "NodeSet",
    "SampleSet",
    "chebyshev_nodes",
    "default_nodes",
    "take_samples",
    "sup_norm",
]

CSV_HEADER = ["j", "node", "kind", "value"]
CSV_VERSION = "# splinecpr samples v1"


def _check_nodes(x, what):
    x = np.asarray(x, dtype=float).ravel()
    if x.size and (np.any(x <= 0) or np.any(x >= 1)):
        raise NodeError(f"{what} nodes must lie in the open interval (0, 1)")
    if np.unique(x).size != x.size:
        raise NodeError(f"{what} nodes must be distinct")
    return np.sort(x)


@dataclass(frozen=True, eq=False)
class NodeSet:
    """Function nodes ``gamma`` and derivative nodes ``gamma_prime``."""

    gamma: np.ndarray
    gamma_prime: np.ndarray = field(default_factory=lambda: np.zeros(0))
    period: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "gamma", _check_nodes(self.gamma, "function"))
        object.__setattr__(self, "gamma_prime", _check_nodes(self.gamma_prime, "derivative"))
        if not self.period > 0:
            raise NodeError("period must be positive")

    @property
    def hermite_order(self) -> int:
        """``N`` such that ``|gamma| = 2N - 1``, for Hermite node sets."""
        n = self.gamma.size
        if n % 2 == 0:
            raise NodeError(f"{n} function nodes is not of the form 2N-1")
        N = (n + 1) // 2
        if N < 3 or self.gamma_prime.size != 2 * N - 5:
            raise NodeError(
                f"Hermite node set needs 2N-1 and 2N-5 nodes with N >= 3; "
                f"got {n} and {self.gamma_prime.size}")
        return N

    def __eq__(self, other):
        if not isinstance(other, NodeSet):
            return NotImplemented
        return (np.array_equal(self.gamma, other.gamma)
                and np.array_equal(self.gamma_prime, other.gamma_prime)
                and self.period == other.period)

    def to_dict(self) -> dict:
        return {"gamma": self.gamma.tolist(), "gamma_prime": self.gamma_prime.tolist(),
                "period": self.period}

    @classmethod
    def from_dict(cls, doc) -> "NodeSet":
        return cls(np.asarray(doc["gamma"], float),
                   np.asarray(doc.get("gamma_prime", []), float),
                   float(doc.get("period", 1.0)))


def chebyshev_nodes(n: int, lo: float = 0.01, hi: float = 0.99) -> np.ndarray:
    """``n`` Chebyshev points of the first kind mapped to ``[lo, hi]``, increasing."""
    if n <= 0:
        return np.zeros(0)
    k = np.arange(1, n + 1)
    x = np.cos((2 * k - 1) * np.pi / (2 * n))[::-1]
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * x


def default_nodes(N: int, period: float = 1.0) -> NodeSet:
    """Chebyshev Hermite nodes: ``2N-1`` function and ``2N-5`` derivative points."""
    if N < 3:
        raise NodeError("Hermite pathway requires N >= 3")
    return NodeSet(chebyshev_nodes(2 * N - 1), chebyshev_nodes(2 * N - 5), period)


@dataclass(eq=False)
class SampleSet:
    """Phaseless samples per interval.

    ``values_f[i]`` holds ``|f((gamma + j) * period)|^2`` and ``values_df[i]``
    holds ``|f'((gamma' + j) * period)|^2`` for ``j = intervals[i]``.
    """

    nodes: NodeSet
    intervals: np.ndarray
    values_f: np.ndarray
    values_df: np.ndarray
    noise: float = 0.0
    seed: int | None = None
    sup_norm: float = 0.0

    def __post_init__(self):
        self.intervals = np.asarray(self.intervals, dtype=int).ravel()
        n = self.intervals.size
        self.values_f = np.asarray(self.values_f, dtype=float).reshape(n, self.nodes.gamma.size)
        self.values_df = np.asarray(self.values_df, dtype=float).reshape(n, self.nodes.gamma_prime.size)

    def __len__(self):
        return self.intervals.size

    def to_dict(self) -> dict:
        return {
            "nodes": self.nodes.to_dict(),
            "noise": self.noise,
            "seed": self.seed,
            "sup_norm": self.sup_norm,
            "intervals": self.intervals.tolist(),
            "values_f": self.values_f.tolist(),
            "values_df": self.values_df.tolist(),
        }

    @classmethod
    def from_dict(cls, doc) -> "SampleSet":
        nodes = NodeSet.from_dict(doc["nodes"])
        return cls(nodes, doc["intervals"], doc["values_f"], doc["values_df"],
                   float(doc.get("noise", 0.0)), doc.get("seed"),
                   float(doc.get("sup_norm", 0.0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SampleSet":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        """CSV with columns ``j, node, kind, value`` (``kind`` is ``f`` or ``df``).

        The first line is a ``#`` version comment. Values are written with
        ``repr`` so that reading them back is exact.
        """
        buf = io.StringIO()
        buf.write(CSV_VERSION + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i, j in enumerate(self.intervals):
            for g, v in zip(self.nodes.gamma, self.values_f[i]):
                w.writerow([int(j), repr(float(g)), "f", repr(float(v))])
            for g, v in zip(self.nodes.gamma_prime, self.values_df[i]):
                w.writerow([int(j), repr(float(g)), "df", repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, period: float = 1.0, noise: float = 0.0,
                 seed=None) -> "SampleSet":
        lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
        rows = list(csv.DictReader(lines))
        if rows and list(rows[0].keys()) != CSV_HEADER:
            raise ValueError(f"expected CSV header {CSV_HEADER}")
        intervals = sorted({int(r["j"]) for r in rows})
        first = [r for r in rows if int(r["j"]) == intervals[0]] if intervals else []
        gamma = [float(r["node"]) for r in first if r["kind"] == "f"]
        gamma_p = [float(r["node"]) for r in first if r["kind"] == "df"]
        nodes = NodeSet(np.array(gamma), np.array(gamma_p), period)
        vf = np.zeros((len(intervals), len(gamma)))
        vdf = np.zeros((len(intervals), len(gamma_p)))
        pos = {j: i for i, j in enumerate(intervals)}
        col_f = {g: i for i, g in enumerate(nodes.gamma)}
        col_df = {g: i for i, g in enumerate(nodes.gamma_prime)}
        for r in rows:
            i, g, v = pos[int(r["j"])], float(r["node"]), float(r["value"])
            if r["kind"] == "f":
                vf[i, col_f[g]] = v
            elif r["kind"] == "df":
                vdf[i, col_df[g]] = v
            else:
                raise ValueError(f"unknown sample kind {r['kind']!r}")
        return cls(nodes, intervals, vf, vdf, noise, seed)


def sup_norm(c: CoeffSeq, g: Generator, period: float = 1.0, per_interval: int = 4096) -> float:
    """``max |f|`` estimated on a uniform grid of ``per_interval`` points per interval."""
    if c.is_zero:
        return 0.0
    lo, hi = c.k_minus, c.k_plus + g.support_length
    s = np.linspace(lo, hi, (hi - lo) * per_interval + 1)
    return float(np.max(np.abs(eval_signal(c, g, s * period, period))))


def _interval_rng(seed, j):
    ss = np.random.SeedSequence(seed, spawn_key=(int(j) % 2**32,))
    return np.random.default_rng(ss)


def take_samples(c: CoeffSeq, g: Generator, nodes: NodeSet, noise: float = 0.0,
                 seed: int | None = 0, intervals=None) -> SampleSet:
    """Phaseless Hermite samples of ``f = sum c_k g(. / period - k)``.

    By default every interval ``j`` that meets the support of ``f`` is
    sampled, i.e. ``j = k_minus, ..., k_plus + L - 1``.
    """
    if noise < 0:
        raise ValueError("noise level must be nonnegative")
    p = nodes.period
    if intervals is None:
        intervals = (np.arange(c.k_minus, c.k_plus + g.support_length)
                     if not c.is_zero else np.zeros(0, int))
    intervals = np.asarray(intervals, dtype=int)
    fnorm = sup_norm(c, g, p) if noise > 0 else 0.0
    vf = np.zeros((intervals.size, nodes.gamma.size))
    vdf = np.zeros((intervals.size, nodes.gamma_prime.size))
    for i, j in enumerate(intervals):
        fv = eval_signal(c, g, (nodes.gamma + j) * p, p)
        dv = eval_signal_deriv(c, g, (nodes.gamma_prime + j) * p, p)
        vf[i] = fv.real ** 2 + fv.imag ** 2
        vdf[i] = dv.real ** 2 + dv.imag ** 2
        if noise > 0:
            rng = _interval_rng(seed, j)
            ef = rng.uniform(-noise, noise, size=nodes.gamma.size)
            edf = rng.uniform(-noise, noise, size=nodes.gamma_prime.size)
            vf[i] = np.maximum(vf[i] + fnorm ** 2 * ef, 0.0)
            vdf[i] = np.maximum(vdf[i] + fnorm ** 2 * edf, 0.0)
    return SampleSet(nodes, intervals, vf, vdf, float(noise), seed, fnorm)
