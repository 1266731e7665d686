"""Compactly supported real piecewise-polynomial generators.

A generator ``phi`` lives on ``[0, L]``. It is stored as ``L`` polynomial
pieces in the *local* coordinate: piece ``r`` holds the ascending monomial
coefficients of ``t -> phi(r + t)`` for ``t`` in ``[0, 1)``. Coefficients
are exact rationals and are only converted to floats for evaluation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import comb
from typing import Sequence

import numpy as np

from .errors import GeneratorError

__all__ = [
    "Generator",
    "bspline",
    "phi1",
    "figure1_generator",
    "local_basis_matrix",
    "eval_generator",
    "eval_generator_deriv",
]


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**12)
    return Fraction(value)


def _poly_taylor_shift(coeffs, shift):
    """Coefficients of ``t -> p(t + shift)`` (ascending, exact)."""
    out = [Fraction(0)] * len(coeffs)
    for k, a in enumerate(coeffs):
        if a == 0:
            continue
        for i in range(k + 1):
            out[i] += a * comb(k, i) * Fraction(shift) ** (k - i)
    return out


def _poly_scale_arg(coeffs, factor):
    """Coefficients of ``t -> p(factor * t)``."""
    factor = Fraction(factor)
    return [a * factor**k for k, a in enumerate(coeffs)]


def _poly_antiderivative(coeffs):
    return [Fraction(0)] + [a / (k + 1) for k, a in enumerate(coeffs)]


def _poly_derivative(coeffs):
    return [a * k for k, a in enumerate(coeffs)][1:] or [Fraction(0)]


def _poly_at(coeffs, t):
    acc = Fraction(0)
    for a in reversed(coeffs):
        acc = acc * t + a
    return acc


@dataclass(frozen=True)
class Generator:
    """Real piecewise polynomial supported on ``[0, support_length]``.

    Attributes:
        pieces: ``L`` tuples of ascending local-coordinate coefficients.
        name: free-form label, not part of equality.
    """

    pieces: tuple
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if len(self.pieces) == 0:
            raise GeneratorError("generator needs at least one piece")
        width = max(len(p) for p in self.pieces)
        padded = tuple(
            tuple(_as_fraction(a) for a in p) + (Fraction(0),) * (width - len(p))
            for p in self.pieces
        )
        object.__setattr__(self, "pieces", padded)

    @property
    def support_length(self) -> int:
        return len(self.pieces)

    L = support_length

    @property
    def degree(self) -> int:
        """Degree bound of the pieces (independent of ``L``)."""
        return len(self.pieces[0]) - 1

    @property
    def order(self) -> int:
        return self.degree + 1

    @cached_property
    def _float_pieces(self) -> np.ndarray:
        return np.array([[float(a) for a in p] for p in self.pieces])

    @cached_property
    def _float_deriv_pieces(self) -> np.ndarray:
        d = self.derivative_pieces()
        return np.array([[float(a) for a in p] for p in d])

    def derivative_pieces(self):
        """Exact local-coordinate pieces of the piecewise derivative."""
        return tuple(tuple(_poly_derivative(list(p))) for p in self.pieces)

    def __call__(self, x):
        return eval_generator(self, x)

    def deriv(self, x):
        return eval_generator_deriv(self, x)

    def scaled(self, factor) -> "Generator":
        f = _as_fraction(factor)
        return Generator(tuple(tuple(a * f for a in p) for p in self.pieces),
                         name=self.name)

    @classmethod
    def from_global_pieces(cls, pieces: Sequence[Sequence], dilation=1, name=""):
        """Build from pieces written in the global variable.

        ``pieces[r]`` are the ascending coefficients of the polynomial that
        equals the generator on ``[r * dilation, (r + 1) * dilation)``. The
        result is the unit-width generator ``s -> psi(dilation * s)``.
        """
        local = []
        for r, p in enumerate(pieces):
            q = _poly_scale_arg([_as_fraction(a) for a in p], dilation)
            local.append(tuple(_poly_taylor_shift(q, r)))
        return cls(tuple(local), name=name)

    def is_continuous(self) -> bool:
        return _knots_agree(self.pieces)

    def is_differentiable(self) -> bool:
        return _knots_agree(self.derivative_pieces())

    def to_json(self) -> dict:
        return {
            "L": self.support_length,
            "degree": self.degree,
            "pieces": [[str(a) for a in p] for p in self.pieces],
        }

    @classmethod
    def from_json(cls, doc) -> "Generator":
        if isinstance(doc, str):
            doc = json.loads(doc)
        try:
            L = int(doc["L"])
            degree = int(doc["degree"])
            pieces = [[Fraction(a) for a in p] for p in doc["pieces"]]
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise GeneratorError(f"malformed generator description: {exc}") from exc
        if len(pieces) != L:
            raise GeneratorError(f"expected {L} pieces, got {len(pieces)}")
        if any(len(p) > degree + 1 for p in pieces):
            raise GeneratorError(f"a piece exceeds degree {degree}")
        pieces = [p + [Fraction(0)] * (degree + 1 - len(p)) for p in pieces]
        return cls(tuple(tuple(p) for p in pieces), name=doc.get("name", ""))


def _knots_agree(pieces) -> bool:
    # value at the right end of piece r must equal the left end of piece r+1;
    # the outer ends must vanish
    ends = [Fraction(0)]
    for p in pieces:
        ends.append(p[0])
        ends.append(_poly_at(list(p), 1))
    ends.append(Fraction(0))
    return all(ends[2 * i] == ends[2 * i + 1] for i in range(len(ends) // 2))


def _evaluate(table: np.ndarray, x):
    x = np.asarray(x, dtype=float)
    L = table.shape[0]
    r = np.floor(x)
    t = x - r
    inside = (r >= 0) & (r < L)
    idx = np.where(inside, r, 0).astype(int)
    coeffs = table[idx]
    # Horner along the last axis
    out = np.zeros_like(t)
    for k in range(table.shape[1] - 1, -1, -1):
        out = out * t + coeffs[..., k]
    out = np.where(inside, out, 0.0)
    return out if out.ndim else float(out)


def eval_generator(g: Generator, x):
    """Evaluate ``g`` at ``x`` (scalar or array); zero outside ``[0, L)``."""
    return _evaluate(g._float_pieces, x)


def eval_generator_deriv(g: Generator, x):
    """Evaluate the piecewise derivative of ``g``."""
    return _evaluate(g._float_deriv_pieces, x)


def bspline(N: int) -> Generator:
    """Cardinal B-spline of order ``N`` on ``[0, N]`` with exact pieces.

    Uses the averaging recursion ``B_N(x) = int_0^1 B_{N-1}(x - t) dt``,
    which in local coordinates reads
    ``piece_r(t) = I_{r-1}(1) - I_{r-1}(t) + I_r(t)`` with ``I`` the
    antiderivative of the previous order's pieces.
    """
    if int(N) != N or N < 1:
        raise GeneratorError(f"B-spline order must be a positive integer, got {N}")
    N = int(N)
    pieces = [[Fraction(1)]]
    for order in range(2, N + 1):
        anti = [_poly_antiderivative(p) for p in pieces]
        new = []
        for r in range(order):
            acc = [Fraction(0)] * order
            if r - 1 >= 0:
                prev = anti[r - 1]
                total = _poly_at(prev, 1)
                acc[0] += total
                for k, a in enumerate(prev):
                    acc[k] -= a
            if r < order - 1:
                for k, a in enumerate(anti[r]):
                    acc[k] += a
            new.append(acc)
        pieces = new
    return Generator(tuple(tuple(p) for p in pieces), name=f"B{N}")


def phi1() -> Generator:
    """The cubic generator on ``[0, 3]`` whose outer products span the symmetric 3x3 matrices."""
    F = Fraction
    return Generator.from_global_pieces(
        [
            [0, 0, 0, F(1, 2)],
            [F(1, 2), -2, 3, -1],
            [F(-3, 2), 5, -3, F(1, 2)],
        ],
        name="phi1",
    )


def figure1_generator(printed: bool = False) -> Generator:
    """Unit-width form of the period-2 generator used in the demo experiment.

    The default is ``psi(t) = 4 B_3(t / 2)``, i.e. ``4 * B_3`` on unit knots,
    which is differentiable. ``printed=True`` returns the piecewise formula
    ``t^2/2, -t^2+3t, t^2/2-3t`` on ``[0,2), [2,4), [4,6)`` taken verbatim;
    it is continuous but has derivative jumps at ``t = 2`` and ``t = 4``.
    """
    if not printed:
        g = bspline(3).scaled(4)
        return Generator(g.pieces, name="figure1")
    F = Fraction
    return Generator.from_global_pieces(
        [[0, 0, F(1, 2)], [0, 3, -1], [0, -3, F(1, 2)]],
        dilation=2,
        name="figure1-printed",
    )


def local_basis_matrix(g: Generator, n_monomials: int | None = None) -> np.ndarray:
    """Matrix ``H`` with ``psi(t) = H (1, t, ..., t^{n-1})^T`` on ``(0, 1)``.

    Row ``i`` holds the monomial coefficients of ``t -> g(t + L - 1 - i)``, so
    the rows follow ``psi(t) = (g(t + L - 1), ..., g(t))``. A local signal
    ``sum_i w_i psi_i(t)`` with window ``w = (c_{j-L+1}, ..., c_j)`` has
    monomial coefficients ``H^T w``.

    ``n_monomials`` pads with zero columns when a larger polynomial space is
    used for sampling than the generator's degree needs.

    Raises:
        GeneratorError: if the rows are linearly dependent.
    """
    H = g._float_pieces[::-1].copy()
    n = H.shape[1] if n_monomials is None else int(n_monomials)
    if n < H.shape[1]:
        if np.any(H[:, n:] != 0):
            raise GeneratorError(
                f"generator degree {g.degree} does not fit {n} monomials")
        H = H[:, :n]
    elif n > H.shape[1]:
        H = np.hstack([H, np.zeros((H.shape[0], n - H.shape[1]))])
    if _exact_rank([list(p) for p in g.pieces]) < g.support_length:
        raise GeneratorError("generator lacks local linear independence on (0,1)")
    return H


def _exact_rank(rows) -> int:
    """Rank of a matrix of Fractions by Gaussian elimination."""
    m = [list(r) for r in rows]
    rank = 0
    ncols = len(m[0]) if m else 0
    for col in range(ncols):
        pivot = next((i for i in range(rank, len(m)) if m[i][col] != 0), None)
        if pivot is None:
            continue
        m[rank], m[pivot] = m[pivot], m[rank]
        p = m[rank][col]
        for i in range(len(m)):
            if i != rank and m[i][col] != 0:
                f = m[i][col] / p
                m[i] = [a - f * b for a, b in zip(m[i], m[rank])]
        rank += 1
    return rank
