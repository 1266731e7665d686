"""Window recovery from function samples alone, for generators whose
outer products ``Phi(x) Phi(x)^T`` span all real symmetric ``L x L`` matrices.

With ``Phi(t) = (phi(t + L - 1), ..., phi(t))`` and a window
``w = (c_{j-L+1}, ..., c_j)``, the interval's samples are
``|f(j + t)|^2 = Phi(t)^T G Phi(t)`` with ``G = Re(w w^*)``. Enough
well-placed nodes determine ``G`` linearly; ``G`` has rank at most two and
its factor recovers ``w`` up to a rotation or reflection of the plane, i.e.
up to a unimodular constant and conjugation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import GramRankError, SpanningError
from .generator import Generator, eval_generator
from .signal import canonical_form

__all__ = [
    "SymBasisSystem",
    "sym_index",
    "outer_row",
    "build_basis_system",
    "gram_from_samples",
    "gram_of",
    "factor_gram",
]


def sym_index(L: int):
    """Upper-triangular index pairs in the order ``E11, E12, ..., E1L, E22, ...``."""
    return [(m, n) for m in range(L) for n in range(m, L)]


def outer_row(v) -> np.ndarray:
    """Coefficients ``r`` with ``v^T G v = r . (G_11, G_12, ..., G_LL)``."""
    v = np.asarray(v, dtype=float)
    return np.array([v[m] * v[n] * (1.0 if m == n else 2.0) for m, n in sym_index(v.size)])


def _phi_vector(g: Generator, t) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    L = g.support_length
    return np.stack([eval_generator(g, t + L - 1 - r) for r in range(L)], axis=-1)


@dataclass(frozen=True, eq=False)
class SymBasisSystem:
    """Selected nodes and the LU-factored design matrix ``A``."""

    generator: Generator
    nodes: np.ndarray
    A: np.ndarray
    lu: tuple
    cond: float

    @property
    def L(self) -> int:
        return self.generator.support_length


def build_basis_system(g: Generator, trial_nodes=None, rel_tol: float = 1e-9) -> SymBasisSystem:
    """Pick ``L(L+1)/2`` nodes whose outer products form a basis.

    Greedy selection by column-pivoted QR of the candidate design matrix:
    each pivot is the candidate with the largest component orthogonal to
    those already taken, and selection stops when that component drops
    below ``rel_tol`` times the first one.

    Raises:
        SpanningError: fewer than ``L(L+1)/2`` independent candidates;
            ``dimension`` holds the number found.
    """
    L = g.support_length
    target = L * (L + 1) // 2
    if trial_nodes is None:
        trial_nodes = (np.arange(200) + 0.5) / 200
    cand = np.asarray(trial_nodes, dtype=float).ravel()
    rows = np.array([outer_row(v) for v in _phi_vector(g, cand)])
    _, R, piv = scipy.linalg.qr(rows.T, pivoting=True, mode="economic")
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > rel_tol * diag[0])) if diag.size and diag[0] > 0 else 0
    if rank < target:
        raise SpanningError(
            f"outer products span only a {rank}-dimensional subspace "
            f"(need {target}); the generator lacks the spanning property",
            dimension=rank)
    nodes = np.sort(cand[piv[:target]])
    A = np.array([outer_row(v) for v in _phi_vector(g, nodes)])
    return SymBasisSystem(g, nodes, A, scipy.linalg.lu_factor(A), float(np.linalg.cond(A)))


def gram_from_samples(sys: SymBasisSystem, values) -> np.ndarray:
    """Solve for the window Gram matrix from the samples at ``sys.nodes``."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size != sys.nodes.size:
        raise ValueError(f"expected {sys.nodes.size} samples, got {v.size}")
    x = scipy.linalg.lu_solve(sys.lu, v)
    L = sys.L
    G = np.zeros((L, L))
    for val, (m, n) in zip(x, sym_index(L)):
        G[m, n] = G[n, m] = val
    return G


def gram_of(w) -> np.ndarray:
    """``Re(w w^*)`` for a complex window."""
    w = np.asarray(w, dtype=complex)
    return np.outer(w.real, w.real) + np.outer(w.imag, w.imag)


def factor_gram(G, rank_tol: float = 1e-6, eta: float = 1e-8) -> np.ndarray:
    """Complex window ``w`` with ``Re(w w^*) = G``, in canonical form.

    Raises:
        GramRankError: third eigenvalue (or a negative one) exceeds
            ``rank_tol * trace(G)``.
    """
    G = np.asarray(G, dtype=float)
    G = 0.5 * (G + G.T)
    lam, V = np.linalg.eigh(G)
    lam, V = lam[::-1], V[:, ::-1]
    scale = max(float(np.trace(G)), float(np.abs(lam).max()) if lam.size else 0.0)
    if scale == 0.0:
        return np.zeros(G.shape[0], dtype=complex)
    if (lam.size > 2 and lam[2] > rank_tol * scale) or lam[-1] < -rank_tol * scale:
        raise GramRankError(
            f"Gram not rank <= 2: inconsistent data (eigenvalues {lam[:3]})")
    top = np.sqrt(np.clip(lam[:2], 0.0, None))
    F = V[:, :2] * top
    w = F[:, 0] + 1j * (F[:, 1] if F.shape[1] > 1 else 0.0)
    return canonical_form(w, eta)
