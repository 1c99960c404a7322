"""Dense linear-algebra kernels shared by the rest of the package.

Everything here works on plain ``numpy`` arrays.  Matrices are small
(n <= ~32) so nothing is sparse and nothing is clever.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NotPSD, RankDeficient

RANK_RTOL = 1e-10
PSD_TOL = 1e-10
HURWITZ_TOL = 1e-9


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-d float array."""
    arr = np.array(M, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"{name}: expected a 2-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: non-finite entries")
    return arr


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class SymEig:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # orthonormal columns


def sym_eig(M: np.ndarray) -> SymEig:
    w, V = np.linalg.eigh(symmetrize(np.asarray(M, dtype=float)))
    return SymEig(w, V)


def kron(A, B) -> np.ndarray:
    return np.kron(as_matrix(A), as_matrix(B))


def direct_sum(blocks: Sequence) -> np.ndarray:
    """Block-diagonal assembly of square blocks."""
    mats = [as_matrix(b) for b in blocks]
    for i, b in enumerate(mats):
        if b.shape[0] != b.shape[1]:
            raise ValueError(f"direct_sum: block {i} is not square {b.shape}")
    size = sum(b.shape[0] for b in mats)
    out = np.zeros((size, size))
    k = 0
    for b in mats:
        d = b.shape[0]
        out[k:k + d, k:k + d] = b
        k += d
    return out


def sym_sqrt_psd(M) -> np.ndarray:
    """Symmetric square root of a PSD matrix.

    Eigenvalues in ``[-1e-10, 1e-12)`` are clamped to zero; anything more
    negative raises :class:`NotPSD`.
    """
    eig = sym_eig(as_matrix(M))
    w = eig.eigenvalues
    if w.size and w[0] < -PSD_TOL:
        raise NotPSD(f"minimum eigenvalue {w[0]:.3e} < -{PSD_TOL:g}")
    w = np.where(w < 1e-12, 0.0, w)
    V = eig.eigenvectors
    return symmetrize((V * np.sqrt(w)) @ V.T)


def numerical_rank(M, rtol: float = RANK_RTOL) -> int:
    M = as_matrix(M)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def orthonormal_null_basis(M, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis (as columns) of ker(M), via the SVD."""
    M = as_matrix(M)
    ncols = M.shape[1]
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        rank = 0
    else:
        rank = int(np.sum(s > rtol * s[0]))
    return Vt[rank:].T.copy().reshape(ncols, ncols - rank)


def rowspace_complement_projector(C) -> np.ndarray:
    """Orthogonal projector onto ker(C): ``I - C'(CC')^{-1}C``."""
    C = as_matrix(C)
    CCt = C @ C.T
    if np.linalg.cond(CCt) > 1e12:
        raise RankDeficient("C C' is singular (C must have full row rank)")
    n = C.shape[1]
    Pi = np.eye(n) - C.T @ np.linalg.solve(CCt, C)
    return symmetrize(Pi)


def hurwitz_margin(M) -> float:
    """Largest real part of the spectrum; Hurwitz iff the result < -1e-9."""
    M = as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise ValueError("hurwitz_margin: matrix must be square")
    return float(np.max(np.linalg.eigvals(M).real))


def is_hurwitz(M) -> bool:
    return hurwitz_margin(M) < -HURWITZ_TOL


def min_eig(M) -> float:
    return float(np.linalg.eigvalsh(symmetrize(np.asarray(M, dtype=float)))[0])
