"""Small dense-matrix geometry: SVD and projections onto O(n), SO(n), SO-(n).

Matrices are plain numpy arrays of shape (n, n) with n in {1, 2, 3} for the
solver's use (nothing here actually restricts n).  The projections follow the
closed forms

    nearest orthogonal     B* = U V^t,            dist^2 = sum_i (sigma_i - 1)^2
    nearest opposite       C* = U D_n V^t,        dist^2 = sum_i (sigma_i - 1)^2 + 4 sigma_min

where A = U diag(sigma) V^t is a singular value decomposition with sigma
non-negative and non-increasing, and D_n = diag(1, ..., 1, -1).  "Opposite"
means the component of O(n) whose determinant sign is -sign(det A).

Stacked variants (trailing (n, n) axes) are provided for the pointwise
projection loops; they share the same conventions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDeterminantError

__all__ = [
    "SvdResult",
    "svd",
    "frobenius_inner",
    "nearest_orthogonal",
    "nearest_opposite",
    "t_plus",
    "t_minus",
    "orthogonal_projections",
    "project_orthogonal_stack",
]


@dataclass(frozen=True)
class SvdResult:
    """SVD factors with sigma sorted non-increasing and non-negative.

    Reconstruction is u @ diag(sigma) @ v.T (note: v, not v^t, is stored).
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T


def _check_square(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def svd(a) -> SvdResult:
    """Deterministic SVD of a small square matrix.

    Backed by LAPACK via numpy; output is identical for identical input.
    """
    a = _check_square(a)
    u, s, vh = np.linalg.svd(a)
    return SvdResult(u=u, sigma=s, v=vh.T)


def frobenius_inner(a, b) -> float:
    """Frobenius inner product <A, B> = sum_ij A_ij B_ij."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(a * b))


def nearest_orthogonal(a) -> tuple[np.ndarray, float]:
    """Nearest matrix in O(n) and the squared Frobenius distance to it.

    For nonsingular input the result has the same determinant sign as the
    input.  Defined for every matrix; with repeated singular values any
    minimizer is acceptable and the deterministic SVD picks one.
    """
    a = _check_square(a)
    u, s, vh = np.linalg.svd(a)
    q = u @ vh
    dist_sq = float(np.sum((s - 1.0) ** 2))
    return q, dist_sq


def nearest_opposite(a) -> tuple[np.ndarray, float]:
    """Nearest matrix in the O(n) component opposite to sign(det a).

    Returns (C*, dist^2) with C* = U D_n V^t and
    dist^2 = sum (sigma_i - 1)^2 + 4 sigma_min.  Requires det(a) != 0.
    """
    a = _check_square(a)
    if np.linalg.det(a) == 0.0:
        raise DegenerateDeterminantError("nearest_opposite needs det(a) != 0")
    u, s, vh = np.linalg.svd(a)
    u = u.copy()
    u[:, -1] = -u[:, -1]
    c = u @ vh
    dist_sq = float(np.sum((s - 1.0) ** 2) + 4.0 * s[-1])
    return c, dist_sq


def t_plus(a) -> np.ndarray:
    """Nearest matrix in SO(n); requires det(a) != 0."""
    a = _check_square(a)
    if np.linalg.det(a) == 0.0:
        raise DegenerateDeterminantError("t_plus needs det(a) != 0")
    if np.linalg.det(a) > 0:
        return nearest_orthogonal(a)[0]
    return nearest_opposite(a)[0]


def t_minus(a) -> np.ndarray:
    """Nearest matrix in SO-(n); requires det(a) != 0."""
    a = _check_square(a)
    if np.linalg.det(a) == 0.0:
        raise DegenerateDeterminantError("t_minus needs det(a) != 0")
    if np.linalg.det(a) < 0:
        return nearest_orthogonal(a)[0]
    return nearest_opposite(a)[0]


# ---------------------------------------------------------------------------
# Stacked versions for pointwise field projections.
# ---------------------------------------------------------------------------

def orthogonal_projections(mats: np.ndarray):
    """Per-matrix SO/SO- projections for a stack of shape (..., n, n).

    Returns (plus, minus, delta_e, singular) where

        plus[i]    nearest matrix in SO(n)
        minus[i]   nearest matrix in SO-(n)
        delta_e[i] <plus - minus, mats>_F  ( = 2 sigma_min sign(det) )
        singular   boolean mask of exactly-zero determinants

    Singular entries follow the plus-branch convention: delta_e is 0 there and
    both projections are still valid elements of their components.
    """
    mats = np.asarray(mats, dtype=float)
    u, s, vh = np.linalg.svd(mats)
    uv = u @ vh
    u_flip = u.copy()
    u_flip[..., :, -1] = -u_flip[..., :, -1]
    uvd = u_flip @ vh
    det = np.linalg.det(mats)
    det_uv = np.linalg.det(uv)
    take_uv = (det_uv > 0)[..., None, None]
    plus = np.where(take_uv, uv, uvd)
    minus = np.where(take_uv, uvd, uv)
    delta_e = 2.0 * s[..., -1] * np.sign(det)
    return plus, minus, delta_e, det == 0.0


def project_orthogonal_stack(mats: np.ndarray):
    """Pointwise nearest-orthogonal projection of a stack (..., n, n).

    Nonsingular entries map to U V^t (determinant sign preserved); entries
    with det exactly 0 are assigned to SO(n) by convention.  Returns
    (projected, singular_count).
    """
    mats = np.asarray(mats, dtype=float)
    u, s, vh = np.linalg.svd(mats)
    uv = u @ vh
    det = np.linalg.det(mats)
    singular = det == 0.0
    n_sing = int(np.count_nonzero(singular))
    if n_sing:
        det_uv = np.linalg.det(uv)
        fix = singular & (det_uv < 0)
        if np.any(fix):
            u_flip = u[fix]
            u_flip[..., :, -1] = -u_flip[..., :, -1]
            uv[fix] = u_flip @ vh[fix]
    return uv, n_sing
