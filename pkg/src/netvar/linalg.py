"""Symmetric-matrix utilities with eigenvalue clamping.

Covariance plug-ins can be near-singular (or slightly indefinite from
round-off) for unlucky node pairs; all inversions here clamp eigenvalues
from below at a small multiple of the trace so quadratic forms stay finite
without distorting well-conditioned inputs.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError

#: Relative eigenvalue floor: eigenvalues below CLAMP_REL * trace are lifted.
CLAMP_REL = 1e-10

#: Absolute floor used when the trace itself is not positive.
_TINY = 1e-300


def _clamp_tol(trace: float) -> float:
    return max(CLAMP_REL * abs(trace), _TINY)


def _clamped_eig(m: np.ndarray, tol: float | None):
    if not np.all(np.isfinite(m)):
        raise InputError("matrix has non-finite entries")
    sym = 0.5 * (m + m.T)
    lam, vec = np.linalg.eigh(sym)
    t = _clamp_tol(float(np.trace(sym))) if tol is None else tol
    return np.maximum(lam, t), vec


def sym_inv_sqrt(m: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Inverse square root of a symmetric matrix with clamped eigenvalues.

    Symmetrizes the input, lifts eigenvalues below `tol` (default
    CLAMP_REL * trace) and returns V diag(lambda^(-1/2)) V'. The result is
    symmetric positive definite for any finite input.
    """
    lam, vec = _clamped_eig(np.asarray(m, dtype=float), tol)
    return (vec / np.sqrt(lam)) @ vec.T


def sym_inv(m: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Clamped symmetric inverse; equals sym_inv_sqrt(m) squared."""
    lam, vec = _clamped_eig(np.asarray(m, dtype=float), tol)
    return (vec / lam) @ vec.T


def sym_inv_2x2_batch(mats: np.ndarray) -> np.ndarray:
    """Clamped inverse of a batch of symmetric 2x2 matrices.

    Closed-form eigendecomposition, vectorized over leading axes; agrees
    with `sym_inv` applied matrix by matrix. Input shape (..., 2, 2).
    """
    a = mats[..., 0, 0]
    b = 0.5 * (mats[..., 0, 1] + mats[..., 1, 0])
    c = mats[..., 1, 1]
    mean = 0.5 * (a + c)
    radius = np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))
    tol = np.maximum(CLAMP_REL * np.abs(a + c), _TINY)
    lam1 = np.maximum(mean + radius, tol)
    lam2 = np.maximum(mean - radius, tol)

    # Eigenvector for lam1: pick the algebraically stabler of the two columns
    # of (M - lam2 I); they are parallel, but one can vanish.
    v1a = np.where(a - c >= 0.0, lam1 - c, b)
    v1b = np.where(a - c >= 0.0, b, lam1 - a)
    norm = np.sqrt(v1a * v1a + v1b * v1b)
    degenerate = norm < _TINY
    v1a = np.where(degenerate, 1.0, v1a / np.where(degenerate, 1.0, norm))
    v1b = np.where(degenerate, 0.0, v1b / np.where(degenerate, 1.0, norm))
    # Second eigenvector is the 90-degree rotation of the first.
    v2a, v2b = -v1b, v1a

    inv = np.empty_like(mats, dtype=float)
    inv[..., 0, 0] = v1a * v1a / lam1 + v2a * v2a / lam2
    inv[..., 0, 1] = v1a * v1b / lam1 + v2a * v2b / lam2
    inv[..., 1, 0] = inv[..., 0, 1]
    inv[..., 1, 1] = v1b * v1b / lam1 + v2b * v2b / lam2
    return inv


def spectral_radius(m: np.ndarray) -> float:
    """Largest eigenvalue modulus of a square (not necessarily symmetric) matrix."""
    return float(np.abs(np.linalg.eigvals(m)).max()) if m.size else 0.0
