"""Dense matrix kernels: validation, thin SVD, reconstruction and norms.

Matrices are plain two-dimensional ``float64`` numpy arrays. Everything
here is a pure function of its inputs.
"""
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import NumericalError, ShapeError

__all__ = [
    "SvdFactors",
    "as_matrix",
    "svd",
    "reconstruct",
    "frobenius_norm",
    "nuclear_norm",
    "numerical_rank",
]


class SvdFactors(NamedTuple):
    """Thin SVD ``m = u @ diag(sigma) @ v.T`` with ``p = min(n1, n2)``."""

    u: np.ndarray  # (n1, p)
    sigma: np.ndarray  # (p,), non-increasing, >= 0
    v: np.ndarray  # (n2, p)

    @property
    def shape(self):
        return self.u.shape[0], self.v.shape[0]


def as_matrix(m, name="matrix"):
    """Return `m` as a finite, non-empty 2-D float64 array.

    Raises ShapeError for wrong dimensionality or empty input and
    ValueError if any entry is NaN or infinite.
    """
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must have positive dimensions, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def svd(m):
    """Thin singular value decomposition of a finite matrix.

    Uses LAPACK ``gesdd`` and falls back to the slower but more robust
    ``gesvd`` driver before giving up.
    """
    a = as_matrix(m)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError:
        try:
            u, s, vt = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesvd")
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalError(
                f"SVD did not converge for a {a.shape[0]}x{a.shape[1]} matrix",
                shape=a.shape,
            ) from exc
    return SvdFactors(u, s, vt.T)


def reconstruct(f):
    """Multiply thin SVD factors back together: ``u @ diag(sigma) @ v.T``."""
    u, sigma, v = (np.asarray(x, dtype=np.float64) for x in f)
    if u.ndim != 2 or v.ndim != 2 or sigma.ndim != 1:
        raise ShapeError("factors must be (n1, p), (p,), (n2, p)")
    p = sigma.shape[0]
    if u.shape[1] != p or v.shape[1] != p:
        raise ShapeError(
            f"inconsistent factor shapes u{u.shape}, sigma{sigma.shape}, v{v.shape}"
        )
    return (u * sigma) @ v.T


def frobenius_norm(m):
    return float(np.linalg.norm(as_matrix(m), "fro"))


def nuclear_norm(m):
    """Sum of singular values."""
    return float(np.sum(svd(m).sigma))


def numerical_rank(m, rtol=1e-9):
    """Count singular values above ``rtol * sigma_max``."""
    s = svd(m).sigma
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))
