"""Dense real linear algebra used by every other module.

Matrices are plain 2-D ``float64`` numpy arrays and vectors are 1-D arrays
(treated as column vectors). Index sets are sorted 1-D integer arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DecompositionError,
    DimensionError,
    RankDeficiencyError,
    ValidationError,
    ZeroColumnError,
)

RANK_TOL = 1e-12


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite 2-D float array, raising on anything else."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains NaN or Inf")
    return arr


def as_vector(v, length=None, name="vector"):
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise DimensionError(f"{name} has length {arr.shape[0]}, expected {length}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains NaN or Inf")
    return arr


def as_index_set(indices, n):
    """Validate a column index set against a matrix with ``n`` columns."""
    idx = np.asarray(indices if indices is not None else [], dtype=np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValidationError(f"index set {idx.tolist()} out of range [0, {n})")
    if idx.size > 1 and np.any(np.diff(np.sort(idx)) == 0):
        raise ValidationError(f"index set {idx.tolist()} has duplicates")
    return np.sort(idx)


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``A = U diag(s) V^T``; ``V`` holds right singular vectors as columns."""

    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray
    rank: int

    def reconstruct(self):
        return (self.U * self.singular_values) @ self.V.T


def numerical_rank(singular_values, rank_tol=RANK_TOL):
    s = np.asarray(singular_values)
    if s.size == 0 or s[0] <= 0:
        return 0
    return int(np.count_nonzero(s > rank_tol * s[0]))


def svd(a, rank_tol=RANK_TOL):
    a = as_matrix(a)
    if not rank_tol > 0:
        raise ValidationError(f"rank_tol must be positive, got {rank_tol}")
    try:
        U, s, Vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(a.shape, exc) from exc
    return SvdResult(U=U, singular_values=s, V=Vt.T, rank=numerical_rank(s, rank_tol))


def column_norms(a):
    return np.sqrt(np.einsum("ij,ij->j", a, a))


def normalize_columns(a):
    a = as_matrix(a)
    norms = column_norms(a)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ZeroColumnError(zero[0])
    return a / norms


def mutual_coherence(a, skip_zero_columns=False, zero_tol=0.0):
    """Largest absolute cosine between two distinct columns of ``a``.

    A zero column makes the quantity undefined and raises ``ZeroColumnError``
    unless ``skip_zero_columns`` is set, in which case columns with norm
    ``<= zero_tol`` are dropped first.
    """
    a = as_matrix(a)
    norms = column_norms(a)
    if skip_zero_columns:
        keep = norms > zero_tol
        a, norms = a[:, keep], norms[keep]
    else:
        zero = np.flatnonzero(norms == 0)
        if zero.size:
            raise ZeroColumnError(zero[0])
    if a.shape[1] < 2:
        if skip_zero_columns:
            return 0.0
        raise DimensionError("mutual coherence needs at least two columns")
    g = a / norms
    gram = np.abs(g.T @ g)
    np.fill_diagonal(gram, 0.0)
    return float(min(1.0, max(0.0, gram.max())))


def _full_rank_qr(sub, rank_tol):
    q, r = np.linalg.qr(sub)
    d = np.abs(np.diag(r))
    if d.size and (d.max() == 0 or d.min() <= rank_tol * d.max()):
        raise RankDeficiencyError(
            f"selected columns are numerically dependent (|R_jj| ratio {d.min() / max(d.max(), 1e-300):.3g})"
        )
    return q, r


def least_squares_on_support(phi, y, support, rank_tol=RANK_TOL):
    """Coefficients ``pinv(Phi_S) y`` computed through a QR factorization of ``Phi_S``."""
    phi = as_matrix(phi, "Phi")
    y = as_vector(y, phi.shape[0], "y")
    support = as_index_set(support, phi.shape[1])
    if support.size == 0:
        return np.zeros(0)
    if support.size > phi.shape[0]:
        raise RankDeficiencyError(
            f"{support.size} columns cannot be independent in dimension {phi.shape[0]}"
        )
    q, r = _full_rank_qr(phi[:, support], rank_tol)
    return np.linalg.solve(r, q.T @ y)


def project_orthogonal_complement(phi, support, v, rank_tol=RANK_TOL):
    phi = as_matrix(phi, "Phi")
    v = as_vector(v, phi.shape[0], "v")
    support = as_index_set(support, phi.shape[1])
    if support.size == 0:
        return v.copy()
    if support.size > phi.shape[0]:
        raise RankDeficiencyError(
            f"{support.size} columns cannot be independent in dimension {phi.shape[0]}"
        )
    q, _ = _full_rank_qr(phi[:, support], rank_tol)
    out = v - q @ (q.T @ v)
    # second pass keeps the result orthogonal to working precision
    return out - q @ (q.T @ out)


def frobenius_distance_to_identity(a):
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got {a.shape}")
    return float(np.linalg.norm(a - np.eye(a.shape[0]), "fro"))
