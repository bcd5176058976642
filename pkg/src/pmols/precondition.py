"""Pseudo-inverse preconditioning (PIP) and its ridge-regularised variant.

For a sampling matrix ``psi`` (m x n) the PIP preconditioner is the
Moore-Penrose pseudo-inverse, which minimises ``||P psi - I||_F``. All rank
cases are built from one SVD so there is a single numerical code path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import DegenerateInputError, DimensionError, DomainError, SingularityError
from .linalg import RANK_TOL, as_matrix, as_vector, svd

PIP = "pip"
MODIFIED_PIP = "modified_pip"


@dataclass(frozen=True)
class Preconditioner:
    P: np.ndarray
    method: str
    source_rank: int
    lam: Optional[float] = None
    nu_m: Optional[float] = None

    @property
    def source_shape(self):
        n, m = self.P.shape
        return m, n


@dataclass(frozen=True)
class SensingSystem:
    """A sampling matrix, its samples and the effective recovery pair ``(phi, y)``."""

    psi: np.ndarray
    phi: np.ndarray
    y0: np.ndarray
    y: np.ndarray
    preconditioner: Optional[Preconditioner] = None

    @property
    def n(self):
        return self.phi.shape[1]


def nu_m(singular_values, m):
    """``(s1^2 - sm^2) / (s1^2 + sm^2)``, or ``None`` when ``sm`` is missing or zero."""
    s = np.asarray(singular_values, dtype=float)
    if m < 1 or s.size < m or s[m - 1] <= 0:
        return None
    a, b = s[0] ** 2, s[m - 1] ** 2
    return float((a - b) / (a + b))


def pip_preconditioner(psi, rank_tol=RANK_TOL):
    psi = as_matrix(psi, "Psi")
    m, n = psi.shape
    dec = svd(psi, rank_tol)
    r = dec.rank
    if r == 0:
        raise DegenerateInputError("cannot precondition the zero matrix")
    # V_r diag(1/s) U_r^T covers the full-row, full-column and deficient cases alike
    P = (dec.V[:, :r] / dec.singular_values[:r]) @ dec.U[:, :r].T
    nu = nu_m(dec.singular_values, m) if m <= n and r == m else None
    return Preconditioner(P=P, method=PIP, source_rank=r, nu_m=nu)


def modified_pip(psi, lam, rank_tol=RANK_TOL):
    """Ridge-regularised PIP: ``psi^T (psi psi^T + lam I)^-1`` for ``m <= n``."""
    psi = as_matrix(psi, "Psi")
    m, n = psi.shape
    if m > n:
        raise DimensionError(f"modified PIP expects m <= n, got {m}x{n}")
    lam = float(lam)
    if not lam >= 0 or not math.isfinite(lam):
        raise DomainError(f"lambda must be a finite nonnegative number, got {lam}")
    dec = svd(psi, rank_tol)
    s = dec.singular_values
    if lam == 0 and dec.rank < m:
        raise SingularityError(
            "psi psi^T is singular at lambda = 0; use pip_preconditioner instead"
        )
    # psi^T (psi psi^T + lam I)^-1 = V diag(s / (s^2 + lam)) U^T with thin factors (m <= n)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(s > 0, s / (s * s + lam), 0.0)
    P = (dec.V * w) @ dec.U.T
    nu = nu_m(s, m) if dec.rank == m else None
    return Preconditioner(P=P, method=MODIFIED_PIP, source_rank=dec.rank, lam=lam, nu_m=nu)


def apply(preconditioner, psi, y0):
    psi = as_matrix(psi, "Psi")
    y0 = as_vector(y0, psi.shape[0], "y0")
    if preconditioner is None:
        return SensingSystem(psi=psi, phi=psi, y0=y0, y=y0, preconditioner=None)
    P = preconditioner.P
    if P.shape != (psi.shape[1], psi.shape[0]):
        raise DimensionError(
            f"preconditioner of shape {P.shape} does not fit a {psi.shape} sampling matrix"
        )
    return SensingSystem(psi=psi, phi=P @ psi, y0=y0, y=P @ y0, preconditioner=preconditioner)


class ProbabilityBound(NamedTuple):
    raw: float
    value: float


def _bound(raw):
    return ProbabilityBound(raw=raw, value=min(1.0, max(0.0, raw)))


def coherence_probability_bound(n, m, eta):
    """Lower bound on ``Pr(mu(P psi) <= eta)`` for Gaussian ``psi`` with N(0, 1/m) entries.

    The bound is ``1 - 3 n^2 exp(-m eta^2 / 72)``; ``value`` is clamped to [0, 1]
    while ``raw`` keeps the (often very negative) unclamped number.
    """
    if not 0 < eta < 1:
        raise DomainError(f"eta must lie in (0, 1), got {eta}")
    if not 0 < m < n:
        raise DomainError(f"need 0 < m < n, got m={m}, n={n}")
    return _bound(1.0 - 3.0 * n * n * math.exp(-m * eta * eta / 72.0))


@dataclass(frozen=True)
class ParsevalReport:
    is_parseval_projector: bool
    max_deviation: float


def parseval_check(phi, tol=1e-8):
    """Check ``phi^T phi == phi`` and ``phi == phi^T`` entrywise within ``tol``."""
    phi = as_matrix(phi, "Phi")
    if phi.shape[0] != phi.shape[1]:
        raise DimensionError(f"expected a square matrix, got {phi.shape}")
    dev = max(np.abs(phi.T @ phi - phi).max(), np.abs(phi - phi.T).max())
    return ParsevalReport(is_parseval_projector=bool(dev <= tol), max_deviation=float(dev))


@dataclass(frozen=True)
class IdempotenceReport:
    passed: bool
    max_deviation: float


def pip_idempotence_check(psi, tol=1e-8, rank_tol=RANK_TOL):
    """Precondition twice and confirm the second pass leaves ``P psi`` unchanged."""
    psi = as_matrix(psi, "Psi")
    m, n = psi.shape
    if not m < n:
        raise DimensionError(f"idempotence check expects m < n, got {m}x{n}")
    phi = pip_preconditioner(psi, rank_tol).P @ psi
    again = pip_preconditioner(phi, rank_tol).P @ phi
    dev = float(np.abs(again - phi).max())
    return IdempotenceReport(passed=dev <= tol, max_deviation=dev)


@dataclass(frozen=True)
class OptimalityReport:
    distance: float
    expected: Optional[float]
    worst_margin: float
    perturbations: int


def pip_optimality_probe(psi, perturbations=1000, eps=1e-3, seed=0):
    """Compare ``||P psi - I||_F`` against random perturbations ``P + eps * D``.

    Each ``D`` is a Gaussian direction scaled to unit Frobenius norm.
    ``worst_margin`` is the smallest perturbed distance minus the unperturbed
    one, so a negative value would mean some perturbation beat ``P``. For a
    wide full-row-rank ``psi`` the distance should be ``sqrt(n - m)``, reported
    as ``expected``; otherwise ``expected`` is ``None``.
    """
    psi = as_matrix(psi, "Psi")
    m, n = psi.shape
    pre = pip_preconditioner(psi)
    I = np.eye(n)
    base = float(np.linalg.norm(pre.P @ psi - I, "fro"))
    rng = np.random.default_rng(seed)
    worst = math.inf
    for _ in range(perturbations):
        D = rng.standard_normal(pre.P.shape)
        D /= np.linalg.norm(D, "fro")
        worst = min(worst, float(np.linalg.norm((pre.P + eps * D) @ psi - I, "fro")) - base)
    expected = math.sqrt(n - m) if m < n and pre.source_rank == m else None
    return OptimalityReport(distance=base, expected=expected, worst_margin=worst, perturbations=perturbations)
