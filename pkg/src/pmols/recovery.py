"""Greedy sparse solvers: mOLS, preconditioned mOLS (PmOLS) and OMP.

The solvers share one loop. Each iteration scores every unselected column,
adds the ``s`` best to the support, and deflates the residual against an
orthonormal basis of the selected columns. The basis is grown one column
at a time (Gram-Schmidt with a second orthogonalisation pass), and the
matrix of columns projected onto the orthogonal complement of the current
support is kept up to date, so the orthogonal-least-squares score
``|<phi_i, r>| / ||P_perp phi_i||`` costs one matrix-vector product.

Ties in any ranking are broken by the lowest column index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np

from .errors import DomainError, ExhaustionError, RankDeficiencyError, ValidationError
from .linalg import (
    RANK_TOL,
    as_index_set,
    as_matrix,
    as_vector,
    column_norms,
    least_squares_on_support,
)
from .precondition import ProbabilityBound, SensingSystem, apply, modified_pip, pip_preconditioner

DEFAULT_REL_TOL = 1e-6
DROP_TOL = 1e-12


class Termination(str, Enum):
    RESIDUAL_TOLERANCE = "residual_tolerance"
    ITERATION_CAP = "iteration_cap"
    RANK_FAILURE = "rank_failure"


@dataclass(frozen=True)
class SparseSignal:
    values: np.ndarray
    support: np.ndarray

    def __post_init__(self):
        nz = np.flatnonzero(self.values)
        if not np.array_equal(nz, np.sort(self.support)):
            raise ValidationError("support does not match the nonzero pattern of values")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def K(self):
        return int(self.support.size)


@dataclass
class RecoveryResult:
    x_hat: np.ndarray
    support: np.ndarray
    residual_norms: list
    iterations: int
    termination: Termination
    selection_order: list = field(default_factory=list)


@dataclass(frozen=True)
class SolverParams:
    """Solver knobs.

    ``tol`` is an absolute residual tolerance; ``None`` means
    ``1e-6 * ||y||``. ``max_iters`` overrides the default iteration cap
    ``floor(min(K, m / K))``. With ``enforce_selection_bound`` the entry check
    ``s <= min(K, floor(m / K))`` is applied; switch it off to run sweeps
    past the point where the bound stops holding.
    """

    K: int
    s: int = 1
    tol: Optional[float] = None
    max_iters: Optional[int] = None
    enforce_selection_bound: bool = True

    def validate(self, m):
        if self.K < 1:
            raise DomainError(f"K must be >= 1, got {self.K}")
        if self.s < 1 or self.s > self.K:
            raise DomainError(f"need 1 <= s <= K, got s={self.s}, K={self.K}")
        if self.enforce_selection_bound and self.s > m // self.K:
            raise DomainError(
                f"s={self.s} exceeds floor(m/K)={m // self.K} (m={m}, K={self.K})"
            )
        if self.tol is not None and not self.tol >= 0:
            raise DomainError(f"tol must be nonnegative, got {self.tol}")
        if self.max_iters is not None and self.max_iters < 0:
            raise DomainError(f"max_iters must be nonnegative, got {self.max_iters}")


def default_iteration_cap(K, m):
    """The loop guard ``k < min(K, m/K)`` read literally."""
    return int(math.floor(min(K, m / K)))


def _rank(scores, eligible):
    """Eligible indices ordered by descending score, lowest index first on ties."""
    idx = np.flatnonzero(eligible)
    order = np.lexsort((idx, -scores[idx]))
    return idx[order]


def _eligible(proj_norms, col_norms, excluded):
    ok = proj_norms > DROP_TOL * col_norms
    ok[excluded] = False
    return ok


def selection_scores(phi, r, support=()):
    """OLS scores ``|<phi_i, r>| / ||P_perp_S phi_i||`` and the eligibility mask."""
    phi = as_matrix(phi, "Phi")
    r = as_vector(r, phi.shape[0], "r")
    support = as_index_set(support, phi.shape[1])
    proj = phi
    if support.size:
        if support.size > phi.shape[0]:
            raise RankDeficiencyError("support larger than the ambient dimension")
        q, rr = np.linalg.qr(phi[:, support])
        d = np.abs(np.diag(rr))
        if d.min() <= RANK_TOL * d.max():
            raise RankDeficiencyError("selected columns are numerically dependent")
        proj = phi - q @ (q.T @ phi)
        proj = proj - q @ (q.T @ proj)
    pn = column_norms(proj)
    ok = _eligible(pn, column_norms(phi), support)
    scores = np.zeros(phi.shape[1])
    scores[ok] = np.abs(phi[:, ok].T @ r) / pn[ok]
    return scores, ok


def select_indices(system, r, support, s):
    """The ``s`` unselected columns with the largest OLS scores, as a sorted index set.

    ``system`` may be a ``SensingSystem`` (its effective matrix is used) or a
    bare matrix.
    """
    phi = system.phi if isinstance(system, SensingSystem) else system
    scores, ok = selection_scores(phi, r, support)
    ranked = _rank(scores, ok)
    if ranked.size < s:
        raise ExhaustionError(f"only {ranked.size} admissible columns left, need {s}")
    return np.sort(ranked[:s])


def _prune(x, selected, K):
    n = x.shape[0]
    in_sel = np.zeros(n, dtype=bool)
    in_sel[selected] = True
    # magnitude first, then already-selected columns, then lowest index
    order = np.lexsort((np.arange(n), ~in_sel, -np.abs(x)))
    return np.sort(order[:K])


def _greedy(phi, y, K, s, tol, cap, normalized):
    m, n = phi.shape
    col_norms = column_norms(phi)
    proj = phi.copy()
    basis = np.empty((m, 0))
    r = y.copy()
    selected = []
    excluded = np.zeros(n, dtype=bool)
    norms = [float(np.linalg.norm(r))]
    k = 0
    termination = None

    while termination is None:
        if norms[-1] <= tol:
            termination = Termination.RESIDUAL_TOLERANCE
            break
        if k >= cap:
            termination = Termination.ITERATION_CAP
            break
        pn = column_norms(proj)
        ok = _eligible(pn, col_norms, excluded)
        corr = np.abs(phi.T @ r)
        if normalized:
            scores = np.where(ok, corr / np.where(ok, pn, 1.0), 0.0)
        else:
            scores = np.where(ok, corr, 0.0)
        ranked = _rank(scores, ok)
        if ranked.size < s:
            termination = Termination.RANK_FAILURE
            break
        new = ranked[:s]
        for i in new:
            v = proj[:, i].copy()
            if basis.shape[1]:
                v -= basis @ (basis.T @ v)
            nv = np.linalg.norm(v)
            if nv <= DROP_TOL * col_norms[i]:
                termination = Termination.RANK_FAILURE
                break
            v /= nv
            basis = np.column_stack((basis, v))
            proj -= np.outer(v, v @ proj)
            r -= v * (v @ r)
            selected.append(int(i))
            excluded[i] = True
        k += 1
        norms.append(float(np.linalg.norm(r)))

    x = np.zeros(n)
    sel = np.array(sorted(selected), dtype=np.int64)
    if sel.size:
        try:
            x[sel] = least_squares_on_support(phi, y, sel)
        except RankDeficiencyError:
            termination = Termination.RANK_FAILURE
            x[sel] = np.linalg.lstsq(phi[:, sel], y, rcond=None)[0]
    support = _prune(x, sel, min(K, n))
    x_hat = np.zeros(n)
    if norms[0] > 0:
        try:
            x_hat[support] = least_squares_on_support(phi, y, support)
        except RankDeficiencyError:
            termination = Termination.RANK_FAILURE
            x_hat[support] = x[support]
    return RecoveryResult(
        x_hat=x_hat,
        support=support,
        residual_norms=norms,
        iterations=k,
        termination=termination,
        selection_order=selected,
    )


def _resolve(params, y, m):
    tol = params.tol if params.tol is not None else DEFAULT_REL_TOL * float(np.linalg.norm(y))
    cap = params.max_iters if params.max_iters is not None else default_iteration_cap(params.K, m)
    return tol, cap


def mols(phi, y, params):
    """Multiple orthogonal least squares on ``y = phi x``.

    Selects ``params.s`` columns per iteration until the residual drops to the
    tolerance or the iteration cap is hit, then keeps the ``K`` largest
    entries of the least-squares estimate and re-fits on them.
    """
    phi = as_matrix(phi, "Phi")
    y = as_vector(y, phi.shape[0], "y")
    params.validate(phi.shape[0])
    tol, cap = _resolve(params, y, phi.shape[0])
    return _greedy(phi, y, params.K, params.s, tol, cap, normalized=True)


def build_system(psi, y0, mode="pip", lam=None):
    if mode == "pip":
        return apply(pip_preconditioner(psi), psi, y0)
    if mode == "modified_pip":
        if lam is None:
            raise ValidationError("modified_pip mode needs lam")
        return apply(modified_pip(psi, lam), psi, y0)
    if mode in (None, "none"):
        return apply(None, psi, y0)
    raise ValidationError(f"unknown precondition mode {mode!r}")


def pmols(psi, y0, params, mode="pip", lam=None):
    """Precondition ``(psi, y0)`` and run mOLS on the preconditioned pair.

    Parameter validation and the default iteration cap use the row count of
    the original sampling matrix.
    """
    psi = as_matrix(psi, "Psi")
    y0 = as_vector(y0, psi.shape[0], "y0")
    m = psi.shape[0]
    params.validate(m)
    system = build_system(psi, y0, mode, lam)
    if params.max_iters is None:
        params = replace(params, max_iters=default_iteration_cap(params.K, m))
    tol, cap = _resolve(params, system.y, m)
    return _greedy(system.phi, system.y, params.K, params.s, tol, cap, normalized=True)


def omp(phi, y, K, tol=None, max_iters=None):
    """Orthogonal matching pursuit: plain correlation selection, one index per step."""
    phi = as_matrix(phi, "Phi")
    y = as_vector(y, phi.shape[0], "y")
    params = SolverParams(K=K, s=1, tol=tol, max_iters=max_iters, enforce_selection_bound=False)
    params.validate(phi.shape[0])
    tol, cap = _resolve(params, y, phi.shape[0])
    return _greedy(phi, y, K, 1, tol, cap, normalized=False)


def coherence_threshold(K, s):
    return 1.0 / (2 * s * K - 2 * s + 1)


def coherence_recovery_condition(mu, K, s):
    """Whether ``mu < 1 / (2sK - 2s + 1)``, the coherence condition for exact mOLS recovery."""
    if K < 1 or not 1 <= s <= K:
        raise DomainError(f"need K >= 1 and 1 <= s <= K, got K={K}, s={s}")
    if not 0 <= mu <= 1:
        raise DomainError(f"mu must lie in [0, 1], got {mu}")
    return mu < coherence_threshold(K, s)


def recovery_probability_bound(n, m, K, s):
    """``1 - 3 n^2 exp(-m / (72 (2Ks - 2s + 1)^2))`` (raw and clamped)."""
    if not 0 < m < n:
        raise DomainError(f"need 0 < m < n, got m={m}, n={n}")
    if K < 1 or not 1 <= s <= K or s > m / K:
        raise DomainError(f"need 1 <= s <= min(K, m/K), got s={s}, K={K}, m={m}")
    raw = 1.0 - 3.0 * n * n * math.exp(-m / (72.0 * (2 * K * s - 2 * s + 1) ** 2))
    return ProbabilityBound(raw=raw, value=min(1.0, max(0.0, raw)))


def sample_complexity(n, K, eps, c):
    """Smallest integer ``m >= c K^2 ln(n / eps)``."""
    if not c > 0:
        raise DomainError(f"c must be positive, got {c}")
    if not 0 < eps <= n:
        raise DomainError(f"eps must lie in (0, n], got {eps}")
    if K < 0:
        raise DomainError(f"K must be nonnegative, got {K}")
    return max(0, int(math.ceil(c * K * K * math.log(n / eps))))

