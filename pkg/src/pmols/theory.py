"""Numerical checks of the inequalities the recovery guarantees rest on.

Each check evaluates one inequality (or a small group of them) on concrete
instances and returns a ``CheckReport``. Margins are signed slack: the side
that should be larger minus the side that should be smaller, so a negative
margin below ``-tol`` is a violation. Checks whose hypotheses fail on an
instance (an RIP constant of 1 or more, say) count it as skipped rather than
violated.

The ``*_family`` functions run each check on the seeded instance families
used by the test suite and the ``check`` CLI subcommand.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BudgetError,
    DimensionError,
    DomainError,
    ExhaustionError,
    NotPositiveDefiniteError,
    OverlapError,
    RankDeficiencyError,
    ValidationError,
)
from .experiments import binomial_se, derive_seed, gen_gaussian_matrix
from .linalg import (
    as_index_set,
    as_matrix,
    column_norms,
    mutual_coherence,
    normalize_columns,
    project_orthogonal_complement,
)
from .precondition import parseval_check, pip_idempotence_check, pip_optimality_probe, pip_preconditioner

DEFAULT_TOL = 1e-10
RIP_BUDGET = 100_000
UNIT_TOL = 1e-10
ZERO_COLUMN_TOL = 1e-12
PD_RATIO = 1e-10


@dataclass(frozen=True)
class CheckReport:
    name: str
    instances_tested: int
    violations: int
    worst_margin: float
    skipped: int = 0
    tolerance: float = DEFAULT_TOL

    @property
    def passed(self):
        return self.violations == 0

    def as_row(self):
        return {
            "name": self.name,
            "instances_tested": self.instances_tested,
            "violations": self.violations,
            "worst_margin": self.worst_margin,
            "skipped": self.skipped,
            "tolerance": self.tolerance,
        }


REPORT_FIELDS = ["name", "instances_tested", "violations", "worst_margin", "skipped", "tolerance"]


def _report(name, margins, tol, skipped=0):
    margins = np.asarray(margins, dtype=float).ravel()
    worst = float(margins.min()) if margins.size else math.inf
    return CheckReport(
        name=name,
        instances_tested=int(margins.size),
        violations=int(np.count_nonzero(margins < -tol)),
        worst_margin=worst,
        skipped=int(skipped),
        tolerance=tol,
    )


def merge_reports(name, reports):
    """Pool several reports of one check into a single report."""
    reports = list(reports)
    tested = sum(r.instances_tested for r in reports)
    worst = min((r.worst_margin for r in reports), default=math.inf)
    return CheckReport(
        name=name,
        instances_tested=tested,
        violations=sum(r.violations for r in reports),
        worst_margin=worst,
        skipped=sum(r.skipped for r in reports),
        tolerance=max((r.tolerance for r in reports), default=DEFAULT_TOL),
    )


def _require_unit_columns(phi):
    dev = np.abs(column_norms(phi) - 1.0).max()
    if dev > UNIT_TOL:
        raise ValidationError(f"columns must have unit l2-norm (max deviation {dev:.3g})")


# --- restricted isometry constant ----------------------------------------------


def brute_force_rip_constant(phi, k, budget=RIP_BUDGET, chunk=4096):
    """``delta_k`` by enumerating every size-``k`` support.

    For each support the extreme eigenvalues of the Gram matrix give how far
    ``||phi_S x||^2 / ||x||^2`` strays from 1; the constant is the worst case.
    """
    phi = as_matrix(phi, "Phi")
    n = phi.shape[1]
    if not 0 <= k <= n:
        raise DomainError(f"need 0 <= k <= n, got k={k}, n={n}")
    count = math.comb(n, k)
    if count > budget:
        raise BudgetError(n, k, count, budget)
    if k == 0:
        return 0.0
    gram = phi.T @ phi
    combos = itertools.combinations(range(n), k)
    delta = 0.0
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        sub = gram[block[:, :, None], block[:, None, :]]
        ev = np.linalg.eigvalsh(sub)
        delta = max(delta, float(np.max(ev[:, -1] - 1.0)), float(np.max(1.0 - ev[:, 0])))
    return delta


# --- RIP consequences -----------------------------------------------------------


def check_rip_consequences(phi, S, u, tol=DEFAULT_TOL, delta=None):
    """Check the coherence bound on ``delta_|S|`` and the norm bounds on the
    Gram matrix of ``phi_S``, its inverse and the transposed pseudo-inverse.

    ``u`` may be one vector of length ``|S|`` or a stack of them (rows). All
    inequalities are homogeneous, so each ``u`` is scaled to unit length and
    the margins are on that scale. ``phi`` must have unit columns. When
    ``delta_|S| >= 1`` the bounds do not apply and every ``u`` is skipped.
    """
    phi = as_matrix(phi, "Phi")
    _require_unit_columns(phi)
    S = as_index_set(S, phi.shape[1])
    k = S.size
    if k == 0:
        raise DomainError("S must be non-empty")
    U = np.atleast_2d(np.asarray(u, dtype=float))
    if U.shape[1] != k:
        raise DimensionError(f"u has length {U.shape[1]}, expected |S| = {k}")
    if delta is None:
        delta = brute_force_rip_constant(phi, k)
    if delta >= 1:
        return _report("rip_consequences", [], tol, skipped=U.shape[0])
    mu = mutual_coherence(phi) if phi.shape[1] > 1 else 0.0
    coherence_margin = (k - 1) * mu - delta

    sub = phi[:, S]
    gram = sub.T @ sub
    gram_inv = np.linalg.inv(gram)
    pinv_t = sub @ gram_inv  # (phi_S^+)^T
    margins = []
    for row in U:
        nrm = np.linalg.norm(row)
        if nrm == 0:
            margins.append(coherence_margin)
            continue
        x = row / nrm
        a = np.linalg.norm(gram_inv @ x)
        b = np.linalg.norm(gram @ x)
        c = float(np.linalg.norm(pinv_t @ x) ** 2)
        margins.append(
            min(
                coherence_margin,
                a - 1.0 / (1.0 + delta),
                1.0 / (1.0 - delta) - a,
                b - (1.0 - delta),
                (1.0 + delta) - b,
                1.0 - (1.0 - delta) * c,
                (1.0 + delta) * c - 1.0,
            )
        )
    return _report("rip_consequences", margins, tol)


# --- generalised Wielandt inequality ------------------------------------------------


def _check_pd(A):
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"A must be square, got {A.shape}")
    scale = max(np.abs(A).max(), 1e-300)
    if np.abs(A - A.T).max() > 1e-12 * scale:
        raise NotPositiveDefiniteError("A is not symmetric")
    ev = np.linalg.eigvalsh(A)
    if not ev[-1] > 0 or ev[0] <= PD_RATIO * ev[-1]:
        raise NotPositiveDefiniteError(
            f"A is not positive definite (eigenvalue range [{ev[0]:.3g}, {ev[-1]:.3g}])"
        )
    return A, float(ev[-1]), float(ev[0])


def check_wielandt(A, u, v, tol=DEFAULT_TOL):
    """``|u'Av|^2 <= ((l1 - ln + (l1 + ln) phi) / (l1 + ln + (l1 - ln) phi))^2 (u'Au)(v'Av)``.

    ``phi`` is the absolute cosine between ``u`` and ``v``. ``u`` and ``v`` may
    be single vectors or equally long stacks of rows. Vectors are scaled to unit
    length and margins are divided by ``l1^2`` so ``tol`` is relative.
    """
    A, l1, ln = _check_pd(A)
    U = np.atleast_2d(np.asarray(u, dtype=float))
    V = np.atleast_2d(np.asarray(v, dtype=float))
    if U.shape != V.shape or U.shape[1] != A.shape[0]:
        raise DimensionError(f"u, v stacks {U.shape} and {V.shape} do not fit A {A.shape}")
    nu, nv = np.linalg.norm(U, axis=1), np.linalg.norm(V, axis=1)
    if np.any(nu == 0) or np.any(nv == 0):
        raise DomainError("u and v must be nonzero")
    U, V = U / nu[:, None], V / nv[:, None]
    cos = np.clip(np.abs(np.einsum("ij,ij->i", U, V)), 0.0, 1.0)
    factor = (l1 - ln + (l1 + ln) * cos) / (l1 + ln + (l1 - ln) * cos)
    AU, AV = U @ A, V @ A
    lhs = np.einsum("ij,ij->i", AU, V) ** 2
    rhs = factor**2 * np.einsum("ij,ij->i", AU, U) * np.einsum("ij,ij->i", AV, V)
    return _report("wielandt", (rhs - lhs) / (l1 * l1), tol)


# --- cross-Gram bound --------------------------------------------------------------


def _cross_gram_margin(phi_unit, mu, I1, I2):
    if I1.size == 0 or I2.size == 0:
        return 0.0 if mu is None else math.sqrt(I1.size * I2.size) * mu
    block = phi_unit[:, I1].T @ phi_unit[:, I2]
    lhs = float(np.linalg.svd(block, compute_uv=False)[0])
    return math.sqrt(I1.size * I2.size) * mu - lhs


def check_cross_gram_bound(phi, I1, I2, tol=DEFAULT_TOL):
    """``||phi_I1' phi_I2||_2 <= sqrt(|I1| |I2|) mu(phi)`` for disjoint ``I1``, ``I2``.

    Columns are normalised first, since the bound is stated for coherence of
    unit-norm columns.
    """
    phi = normalize_columns(as_matrix(phi, "Phi"))
    I1 = as_index_set(I1, phi.shape[1])
    I2 = as_index_set(I2, phi.shape[1])
    both = np.intersect1d(I1, I2)
    if both.size:
        raise OverlapError(f"index sets overlap at {both.tolist()}")
    mu = mutual_coherence(phi) if phi.shape[1] > 1 else 0.0
    return _report("cross_gram_bound", [_cross_gram_margin(phi, mu, I1, I2)], tol)


# --- projection lower bound ----------------------------------------------------------


def check_projection_bound(phi, S, i, tol=DEFAULT_TOL, delta=None):
    """``||P_perp_S phi_i|| >= sqrt(1 - delta_{|S|+1}^2)`` for every ``i`` outside ``S``.

    ``i`` may be one column index or a sequence of them. ``phi`` must have unit
    columns. When ``delta_{|S|+1} >= 1`` the bound is void and the instances
    are skipped.
    """
    phi = as_matrix(phi, "Phi")
    _require_unit_columns(phi)
    S = as_index_set(S, phi.shape[1])
    idx = np.atleast_1d(np.asarray(i, dtype=np.int64))
    if idx.size and (idx.min() < 0 or idx.max() >= phi.shape[1]):
        raise ValidationError(f"column index out of range [0, {phi.shape[1]})")
    inside = np.intersect1d(idx, S)
    if inside.size:
        raise OverlapError(f"index {int(inside[0])} already belongs to S")
    if delta is None:
        delta = brute_force_rip_constant(phi, S.size + 1)
    if delta >= 1:
        return _report("projection_bound", [], tol, skipped=idx.size)
    rhs = math.sqrt(1.0 - delta * delta)
    margins = []
    for j in idx:
        lhs = float(np.linalg.norm(project_orthogonal_complement(phi, S, phi[:, j])))
        margins.append(lhs - rhs)
    return _report("projection_bound", margins, tol)


# --- singular value concentration -------------------------------------------------------


def check_singular_concentration(m, n, eps, trials, seed, se_factor=3.0):
    """Tail frequencies of the extreme singular values of Gaussian matrices.

    Draws ``trials`` matrices with N(0, 1/m) entries and counts how often
    ``s_1 >= sqrt(n/m) + 1 + eps`` and ``s_m <= sqrt(n/m) - 1 - eps``. Each
    frequency must stay below ``exp(-m eps^2 / 2)`` plus ``se_factor`` binomial
    standard errors. The two tails are the two instances; the ordering
    ``s_1 >= s_m`` is checked on every draw as well.
    """
    if not 1 <= m <= n:
        raise DomainError(f"need 1 <= m <= n, got m={m}, n={n}")
    if trials < 100:
        raise DomainError(f"need at least 100 trials, got {trials}")
    if not eps >= 0:
        raise DomainError(f"eps must be nonnegative, got {eps}")
    centre = math.sqrt(n / m)
    upper = lower = 0
    order_ok = True
    for t in range(trials):
        psi = gen_gaussian_matrix(m, n, derive_seed(seed, "singular", m, n, t))
        s = np.linalg.svd(psi, compute_uv=False)
        upper += s[0] >= centre + 1.0 + eps
        lower += s[m - 1] <= centre - 1.0 - eps
        order_ok &= bool(s[0] >= s[m - 1])
    bound = math.exp(-m * eps * eps / 2.0)
    limit = bound + se_factor * binomial_se(bound, trials)
    margins = [limit - upper / trials, limit - lower / trials]
    if not order_ok:
        margins.append(-1.0)
    return _report("singular_concentration", margins, 0.0)


# --- coherence before and after preconditioning -------------------------------------------


def check_coherence_chain(psi, tol=DEFAULT_TOL):
    """``mu(P psi) <= (nu + mu) / (1 + nu mu) <= nu + mu`` with ``mu = mu(psi)``.

    ``psi`` must be wide with full row rank. Columns with norm at most 1e-12
    are left out of both coherences.
    """
    psi = as_matrix(psi, "Psi")
    m, n = psi.shape
    if not m < n:
        raise DimensionError(f"expected m < n, got {m}x{n}")
    pre = pip_preconditioner(psi)
    if pre.source_rank < m:
        raise RankDeficiencyError(f"psi has rank {pre.source_rank} < m = {m}")
    nu = pre.nu_m
    mu = mutual_coherence(psi, skip_zero_columns=True, zero_tol=ZERO_COLUMN_TOL)
    mu_p = mutual_coherence(pre.P @ psi, skip_zero_columns=True, zero_tol=ZERO_COLUMN_TOL)
    mid = (nu + mu) / (1.0 + nu * mu)
    return _report("coherence_chain", [min(mid - mu_p, nu + mu - mid)], tol)


# --- seeded instance families ------------------------------------------------------------


def _rng(seed, *labels):
    return np.random.default_rng(derive_seed(seed, *labels))


def _unit_gaussian(m, n, rng):
    return normalize_columns(rng.standard_normal((m, n)))


def conditioned_unit_matrix(seed, label, order, m=8, n=12, attempts=200):
    """First seeded PIP-conditioned, column-normalised ``m x n`` draw with ``delta_order < 1``.

    Plain Gaussian matrices this small are too coherent for the RIP-based
    inequalities to apply at orders 3 and 4; conditioning fixes that for most draws.
    Returns the matrix and its RIP constant.
    """
    for attempt in range(attempts):
        rng = _rng(seed, label, attempt)
        psi = rng.standard_normal((m, n))
        phi = normalize_columns(pip_preconditioner(psi).P @ psi)
        delta = brute_force_rip_constant(phi, order)
        if delta < 1:
            return phi, delta
    raise ExhaustionError(f"no draw with delta_{order} < 1 in {attempts} attempts")


def wielandt_family(seed=0, pairs=1000):
    """Random 5x5 positive definite ``A`` with random pairs, plus collinear pairs."""
    rng = _rng(seed, "wielandt")
    B = rng.standard_normal((5, 5))
    A = B @ B.T + 0.1 * np.eye(5)
    U = rng.standard_normal((pairs, 5))
    V = rng.standard_normal((pairs, 5))
    W = rng.standard_normal((10, 5))
    return merge_reports("wielandt", [check_wielandt(A, U, V), check_wielandt(A, W, -2.0 * W)])


def cross_gram_family(seed=0, pairs=100):
    """Random normalised 10x20 matrix, random disjoint pairs of sizes 1 to 5."""
    rng = _rng(seed, "cross_gram")
    phi = _unit_gaussian(10, 20, rng)
    mu = mutual_coherence(phi)
    margins = []
    for _ in range(pairs):
        a, b = rng.integers(1, 6, size=2)
        perm = rng.permutation(20)
        margins.append(_cross_gram_margin(phi, mu, np.sort(perm[:a]), np.sort(perm[a:a + b])))
    return _report("cross_gram_bound", margins, DEFAULT_TOL)


def projection_family(seed=0, max_support=3):
    """Conditioned 8x12 unit-column matrix, every ``S`` with ``|S| <= 3`` and every ``i`` outside it."""
    phi, _ = conditioned_unit_matrix(seed, "projection", max_support + 1)
    reports = []
    for size in range(max_support + 1):
        delta = brute_force_rip_constant(phi, size + 1)
        for S in itertools.combinations(range(12), size):
            rest = np.setdiff1d(np.arange(12), S)
            reports.append(check_projection_bound(phi, S, rest, delta=delta))
    return merge_reports("projection_bound", reports)


def rip_family(seed=0, instances=100, support=3):
    """Conditioned 8x12 unit-column matrix, random ``S`` of size 3 with one random ``u`` each."""
    phi, delta = conditioned_unit_matrix(seed, "rip", support)
    rng = _rng(seed, "rip", "instances")
    reports = []
    for _ in range(instances):
        S = np.sort(rng.choice(12, size=support, replace=False))
        reports.append(check_rip_consequences(phi, S, rng.standard_normal(support), delta=delta))
    return merge_reports("rip_consequences", reports)


def coherence_chain_family(seed=0, draws=100, m=32, n=64):
    reports = [
        check_coherence_chain(gen_gaussian_matrix(m, n, derive_seed(seed, "chain", t)))
        for t in range(draws)
    ]
    return merge_reports("coherence_chain", reports)


def singular_family(seed=0, trials=1000):
    """64x256 draws at ``eps = 0.5`` and the vacuous ``eps = 0`` case."""
    return merge_reports(
        "singular_concentration",
        [
            check_singular_concentration(64, 256, 0.5, trials, seed),
            check_singular_concentration(64, 256, 0.0, 100, seed),
        ],
    )


def _deviation_report(name, deviations, tol):
    # the margin is how far each deviation stays under the tolerance
    return _report(name, [tol - d for d in deviations], 0.0)


def parseval_family(seed=0, draws=100, shapes=((32, 64), (128, 256)), tol=1e-8):
    devs = []
    for m, n in shapes:
        for t in range(draws):
            psi = gen_gaussian_matrix(m, n, derive_seed(seed, "parseval", m, n, t))
            devs.append(parseval_check(pip_preconditioner(psi).P @ psi, tol).max_deviation)
    return _deviation_report("parseval", devs, tol)


def idempotence_family(seed=0, draws=100, shapes=((32, 64), (128, 256)), tol=1e-8):
    devs = []
    for m, n in shapes:
        for t in range(draws):
            psi = gen_gaussian_matrix(m, n, derive_seed(seed, "idempotence", m, n, t))
            devs.append(pip_idempotence_check(psi, tol).max_deviation)
    return _deviation_report("idempotence", devs, tol)


def optimality_family(seed=0, shapes=((16, 64), (32, 64), (128, 256)), perturbations=1000):
    """Frobenius distance to the identity equals ``sqrt(n - m)`` and no perturbation improves on it."""
    margins = []
    for m, n in shapes:
        psi = gen_gaussian_matrix(m, n, derive_seed(seed, "optimality", m, n))
        rep = pip_optimality_probe(psi, perturbations, seed=derive_seed(seed, "perturb", m, n))
        margins.append(1e-8 - abs(rep.distance - rep.expected))
        margins.append(rep.worst_margin + 1e-9)
    return _report("pip_optimality", margins, 0.0)


FAMILIES = {
    "wielandt": wielandt_family,
    "cross_gram_bound": cross_gram_family,
    "projection_bound": projection_family,
    "rip_consequences": rip_family,
    "coherence_chain": coherence_chain_family,
    "singular_concentration": singular_family,
    "parseval": parseval_family,
    "idempotence": idempotence_family,
    "pip_optimality": optimality_family,
}


def run_family(name, seed=0):
    if name not in FAMILIES:
        raise DomainError(f"unknown check {name!r}; choose from {', '.join(FAMILIES)}")
    return FAMILIES[name](seed)
