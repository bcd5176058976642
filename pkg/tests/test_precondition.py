import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import gaussian_matrices
from pmols.errors import DegenerateInputError, DimensionError, DomainError, SingularityError
from pmols.experiments import derive_seed, gen_gaussian_matrix
from pmols.precondition import (
    MODIFIED_PIP,
    PIP,
    apply,
    coherence_probability_bound,
    modified_pip,
    nu_m,
    parseval_check,
    pip_idempotence_check,
    pip_optimality_probe,
    pip_preconditioner,
)

DIAG = np.array([[2.0, 0, 0], [0, 1.0, 0]])


# --- PIP construction ---


def test_pip_on_diagonal_rectangle():
    pre = pip_preconditioner(DIAG)
    np.testing.assert_allclose(pre.P, [[0.5, 0], [0, 1], [0, 0]], atol=1e-15)
    np.testing.assert_allclose(pre.P @ DIAG, np.diag([1.0, 1.0, 0.0]), atol=1e-15)
    assert pre.method == PIP and pre.source_rank == 2
    assert pre.nu_m == pytest.approx(0.6)


def test_pip_square_invertible_gives_identity(rng):
    psi = rng.standard_normal((7, 7))
    assert np.abs(pip_preconditioner(psi).P @ psi - np.eye(7)).max() <= 1e-10


def test_pip_orthonormal_rows_is_transpose(rng):
    q, _ = np.linalg.qr(rng.standard_normal((9, 4)))
    psi = q.T
    np.testing.assert_allclose(pip_preconditioner(psi).P, psi.T, atol=1e-12)


def test_pip_zero_matrix_rejected():
    with pytest.raises(DegenerateInputError):
        pip_preconditioner(np.zeros((2, 3)))


@given(gaussian_matrices(max_rows=8, max_cols=12, wide=True))
def test_pip_matches_full_row_rank_formula(psi):
    P = pip_preconditioner(psi).P
    np.testing.assert_allclose(P, psi.T @ np.linalg.inv(psi @ psi.T), atol=1e-8 * max(1, np.abs(P).max()))


@given(gaussian_matrices(min_rows=4, max_rows=12, min_cols=1, max_cols=4))
def test_pip_matches_full_column_rank_formula(psi):
    assume(psi.shape[0] > psi.shape[1])
    P = pip_preconditioner(psi).P
    np.testing.assert_allclose(P, np.linalg.inv(psi.T @ psi) @ psi.T, atol=1e-8 * max(1, np.abs(P).max()))
    assert np.abs(P @ psi - np.eye(psi.shape[1])).max() <= 1e-10


@given(st.integers(2, 8), st.integers(2, 8), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_pip_rank_deficient_matches_pinv(m, n, r, seed):
    assume(r < min(m, n))
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal((m, r)) @ rng.standard_normal((r, n))
    pre = pip_preconditioner(psi)
    assert pre.source_rank == r and pre.nu_m is None
    np.testing.assert_allclose(pre.P, np.linalg.pinv(psi, rcond=1e-12), atol=1e-8)
    # P psi is the projector onto the row space: V_r V_r^T
    _, _, vt = np.linalg.svd(psi)
    np.testing.assert_allclose(pre.P @ psi, vt[:r].T @ vt[:r], atol=1e-8)


@given(gaussian_matrices(max_rows=8, max_cols=14, wide=True))
def test_pip_projector_property(psi):
    pre = pip_preconditioner(psi)
    phi = pre.P @ psi
    assert pre.P.shape == psi.T.shape
    assert np.abs(phi - phi.T).max() <= 1e-8
    assert np.abs(phi @ phi - phi).max() <= 1e-8
    assert 0.0 <= pre.nu_m < 1.0


def test_nu_m_absent_or_defined():
    assert nu_m([2.0, 1.0], 2) == pytest.approx(0.6)
    assert nu_m([2.0, 0.0], 2) is None
    assert nu_m([2.0], 2) is None


# --- modified PIP ---


def test_modified_pip_zero_lambda_is_pip(rng):
    psi = rng.standard_normal((6, 10))
    np.testing.assert_allclose(modified_pip(psi, 0.0).P, pip_preconditioner(psi).P, atol=1e-10)


def test_modified_pip_scalar_example():
    pre = modified_pip([[1.0, 0.0]], 1.0)
    np.testing.assert_allclose(pre.P, [[0.5], [0.0]])
    np.testing.assert_allclose(pre.P @ np.array([[1.0, 0.0]]), [[0.5, 0], [0, 0]])
    assert pre.method == MODIFIED_PIP and pre.lam == 1.0


def test_modified_pip_matches_closed_form_and_shrinks(rng):
    psi = rng.standard_normal((5, 9))
    norms = []
    for lam in (1.0, 10.0, 100.0, 1000.0):
        closed = psi.T @ np.linalg.inv(psi @ psi.T + lam * np.eye(5))
        P = modified_pip(psi, lam).P
        np.testing.assert_allclose(P, closed, atol=1e-12)
        norms.append(np.linalg.norm(P))
    assert all(a > b for a, b in zip(norms, norms[1:]))


def test_modified_pip_errors():
    with pytest.raises(SingularityError, match="pip_preconditioner"):
        modified_pip([[1.0, 2.0], [2.0, 4.0]], 0.0)
    with pytest.raises(DomainError):
        modified_pip([[1.0, 2.0]], -1.0)
    with pytest.raises(DimensionError):
        modified_pip(np.ones((3, 2)), 1.0)


def test_modified_pip_positive_lambda_handles_rank_deficiency():
    psi = np.array([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]])
    P = modified_pip(psi, 0.5).P
    np.testing.assert_allclose(P, psi.T @ np.linalg.inv(psi @ psi.T + 0.5 * np.eye(2)), atol=1e-12)


# --- apply ---


def test_apply_examples(rng):
    psi = rng.standard_normal((4, 4))
    ident = pip_preconditioner(np.eye(4))
    sys_ = apply(ident, psi, np.ones(4))
    np.testing.assert_array_equal(sys_.phi, psi)
    np.testing.assert_array_equal(sys_.y, np.ones(4))

    pre = pip_preconditioner(DIAG)
    assert np.array_equal(apply(pre, DIAG, np.zeros(2)).y, np.zeros(3))
    np.testing.assert_allclose(apply(pre, DIAG, [4.0, 3.0]).y, [2, 3, 0])


def test_apply_without_preconditioner(rng):
    psi = rng.standard_normal((3, 5))
    sys_ = apply(None, psi, np.arange(3.0))
    assert sys_.phi is sys_.psi and sys_.preconditioner is None and sys_.n == 5


def test_apply_dimension_mismatch(rng):
    pre = pip_preconditioner(rng.standard_normal((3, 5)))
    with pytest.raises(DimensionError):
        apply(pre, rng.standard_normal((4, 5)), np.zeros(4))
    with pytest.raises(DimensionError):
        apply(pre, rng.standard_normal((3, 5)), np.zeros(4))


@given(gaussian_matrices(max_rows=8, max_cols=12, wide=True), st.integers(0, 1000))
def test_sensing_system_consistency(psi, seed):
    y0 = np.random.default_rng(seed).standard_normal(psi.shape[0])
    pre = pip_preconditioner(psi)
    s = apply(pre, psi, y0)
    assert s.phi.shape[1] == s.psi.shape[1] == psi.shape[1]
    assert np.abs(s.phi - pre.P @ psi).max() <= 1e-10 * max(1, np.abs(s.phi).max())
    assert np.abs(s.y - pre.P @ y0).max() <= 1e-10 * max(1, np.abs(s.y).max())


# --- probability bound ---


def test_coherence_bound_desk_scale_is_vacuous():
    b = coherence_probability_bound(256, 128, 0.5)
    # 1 - 3 * 256^2 * exp(-128 * 0.25 / 72), evaluated with mpmath at 30 digits
    assert b.raw == pytest.approx(-126060.193808436510507, rel=1e-12)
    assert b.value == 0.0


def test_coherence_bound_limits():
    # large m inside the m < n domain: the exponential term vanishes
    assert coherence_probability_bound(10**7, 10**7 - 1, 0.5).value == pytest.approx(1.0, abs=1e-6)
    assert coherence_probability_bound(50, 10, 1e-9).value == 0.0


def test_coherence_bound_domain():
    for eta in (0.0, 1.0, -0.1):
        with pytest.raises(DomainError):
            coherence_probability_bound(10, 5, eta)
    with pytest.raises(DomainError):
        coherence_probability_bound(10, 10, 0.5)


@given(
    st.integers(2, 5000), st.integers(1, 4999), st.integers(1, 100),
    st.floats(0.01, 0.98), st.floats(0.001, 0.01),
)
def test_coherence_bound_monotone(n, m, dm, eta, deta):
    assume(m + dm < n)
    b = coherence_probability_bound
    assert b(n, m + dm, eta).raw >= b(n, m, eta).raw
    assert b(n, m, eta + deta).raw >= b(n, m, eta).raw
    assert b(n + 1, m, eta).raw <= b(n, m, eta).raw


def test_coherence_bound_vacuous_across_desk_scale():
    # the bound stays clamped at 0 for every n <= 512, so Monte Carlo
    # frequencies can never fall below it at these sizes
    for n in (16, 64, 128, 256, 512):
        for m in range(1, n):
            for eta in (0.1, 0.5, 0.9, 0.999):
                assert coherence_probability_bound(n, m, eta).value == 0.0


# --- Parseval, idempotence, optimality ---


def test_parseval_examples():
    r = parseval_check(np.diag([1.0, 1.0, 0.0]))
    assert r.is_parseval_projector and r.max_deviation == 0.0
    assert parseval_check(np.eye(4)).is_parseval_projector
    assert not parseval_check(2 * np.eye(3)).is_parseval_projector
    with pytest.raises(DimensionError):
        parseval_check(np.ones((2, 3)))


def test_idempotence_examples(rng):
    r = pip_idempotence_check(DIAG)
    assert r.passed and r.max_deviation == 0.0
    q, _ = np.linalg.qr(rng.standard_normal((8, 3)))
    assert pip_idempotence_check(q.T).max_deviation <= 1e-10
    with pytest.raises(DimensionError):
        pip_idempotence_check(np.eye(3))


def test_idempotence_on_gaussian_draws():
    for t in range(100):
        psi = gen_gaussian_matrix(16, 64, derive_seed(11, "idem", t))
        assert pip_idempotence_check(psi).max_deviation <= 1e-8


def test_optimality_probe_full_row_rank(rng):
    psi = rng.standard_normal((10, 25))
    rep = pip_optimality_probe(psi, perturbations=300, seed=1)
    assert rep.distance == pytest.approx(math.sqrt(15), abs=1e-8)
    assert rep.expected == pytest.approx(math.sqrt(15))
    assert rep.worst_margin >= -1e-9


def test_optimality_probe_rank_deficient_has_no_closed_form(rng):
    psi = rng.standard_normal((6, 2)) @ rng.standard_normal((2, 9))
    rep = pip_optimality_probe(psi, perturbations=50)
    assert rep.expected is None
    assert rep.distance == pytest.approx(math.sqrt(9 - 2), abs=1e-8)
    assert rep.worst_margin >= -1e-9
