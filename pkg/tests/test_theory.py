import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import sampled_rip_constant
from pmols.errors import (
    BudgetError,
    DimensionError,
    NotPositiveDefiniteError,
    OverlapError,
    RankDeficiencyError,
    ValidationError,
)
from pmols.linalg import normalize_columns
from pmols.theory import (
    FAMILIES,
    REPORT_FIELDS,
    CheckReport,
    brute_force_rip_constant,
    check_coherence_chain,
    check_cross_gram_bound,
    check_projection_bound,
    check_rip_consequences,
    check_singular_concentration,
    check_wielandt,
    conditioned_unit_matrix,
    merge_reports,
    run_family,
)

# --- RIP constant ---


def test_rip_constant_examples():
    assert brute_force_rip_constant(np.eye(5), 3) == pytest.approx(0.0, abs=1e-15)
    assert brute_force_rip_constant(np.eye(5), 0) == 0.0
    twins = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    assert brute_force_rip_constant(twins, 1) == pytest.approx(0.0, abs=1e-15)
    assert brute_force_rip_constant(twins, 2) == pytest.approx(1.0)


def test_rip_constant_budget():
    with pytest.raises(BudgetError) as info:
        brute_force_rip_constant(np.eye(40), 10, budget=1000)
    assert info.value.count == math.comb(40, 10)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20)
def test_rip_constant_monotone_in_order(seed):
    phi = normalize_columns(np.random.default_rng(seed).standard_normal((6, 9)))
    deltas = [brute_force_rip_constant(phi, k) for k in range(1, 6)]
    assert deltas[0] <= 1e-12
    assert all(a <= b + 1e-12 for a, b in zip(deltas, deltas[1:]))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_rip_constant_matches_sampled_oracle(k):
    phi = np.random.default_rng(77).standard_normal((6, 10))
    assert brute_force_rip_constant(phi, k) == pytest.approx(sampled_rip_constant(phi, k), abs=1e-6)


# --- single-instance checks ---


def test_rip_consequences_identity_is_tight():
    rep = check_rip_consequences(np.eye(4), [0, 2], [[1.0, 0.0], [0.3, -2.0], [0.0, 0.0]])
    assert rep.passed and rep.instances_tested == 3
    assert rep.worst_margin == pytest.approx(0.0, abs=1e-12)


def test_rip_consequences_skips_when_delta_reaches_one():
    twins = np.array([[1.0, 1.0], [0.0, 0.0]])
    rep = check_rip_consequences(twins, [0, 1], [1.0, 1.0])
    assert rep.instances_tested == 0 and rep.skipped == 1 and rep.passed


def test_rip_consequences_errors():
    with pytest.raises(ValidationError):
        check_rip_consequences(2 * np.eye(3), [0], [1.0])
    with pytest.raises(DimensionError):
        check_rip_consequences(np.eye(3), [0, 1], [1.0])


def test_wielandt_collinear_is_equality():
    A = np.diag([4.0, 2.0, 1.0])
    u = np.array([1.0, 2.0, -1.0])
    rep = check_wielandt(A, u, -3 * u)
    assert rep.worst_margin == pytest.approx(0.0, abs=1e-12)
    assert rep.passed


def test_wielandt_orthogonal_example():
    # A = I makes the factor (2 cos) / 2 = cos, so |u'v|^2 <= cos^2 holds with equality
    rep = check_wielandt(np.eye(2), [1.0, 0.0], [1.0, 1.0])
    assert rep.worst_margin == pytest.approx(0.0, abs=1e-12)


def test_wielandt_errors():
    with pytest.raises(NotPositiveDefiniteError):
        check_wielandt(np.diag([1.0, -1.0]), [1.0, 0.0], [0.0, 1.0])
    with pytest.raises(NotPositiveDefiniteError):
        check_wielandt([[1.0, 2.0], [0.0, 1.0]], [1.0, 0.0], [0.0, 1.0])
    with pytest.raises(DimensionError):
        check_wielandt(np.eye(2), [1.0, 0.0], [1.0, 0.0, 0.0])


@given(st.integers(0, 2**32 - 1))
def test_wielandt_random_pd(seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((4, 4))
    A = B @ B.T + 0.1 * np.eye(4)
    assert check_wielandt(A, rng.standard_normal((5, 4)), rng.standard_normal((5, 4))).passed


def test_cross_gram_examples():
    assert check_cross_gram_bound(np.eye(4), [0, 1], [2, 3]).worst_margin == pytest.approx(0.0)
    phi = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
    rep = check_cross_gram_bound(phi, [0], [1, 2])
    assert rep.passed and rep.worst_margin >= 0
    with pytest.raises(OverlapError):
        check_cross_gram_bound(phi, [0, 1], [1])


def test_single_pairs_hit_coherence(rng):
    # the most coherent pair meets the bound with equality
    phi = normalize_columns(rng.standard_normal((5, 7)))
    i, j = np.unravel_index(np.argmax(np.abs(phi.T @ phi - np.eye(7))), (7, 7))
    rep = check_cross_gram_bound(phi, [i], [j])
    assert rep.worst_margin == pytest.approx(0.0, abs=1e-12)


def test_projection_empty_support_is_equality(rng):
    phi = normalize_columns(rng.standard_normal((5, 7)))
    rep = check_projection_bound(phi, [], list(range(7)))
    assert rep.instances_tested == 7
    assert rep.worst_margin == pytest.approx(0.0, abs=1e-12)


def test_projection_examples():
    rep = check_projection_bound(np.eye(4), [0, 1], [2, 3])
    assert rep.instances_tested == 2 and rep.worst_margin == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(OverlapError):
        check_projection_bound(np.eye(4), [0, 1], 1)
    with pytest.raises(ValidationError):
        check_projection_bound(2 * np.eye(3), [0], 1)


def test_coherence_chain_example():
    rep = check_coherence_chain([[2.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    # nu = 0.6, mu(psi) = 0 and mu(P psi) = 0, so the second link is tight
    assert rep.passed and rep.worst_margin == pytest.approx(0.0, abs=1e-12)


def test_coherence_chain_orthonormal_rows(rng):
    q, _ = np.linalg.qr(rng.standard_normal((9, 4)))
    psi = q.T
    rep = check_coherence_chain(psi)
    # nu = 0 collapses the chain; P psi = psi' psi has the same coherence as psi
    assert rep.passed
    assert rep.worst_margin == pytest.approx(0.0, abs=1e-10)


def test_coherence_chain_errors():
    with pytest.raises(DimensionError):
        check_coherence_chain(np.eye(3))
    with pytest.raises(RankDeficiencyError):
        check_coherence_chain([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])


def test_singular_concentration_small():
    rep = check_singular_concentration(8, 32, 0.5, 100, seed=1)
    assert rep.instances_tested == 2 and rep.passed


# --- reports and families ---


def test_report_semantics():
    rep = CheckReport("x", 3, 0, -1e-12, tolerance=1e-10)
    assert rep.passed
    row = rep.as_row()
    assert list(row) == REPORT_FIELDS
    merged = merge_reports("x", [rep, CheckReport("x", 2, 1, -0.5, tolerance=1e-10)])
    assert (merged.instances_tested, merged.violations, merged.worst_margin) == (5, 1, -0.5)
    assert not merged.passed


def test_conditioned_matrix_meets_order():
    phi, delta = conditioned_unit_matrix(0, "t", 3)
    assert np.allclose(np.linalg.norm(phi, axis=0), 1.0)
    assert delta == brute_force_rip_constant(phi, 3) < 1


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_family_has_no_violations(name):
    rep = run_family(name, seed=3)
    assert rep.instances_tested > 0
    assert rep.violations == 0, rep
