import math

import numpy as np
import pytest

from posmu import (
    BlockSpec,
    FeasibilityInstance,
    InfeasibleProblem,
    InputError,
    QPInstance,
    UnboundedProblem,
    mu_bruteforce,
    mu_lower_dyad,
    mu_nonneg,
    phi,
    positive_qp_relaxation,
    q_feasibility_search,
    reduce_structure,
    validate_structure,
)

import support

TWO_SCALARS = reduce_structure(validate_structure([
    BlockSpec(kind="full", size=1, field="real"),
    BlockSpec(kind="full", size=1, field="real"),
]))


def test_phi_known_values():
    m = np.array([[0.0, 2.0], [0.0, 0.0]])
    inst = FeasibilityInstance.from_matrix(m, TWO_SCALARS)
    vals = phi(inst, np.array([0.0, 1.0]))
    assert vals == pytest.approx([4.0, -1.0])
    with pytest.raises(InputError):
        phi(inst, np.array([0.0, 2.0]))  # not unit norm
    with pytest.raises(InputError):
        phi(inst, np.array([0.6, -0.8]))  # negative entry


def test_q_search_detects_large_mu():
    m = np.array([[1.0, 2.0], [3.0, 4.0]])  # mu = 5.37 >= 1
    inst = FeasibilityInstance.from_matrix(m, TWO_SCALARS)
    res = q_feasibility_search(inst, restarts=5, seed=1)
    assert res.found
    assert np.min(phi(inst, res.q)) >= -1e-9


def test_q_search_fails_below_one():
    m = 0.1 * np.array([[1.0, 2.0], [3.0, 4.0]])  # mu = 0.537 < 1
    inst = FeasibilityInstance.from_matrix(m, TWO_SCALARS)
    res = q_feasibility_search(inst, restarts=10, seed=1)
    assert not res.found
    assert res.value < 0


def test_q_search_agrees_with_mu_threshold():
    r = support.rng(13)
    for _ in range(10):
        n = int(r.integers(2, 5))
        s = reduce_structure(support.random_structure(r, n))
        m = support.random_nonneg(r, n)
        mu = mu_nonneg(m, s, seed=3).mu
        if abs(mu - 1.0) < 0.05:
            continue  # skip near-threshold draws; the oracle is exact only in theory
        res = q_feasibility_search(FeasibilityInstance.from_matrix(m, s), seed=3)
        assert res.found == (mu >= 1.0)


def test_dyad_lower_bound_is_achievable():
    r = support.rng(19)
    for _ in range(10):
        n = int(r.integers(2, 6))
        s = reduce_structure(support.random_structure(r, n))
        m = support.random_nonneg(r, n)
        lb, d = mu_lower_dyad(m, s, seed=5)
        loop = m @ d.assemble().real
        assert np.max(np.abs(np.linalg.eigvals(loop))) == pytest.approx(lb, rel=1e-9)
        ub, _ = mu_nonneg(m, s, seed=5).mu, None
        assert lb <= ub + 1e-9 * (1 + ub)


def test_dyad_lower_equals_spectral_radius_for_scalars():
    r = support.rng(37)
    m = support.random_nonneg(r, 4)
    s = reduce_structure(validate_structure(
        [BlockSpec(kind="full", size=1, field="real")] * 4))
    lb, _ = mu_lower_dyad(m, s)
    assert lb == pytest.approx(np.max(np.abs(np.linalg.eigvals(m))), rel=1e-8)


def test_qp_unconstrained_gives_top_eigenvalue():
    m0 = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3 and -1
    inst = QPInstance(objective=m0, constraints=(), bounds=())
    res = positive_qp_relaxation(inst, tol=1e-8)
    assert res.value == pytest.approx(3.0, abs=1e-6)
    assert np.trace(res.x_matrix) == pytest.approx(1.0, abs=1e-9)


def test_qp_active_constraint_known_optimum():
    # maximize 2 x1 x2 with x1^2 >= 0.8 on the unit sphere: value 2 sqrt(0.16)
    m0 = np.array([[0.0, 1.0], [1.0, 0.0]])
    m1 = np.diag([1.0, 0.0])
    inst = QPInstance(objective=m0, constraints=(m1,), bounds=(0.8,))
    res = positive_qp_relaxation(inst, tol=1e-8)
    assert res.value == pytest.approx(0.8, abs=1e-5)
    x = np.sqrt(np.clip(np.diag(res.x_matrix), 0.0, None))
    assert x @ m0 @ x == pytest.approx(res.value, abs=1e-4)
    assert x @ m1 @ x >= 0.8 - 1e-4


def test_qp_infeasible_and_unbounded():
    with pytest.raises(InfeasibleProblem):
        positive_qp_relaxation(QPInstance(
            objective=np.eye(2), constraints=(np.eye(2),), bounds=(2.0,)))
    with pytest.raises(UnboundedProblem):
        positive_qp_relaxation(QPInstance(
            objective=np.eye(2), constraints=(), bounds=(),
            trace_normalized=False))


def test_qp_rejects_non_metzler_data():
    with pytest.raises(InputError):
        QPInstance(objective=np.array([[1.0, -1.0], [-1.0, 1.0]]),
                   constraints=(), bounds=())
    with pytest.raises(InputError):
        QPInstance(objective=np.eye(9), constraints=(), bounds=())


def test_bruteforce_matches_mu_on_scalar_structures():
    m = np.array([[1.0, 2.0], [3.0, 4.0]])
    s = validate_structure([
        BlockSpec(kind="full", size=1, field="real"),
        BlockSpec(kind="full", size=1, field="real"),
    ])
    bf = mu_bruteforce(m, s, density=11)
    assert bf == pytest.approx((5.0 + math.sqrt(33.0)) / 2.0, rel=1e-9)


def test_bruteforce_lower_bounds_mu_on_mixed_structure():
    r = support.rng(43)
    m = support.random_nonneg(r, 3)
    s = validate_structure([
        BlockSpec(kind="full", size=2, field="real"),
        BlockSpec(kind="scalar", size=1, field="real"),
    ])
    mu = mu_nonneg(m, s, seed=2).mu
    bf = mu_bruteforce(m, s, density=15)
    assert bf <= mu + 1e-6 * (1 + mu)
    assert mu - bf <= 0.2 * mu  # coarse grid, but not wildly off


def test_bruteforce_guards():
    with pytest.raises(InputError):
        mu_bruteforce(np.ones((5, 5)), validate_structure(
            [BlockSpec(kind="full", size=5, field="real")]))
