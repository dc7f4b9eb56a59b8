import math

import numpy as np
import pytest

from posmu import (
    BlockSpec,
    InputError,
    ScalingVector,
    feasibility_certificate,
    mu_nonneg,
    mu_upper,
    reduce_structure,
    scaled_norm,
    spectral_radius,
    validate_structure,
)

import support

TWO_SCALARS = reduce_structure(validate_structure([
    BlockSpec(kind="full", size=1, field="real"),
    BlockSpec(kind="full", size=1, field="real"),
]))

M22 = np.array([[1.0, 2.0], [3.0, 4.0]])
MU22 = (5.0 + math.sqrt(33.0)) / 2.0  # exact value for two independent scalars


def test_spectral_radius_matches_eigvals():
    r = support.rng(5)
    for _ in range(20):
        m = r.random((5, 5))
        assert spectral_radius(m) == pytest.approx(
            np.max(np.abs(np.linalg.eigvals(m))), rel=1e-9
        )


def test_scaled_norm_balances_nilpotent_part():
    m = np.array([[0.0, 2.0], [0.0, 0.0]])
    # theta = (1, 4) maps the single gain 2 to 2 * sqrt(1/4) = 1
    assert scaled_norm(m, (1.0, 4.0), TWO_SCALARS) == pytest.approx(1.0)
    assert scaled_norm(m, (1.0, 1.0), TWO_SCALARS) == pytest.approx(2.0)


def test_mu_known_two_by_two():
    res = mu_nonneg(M22, TWO_SCALARS, tol=1e-8)
    assert res.mu == pytest.approx(MU22, rel=1e-6)
    assert res.lower <= res.upper + 1e-12
    assert res.witness is not None and res.witness_marginal is not None
    # the witness achieves the lower bound as a loop spectral radius
    loop = M22 @ res.witness.assemble().real
    assert np.max(np.abs(np.linalg.eigvals(loop))) == pytest.approx(res.lower, rel=1e-9)


def test_mu_bounds_sandwich_spectral_quantities():
    r = support.rng(17)
    for _ in range(15):
        n = int(r.integers(2, 6))
        s = support.random_structure(r, n)
        m = support.random_nonneg(r, n)
        res = mu_nonneg(m, s, seed=int(r.integers(1 << 31)))
        rho = spectral_radius(m)
        smax = float(np.linalg.svd(m, compute_uv=False)[0])
        assert res.mu >= rho - 1e-8 * (1 + rho)
        assert res.mu <= smax + 1e-8 * (1 + smax)


def test_upper_bound_is_certified_by_its_scaling():
    r = support.rng(29)
    for _ in range(10):
        n = int(r.integers(2, 6))
        s = reduce_structure(support.random_structure(r, n))
        m = support.random_nonneg(r, n)
        ub, theta = mu_upper(m, s)
        achieved = scaled_norm(m, theta, s)
        assert achieved <= ub + 1e-9 * (1 + ub)


def test_feasibility_certificate_brackets_mu():
    res = mu_nonneg(M22, TWO_SCALARS, tol=1e-8)
    above = feasibility_certificate(M22, 1.01 * res.upper, TWO_SCALARS)
    assert above.feasible
    assert scaled_norm(M22, above.theta, TWO_SCALARS) <= 1.01 * res.upper + 1e-9
    below = feasibility_certificate(M22, 0.98 * res.lower, TWO_SCALARS)
    assert not below.feasible


def test_homogeneity_under_positive_scaling():
    res1 = mu_nonneg(M22, TWO_SCALARS, tol=1e-8)
    res2 = mu_nonneg(2.0 * M22, TWO_SCALARS, tol=1e-8)
    assert res2.mu == pytest.approx(2.0 * res1.mu, rel=1e-6)


def test_single_full_block_gives_largest_singular_value():
    r = support.rng(31)
    m = support.random_nonneg(r, 4)
    s = reduce_structure(validate_structure([BlockSpec(kind="full", size=4, field="real")]))
    res = mu_nonneg(m, s)
    assert res.mu == pytest.approx(np.linalg.svd(m, compute_uv=False)[0], rel=1e-8)


def test_zero_matrix_has_zero_mu():
    res = mu_nonneg(np.zeros((3, 3)), reduce_structure(
        support.random_structure(support.rng(1), 3)))
    assert res.mu == 0.0
    assert res.witness_marginal is None


def test_input_validation():
    with pytest.raises(InputError):
        mu_nonneg(np.array([[1.0, -0.5], [0.0, 1.0]]), TWO_SCALARS)
    with pytest.raises(InputError):
        mu_nonneg(np.ones((3, 3)), TWO_SCALARS)  # dimension mismatch
    with pytest.raises(InputError):
        feasibility_certificate(M22, -1.0, TWO_SCALARS)
    with pytest.raises(InputError):
        ScalingVector(values=(1.0, 0.0))
    with pytest.raises(InputError):
        scaled_norm(M22, (1.0,), TWO_SCALARS)


def test_diagnostics_and_determinism():
    r = support.rng(41)
    m = support.random_nonneg(r, 4)
    s = support.random_structure(r, 4)
    a = mu_nonneg(m, s, seed=7)
    b = mu_nonneg(m, s, seed=7)
    assert a.mu == b.mu and a.lower == b.lower
    assert a.diagnostics["seed"] == 7
    assert a.diagnostics["bisection_steps"] >= 0
