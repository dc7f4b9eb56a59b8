"""End-to-end acceptance checks.

Each test prints one summary line (visible under ``pytest -s`` or in captured
output) so a run can be audited at a glance.  Tolerances are fixed here and
are not to be loosened to make a failing build pass.
"""

import math
import time

import numpy as np
import pytest

from posmu import (
    BlockSpec,
    InputError,
    QPInstance,
    StateSpaceSystem,
    check_external_positivity,
    check_positive_dominance,
    delay_invariance,
    dyad_interpolant,
    falsify,
    frequency_sweep_mu,
    mu_nonneg,
    positive_qp_relaxation,
    reduce_structure,
    robust_test,
    sample_boundary,
    simulate,
    static_gain,
    validate_structure,
)

import support


def report(num: int, ok: bool, detail: str):
    print(f"[criterion {num:2d}] {'PASS' if ok else 'FAIL'}: {detail}")


def test_criterion_01_certified_gap_on_random_instances():
    """200 random nonnegative instances close their bound gap within 1e-2."""
    t0 = time.perf_counter()
    r = support.rng(101)
    worst = 0.0
    for _ in range(200):
        n = int(r.integers(2, 7))
        s = support.random_structure(r, n)
        m = support.random_nonneg(r, n, scale=0.25 + 3.0 * r.random())
        res = mu_nonneg(m, s, seed=int(r.integers(1 << 31)))
        worst = max(worst, res.gap / max(1.0, res.upper))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-2 and dt < 120.0
    report(1, ok, f"200 instances, worst relative gap {worst:.3e}, {dt:.1f}s")
    assert worst <= 1e-2
    assert dt < 120.0


def test_criterion_02_reduces_to_classical_quantities():
    """All-scalar structures give the spectral radius, one block the norm."""
    t0 = time.perf_counter()
    r = support.rng(202)
    worst_rho = 0.0
    for _ in range(100):
        n = int(r.integers(2, 7))
        s = validate_structure([BlockSpec(kind="full", size=1, field="real")] * n)
        m = support.random_nonneg(r, n)
        res = mu_nonneg(m, s, seed=int(r.integers(1 << 31)))
        rho = float(np.max(np.abs(np.linalg.eigvals(m))))
        worst_rho = max(worst_rho, abs(res.mu - rho) / max(1.0, rho))
    worst_sig = 0.0
    for _ in range(20):
        n = int(r.integers(2, 7))
        s = validate_structure([BlockSpec(kind="full", size=n, field="real")])
        m = support.random_nonneg(r, n)
        res = mu_nonneg(m, s)
        sig = float(np.linalg.svd(m, compute_uv=False)[0])
        worst_sig = max(worst_sig, abs(res.mu - sig) / (1.0 + sig))
    dt = time.perf_counter() - t0
    ok = worst_rho <= 1e-5 and worst_sig <= 1e-8 and dt < 30.0
    report(2, ok, f"spectral-radius error {worst_rho:.3e}, "
                  f"norm error {worst_sig:.3e}, {dt:.1f}s")
    assert worst_rho <= 1e-5
    assert worst_sig <= 1e-8
    assert dt < 30.0


def test_criterion_03_positive_homogeneity():
    """mu(alpha M) = alpha mu(M) to 1e-6 relative for alpha in {0.5, 2, 10}."""
    r = support.rng(303)
    worst = 0.0
    for _ in range(10):
        n = int(r.integers(2, 6))
        s = support.random_structure(r, n)
        m = support.random_nonneg(r, n)
        base = mu_nonneg(m, s, tol=1e-8, seed=11).mu
        for alpha in (0.5, 2.0, 10.0):
            scaled = mu_nonneg(alpha * m, s, tol=1e-8, seed=11).mu
            worst = max(worst, abs(scaled - alpha * base) / (alpha * max(base, 1e-30)))
    ok = worst <= 1e-6
    report(3, ok, f"30 scaling pairs, worst relative deviation {worst:.3e}")
    assert worst <= 1e-6


def test_criterion_04_upper_bound_dominates_boundary_sampling():
    """No admissible boundary perturbation beats the certified value."""
    r = support.rng(404)
    count, worst = 0, -np.inf
    for _ in range(50):
        n = int(r.integers(2, 6))
        s = support.random_structure(r, n)
        while not (s.has_complex or s.has_scalar):
            s = support.random_structure(r, n)
        m = support.random_nonneg(r, n)
        res = mu_nonneg(m, s, seed=int(r.integers(1 << 31)))
        for _ in range(200):
            d = sample_boundary(s, r, mode="mixed")
            rho = float(np.max(np.abs(np.linalg.eigvals(m @ d.assemble()))))
            worst = max(worst, rho - res.mu)
            count += 1
    ok = worst <= 1e-6 * (1.0 + abs(worst))
    report(4, ok, f"{count} boundary samples over 50 structures, "
                  f"worst excess over mu {worst:.3e}")
    assert count == 10000
    assert worst <= 1e-6


def test_criterion_05_frequency_sweep_peaks_at_zero():
    """For positive systems the swept bound never beats the static one."""
    t0 = time.perf_counter()
    r = support.rng(505)
    worst = -np.inf
    for _ in range(50):
        n = int(r.integers(2, 6))
        sys = support.random_metzler_system(r, n)
        s = support.random_structure(r, n)
        alpha = abs(float(np.max(np.linalg.eigvals(sys.a).real)))
        freqs = np.concatenate(([0.0], alpha * np.logspace(-2, 2, 15)))
        bounds = frequency_sweep_mu(sys, s, freqs)
        worst = max(worst, float(np.max(bounds[1:]) - bounds[0]) /
                    (1.0 + bounds[0]))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-6 and dt < 180.0
    report(5, ok, f"50 sweeps of 16 frequencies, worst relative excess "
                  f"over the static value {worst:.3e}, {dt:.1f}s")
    assert worst <= 1e-6
    assert dt < 180.0


def test_criterion_06_network_verdicts_and_witnesses():
    """Scaled networks get the right verdict; witnesses destabilize in simulation."""
    t0 = time.perf_counter()
    r = support.rng(606)
    bad_verdicts = 0
    worst_marginal = -np.inf
    sims_diverged = 0
    falsified = 0
    false_alarms = 0
    not_robust_probs = []
    for _ in range(50):
        n = int(r.integers(2, 5))
        prob = support.random_fm(r, n, target_mu=1.6, dim=int(r.integers(2, 5)))
        rep = robust_test(prob, seed=int(r.integers(1 << 31)))
        if rep.verdict != "not_robust":
            bad_verdicts += 1
            continue
        worst_marginal = max(worst_marginal, -rep.marginal_abscissa)
        assert rep.marginal_abscissa >= -1e-9
        assert abs(rep.marginal_abscissa) <= 1e-6
        not_robust_probs.append((prob, rep))
    for _ in range(50):
        n = int(r.integers(2, 5))
        prob = support.random_fm(r, n, target_mu=0.55, dim=int(r.integers(2, 5)))
        rep = robust_test(prob, seed=int(r.integers(1 << 31)))
        if rep.verdict != "robust":
            bad_verdicts += 1
            continue
        if falsify(prob, samples=200, seed=int(r.integers(1 << 31))).found:
            false_alarms += 1
    for prob, rep in not_robust_probs:
        horizon = max(80.0 / float(np.min(prob.k)),
                      40.0 / max(rep.witness_abscissa, 0.02))
        traj = simulate(prob, delta=rep.witness, t_final=horizon)
        sims_diverged += int(traj.diverged)
        fal = falsify(prob, samples=300, seed=3)
        if fal.found:
            falsified += 1
            assert fal.abscissa >= 0.0
    dt = time.perf_counter() - t0
    ok = (bad_verdicts == 0 and false_alarms == 0
          and sims_diverged == len(not_robust_probs) and dt < 300.0)
    report(6, ok, f"100 networks, {bad_verdicts} wrong verdicts, "
                  f"{sims_diverged}/{len(not_robust_probs)} witness runs diverged, "
                  f"{falsified} random falsifications, {false_alarms} false alarms, "
                  f"worst marginal abscissa defect {worst_marginal:.2e}, {dt:.1f}s")
    assert bad_verdicts == 0
    assert false_alarms == 0
    assert sims_diverged == len(not_robust_probs)
    assert dt < 300.0


def test_criterion_07_delay_invariance_of_the_static_test():
    """Loop delays leave the zero-frequency margin bitwise unchanged."""
    r = support.rng(707)
    worst = 0.0
    for _ in range(5):
        n = int(r.integers(2, 5))
        prob = support.random_fm(r, n, target_mu=0.8 + 0.8 * r.random(),
                                 with_delays=True)
        rep = delay_invariance(prob, seed=int(r.integers(1 << 31)))
        assert rep.equal
        worst = max(worst, abs(rep.mu_with - rep.mu_without) /
                    max(1.0, rep.mu_without))
    ok = worst <= 1e-12
    report(7, ok, f"5 delayed networks, worst margin shift {worst:.3e}")
    assert worst <= 1e-12


def test_criterion_08_qp_relaxation_is_tight_for_metzler_data():
    """Rank-one extraction recovers the relaxation value and stays feasible."""

    def metzler_sym(r, n):
        w = r.random((n, n))
        w = 0.5 * (w + w.T)
        np.fill_diagonal(w, r.standard_normal(n))
        return w

    r = support.rng(808)
    worst_obj, worst_slack = 0.0, 0.0
    for _ in range(50):
        n = int(r.integers(2, 6))
        m0 = metzler_sym(r, n)
        x0 = 0.2 + r.random(n)
        x0 /= np.linalg.norm(x0)
        cons, bnds = [], []
        for _ in range(int(r.integers(1, 4))):
            mi = metzler_sym(r, n)
            v = float(x0 @ mi @ x0)
            cons.append(mi)
            bnds.append(v - 0.1 * (1.0 + abs(v)))
        res = positive_qp_relaxation(
            QPInstance(objective=m0, constraints=tuple(cons), bounds=tuple(bnds)),
            tol=1e-7,
        )
        x = np.sqrt(np.clip(np.diag(res.x_matrix), 0.0, None))
        worst_obj = max(worst_obj,
                        abs(x @ m0 @ x - res.value) / (1.0 + abs(res.value)))
        for mi, bi in zip(cons, bnds):
            worst_slack = min(worst_slack, (x @ mi @ x - bi) / (1.0 + abs(bi)))
    ok = worst_obj <= 1e-4 and worst_slack >= -1e-6
    report(8, ok, f"50 programs, extraction error {worst_obj:.3e}, "
                  f"worst slack {worst_slack:.3e}")
    assert worst_obj <= 1e-4
    assert worst_slack >= -1e-6


def test_criterion_09_interpolants_are_exact_and_contractive():
    """1000 vector pairs are interpolated exactly; expanding pairs are refused."""
    r = support.rng(909)
    worst = 0.0
    for _ in range(1000):
        n = int(r.integers(1, 9))
        p = 0.05 + r.random(n)
        q = r.random(n)
        q *= r.random() * np.linalg.norm(p) / max(np.linalg.norm(q), 1e-30)
        d = dyad_interpolant(p, q)
        worst = max(worst, float(np.linalg.norm(d @ p - q)) /
                    (1.0 + float(np.linalg.norm(q))))
        assert np.linalg.svd(d, compute_uv=False)[0] <= 1.0 + 1e-12
    rejected = 0
    for _ in range(20):
        n = int(r.integers(1, 9))
        p = 0.05 + r.random(n)
        q = r.random(n) + 0.05
        q *= 1.5 * np.linalg.norm(p) / np.linalg.norm(q)
        with pytest.raises(InputError):
            dyad_interpolant(p, q)
        rejected += 1
    ok = worst <= 1e-12 and rejected == 20
    report(9, ok, f"1000 pairs, worst residual {worst:.3e}, "
                  f"{rejected}/20 expanding pairs rejected")
    assert worst <= 1e-12
    assert rejected == 20


def test_criterion_10_dominance_versus_external_positivity():
    """A well-damped lag is dominated yet not externally positive; an
    underdamped one resonates with the classical peak."""

    def second_order(zeta):
        return StateSpaceSystem(
            a=np.array([[0.0, 1.0], [-1.0, -2.0 * zeta]]),
            b=np.array([[0.0], [1.0]]),
            c=np.array([[1.0, 0.0]]),
            d=np.zeros((1, 1)),
        )

    damped = second_order(0.9)
    dom = check_positive_dominance(damped)
    pos = check_external_positivity(damped)
    first_zero = math.pi / math.sqrt(1.0 - 0.81)
    ok_damped = (dom.verdict == "dominated" and not pos.positive
                 and abs(pos.refuted_at - first_zero) <= 0.05)

    ringing = second_order(0.5)
    dom2 = check_positive_dominance(ringing)
    peak = 2.0 / math.sqrt(3.0)
    ok_ringing = (dom2.verdict == "refuted"
                  and abs(dom2.peaks[0][0] - peak) <= 1e-3)

    assert static_gain(damped)[0, 0] == pytest.approx(1.0)
    ok = ok_damped and ok_ringing
    report(10, ok, f"damped: {dom.verdict}, impulse sign change at "
                   f"{pos.refuted_at:.4f} (expect {first_zero:.4f}); "
                   f"ringing: {dom2.verdict}, peak {dom2.peaks[0][0]:.6f} "
                   f"(expect {peak:.6f})")
    assert dom.verdict == "dominated"
    assert not pos.positive
    assert abs(pos.refuted_at - first_zero) <= 0.05
    assert dom2.verdict == "refuted"
    assert abs(dom2.peaks[0][0] - peak) <= 1e-3
