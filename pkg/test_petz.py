#!/usr/bin/env python3
"""
Tests for the Petz recovery oracle and the post-selected estimator.
"""

import sys
import os

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import numpy as np

from backend.channels import (
    DensityOperator, Observable, QuantumChannel, depolarizing_channel, random_channel,
    random_observable, random_state, random_unital_channel, random_unitary,
    state_preparation_channel, unitary_channel,
)
from backend.errors import DimensionError, EstimationError
from backend.linalg import psd_power
from backend.petz import (
    PetzInstance, acceptance_bound, attempt_budget, branch_acceptance, estimate_adjoint,
    estimate_petz, exact_petz, petz_expectation_oracle, teleport_lower_bounds,
)
from backend.sampling import chernoff_attempts

PAULI_Z = np.diag([1.0, -1.0])


def _unital_instance(seed: int) -> PetzInstance:
    rng = np.random.default_rng(seed)
    return PetzInstance(
        random_unital_channel(2, 3, rng),
        random_state(2, rng),
        random_state(2, rng),
        random_observable(2, rng),
    )


def test_exact_petz():
    """Closed-form recovery maps."""
    print("\nTesting exact_petz...")

    sigma = random_state(2, 1)
    identity = exact_petz(QuantumChannel([np.eye(2)]), sigma)
    y = random_state(2, 2).matrix
    assert np.allclose(identity.apply(y), y)
    print("  ✓ identity channel recovers with the identity")

    u = random_unitary(3, 4)
    petz = exact_petz(unitary_channel(u), random_state(3, 5))
    y = random_state(3, 6).matrix
    assert np.allclose(petz.apply(y), u.conj().T @ y @ u)
    print("  ✓ unitary channel recovers with U^dagger")

    sigma = random_state(2, 7)
    petz = exact_petz(depolarizing_channel(2, 3), sigma)
    assert np.allclose(petz.apply(random_state(3, 8).matrix), sigma.matrix)
    print("  ✓ fully depolarizing channel recovers the prior")

    try:
        exact_petz(random_channel(2, 3, 2, 0), random_state(3, 0))
        assert False, "prior of the wrong dimension accepted"
    except DimensionError:
        print("  ✓ prior dimension checked")


def test_perfect_recovery():
    """P(N(sigma)) = sigma and P is trace preserving on full-rank N(sigma)."""
    print("\nTesting perfect recovery of the prior...")

    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(50):
        n = random_channel(2, 3, 3, rng)
        sigma = random_state(2, rng)
        petz = exact_petz(n, sigma)
        assert not petz.support_restricted
        worst = max(worst, np.max(np.abs(petz.apply(n.apply(sigma.matrix)) - sigma.matrix)))
        assert petz.trace_preservation_error() < 1e-8
    assert worst < 1e-8
    print(f"  ✓ 50 random channels (max dev {worst:.1e}), all trace preserving")


def test_oracle():
    """Oracle agrees with a direct Kraus evaluation."""
    print("\nTesting petz_expectation_oracle...")

    rng = np.random.default_rng(10)
    for _ in range(20):
        n = random_channel(3, 2, 3, rng)
        sigma, omega = random_state(3, rng), random_state(2, rng)
        o = random_observable(3, rng)
        inv_sqrt = psd_power(n.apply(sigma.matrix), -0.5)
        root = psd_power(sigma.matrix, 0.5)
        inner = inv_sqrt @ omega.matrix @ inv_sqrt
        adjoint = sum(k.conj().T @ inner @ k for k in n.kraus)
        direct = np.real(np.trace(o.matrix @ root @ adjoint @ root))
        assert abs(petz_expectation_oracle(PetzInstance(n, sigma, omega, o)) - direct) < 1e-9
    print("  ✓ 20 random (3 -> 2) instances")


def test_support_restriction():
    """Rank-deficient N(sigma) is handled on its support."""
    print("\nTesting rank-deficient N(sigma)...")

    prep = state_preparation_channel(DensityOperator(np.diag([1.0, 0.0])), 2)
    sigma = random_state(2, 11)
    inst = PetzInstance(prep, sigma, DensityOperator(np.diag([1.0, 0.0])), Observable(PAULI_Z))
    assert inst.support_restricted
    assert exact_petz(prep, sigma).support_restricted
    assert abs(petz_expectation_oracle(inst) - Observable(PAULI_Z).expectation(sigma)) < 1e-10
    print("  ✓ flagged and restricted; recovers sigma from the support")

    leaking = PetzInstance(prep, sigma, DensityOperator(np.diag([0.0, 1.0])), Observable(PAULI_Z))
    assert leaking.omega_leakage > 0.99
    try:
        estimate_petz(leaking, 0.2, 0.1, seed=1, attempts=100)
        assert False, "zero-overlap input accepted"
    except EstimationError:
        print("  ✓ omega outside the support aborts the estimator")


def test_acceptance_bound():
    """eta and the per-branch teleportation bounds."""
    print("\nTesting acceptance_bound...")

    eta, zeta = acceptance_bound(random_unital_channel(2, 4, 0))
    assert abs(zeta - 0.5) < 1e-12 and abs(eta - 1 / 6) < 1e-12
    eta, zeta = acceptance_bound(depolarizing_channel(2))
    assert abs(eta - 1 / 6) < 1e-12
    print("  ✓ unital and depolarizing (2, 2): eta = 1/6")

    n = random_channel(3, 2, 2, 3)
    eta, zeta = acceptance_bound(n)
    expected = min(1 / (2 * 4), (1 - zeta) / (2 * 2))
    assert abs(eta - expected) < 1e-15
    print("  ✓ direct evaluation of the min formula")

    inst = _unital_instance(1)
    acceptance = branch_acceptance(inst)
    assert np.allclose(acceptance.teleport, 0.25)
    assert np.all(acceptance.teleport >= acceptance.teleport_bounds - 1e-12)
    print("  ✓ unital (2, 2): exact teleportation acceptance 1/4 >= bound 1/6")

    rng = np.random.default_rng(12)
    for _ in range(20):
        n = random_channel(2, 3, 3, rng)
        inst = PetzInstance(n, random_state(2, rng), random_state(3, rng), random_observable(2, rng))
        acceptance = branch_acceptance(inst)
        assert np.all(acceptance.teleport >= teleport_lower_bounds(n) - 1e-12)
        assert np.all(acceptance.joint <= 1.0)
    print("  ✓ non-unital channels respect the per-branch bounds")


def test_attempt_budget():
    """Hoeffding and Chernoff parts of the attempt budget."""
    print("\nTesting attempt_budget...")

    inst = PetzInstance(QuantumChannel([np.eye(2)]), DensityOperator(np.eye(2) / 2),
                        random_state(2, 3), Observable(PAULI_Z))
    assert abs(inst.c1_sq - 2) < 1e-12 and abs(inst.c2_sq - 0.5) < 1e-12
    budget = attempt_budget(inst, 0.1, 0.1)
    assert abs(budget.value_range - 12) < 1e-9
    assert budget.hoeffding_part == 106240
    assert 41180 <= budget.chernoff_part <= 41200
    assert budget.total == budget.hoeffding_part
    assert attempt_budget(inst, 0.1, 0.1, "chernoff").total == budget.chernoff_part
    print(f"  ✓ R = 12: hoeffding {budget.hoeffding_part}, chernoff {budget.chernoff_part}")

    assert chernoff_attempts(1000, 0.05, 1 / 12) == 2 * chernoff_attempts(1000, 0.05, 1 / 6)
    print("  ✓ halving eta doubles the attempts")

    rng = np.random.default_rng(13)
    successes = rng.binomial(6538, 1 / 6, size=2000)
    assert np.mean(successes >= 1000) >= 0.95
    print("  ✓ 6538 attempts at eta = 1/6 yield 1000 acceptances with probability >= 0.95")

    for bad in ((0.0, 0.1, "max"), (0.1, 1.5, "max"), (0.1, 0.1, "median")):
        try:
            attempt_budget(inst, *bad)
            assert False, f"{bad} accepted"
        except ValueError:
            pass
    print("  ✓ invalid epsilon, delta and policy rejected")


def test_complexity_shape():
    """Unital attempt counts scale with d_A^3 d_B^3."""
    print("\nTesting attempt scaling...")

    ratios = {}
    for d_a, d_b in ((2, 2), (2, 3), (3, 2), (3, 3)):
        channel = depolarizing_channel(d_a, d_b)
        inst = PetzInstance(channel, DensityOperator(np.eye(d_a) / d_a),
                            DensityOperator(np.eye(d_b) / d_b), Observable(np.eye(d_a)))
        total = attempt_budget(inst, 0.05, 0.05, "chernoff").total
        ratios[(d_a, d_b)] = total / (d_a ** 3 * d_b ** 3)
    reference = ratios[(2, 2)]
    for dims, ratio in ratios.items():
        assert 0.5 <= ratio / reference <= 2.0, f"{dims}: {ratio / reference:.2f}"
    print("  ✓ attempts / (d_A d_B)^3 within a factor 2 across (2,2)..(3,3)")


def test_calibration():
    """The unconditional estimator is unbiased against the oracle."""
    print("\nTesting estimator calibration...")

    for seed in range(20):
        inst = _unital_instance(100 + seed)
        reports = [estimate_petz(inst, 0.1, 0.1, seed=run, attempts=10000) for run in range(50)]
        mean = np.mean([r.estimate for r in reports])
        pooled = np.sqrt(np.sum([r.std_error ** 2 for r in reports])) / len(reports)
        oracle = reports[0].oracle_value
        assert abs(mean - oracle) < 4 * pooled, f"instance {seed}: {mean:.4f} vs {oracle:.4f}"

        bounds = teleport_lower_bounds(inst.channel)
        reached = np.sum([r.teleport_reached for r in reports], axis=0)
        accepted = np.sum([r.teleport_accepted for r in reports], axis=0)
        for b, n_reached, n_accepted in zip(bounds, reached, accepted):
            sigma = np.sqrt(b * (1 - b) / n_reached)
            assert n_accepted / n_reached >= b - 4 * sigma
    print("  ✓ 20 unital instances x 50 runs within 4 pooled standard errors")


def test_estimate_petz():
    """Single-run accuracy, report fields and determinism."""
    print("\nTesting estimate_petz...")

    inst = _unital_instance(7)
    report = estimate_petz(inst, 0.1, 0.1, seed=3, attempts=200000)
    assert report.deviation <= 5 * report.std_error
    assert report.accepted <= report.attempts
    assert report.empirical_acceptance == report.accepted / report.attempts
    assert abs(report.eta_bound - 1 / 6) < 1e-12
    eta = report.eta_bound
    for rate, reached in zip(report.teleport_acceptance, report.teleport_reached):
        assert rate >= eta - 3 * np.sqrt(eta * (1 - eta) / reached)
    print(f"  ✓ deviation {report.deviation:.4f} <= 5 sigma, acceptance {report.empirical_acceptance:.3f}")

    a = estimate_petz(inst, 0.1, 0.1, seed=4, attempts=20000, workers=1)
    b = estimate_petz(inst, 0.1, 0.1, seed=4, attempts=20000, workers=3)
    assert a.estimate == b.estimate and a.accepted == b.accepted
    print("  ✓ identical results for 1 and 3 workers")

    eps, delta = 0.1, 0.1
    failures = sum(estimate_petz(inst, eps, delta, seed=run).deviation > eps for run in range(100))
    assert failures <= 10
    print(f"  ✓ {failures}/100 runs outside epsilon = {eps} at the planned budget")


def test_estimate_adjoint():
    """Adjoint estimator through conjugate and transpose."""
    print("\nTesting estimate_adjoint...")

    rng = np.random.default_rng(14)
    for _ in range(3):
        n = random_channel(2, 3, 3, rng)
        rho, o = random_state(3, rng), random_observable(2, rng)
        report = estimate_adjoint(n, rho, o, 100000, seed=int(rng.integers(1 << 30)))
        direct = o.expectation(sum(k.conj().T @ rho.matrix @ k for k in n.kraus))
        assert abs(report.oracle_value - direct) < 1e-10
        assert report.deviation <= 5 * report.std_error
        assert abs(report.value_range - 30) < 1e-12
    print("  ✓ random (2 -> 3) channels within 5 sigma, R = gamma d_A d_B = 30")

    try:
        estimate_adjoint(random_channel(2, 3, 2, 0), random_state(2, 0), Observable(PAULI_Z), 10, seed=1)
        assert False, "state on the input space accepted"
    except DimensionError:
        print("  ✓ state must live on the output space")


TESTS = [
    test_exact_petz,
    test_perfect_recovery,
    test_oracle,
    test_support_restriction,
    test_acceptance_bound,
    test_attempt_budget,
    test_complexity_shape,
    test_calibration,
    test_estimate_petz,
    test_estimate_adjoint,
]


def main():
    """Run all tests."""
    print("=" * 60)
    print("Petz Recovery Tests")
    print("=" * 60)

    all_passed = True
    for test in TESTS:
        try:
            test()
        except Exception as e:
            print(f"  ✗ {test.__name__} failed with error: {e}")
            all_passed = False

    print("\n" + "=" * 60)
    if all_passed:
        print("All Petz recovery tests passed! ✓")
        return 0
    else:
        print("Some tests failed! ✗")
        return 1


if __name__ == "__main__":
    sys.exit(main())
