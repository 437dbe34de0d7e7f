#!/usr/bin/env python3
"""
Tests for channel representations, dual maps and test-channel generators.
"""

import sys
import os

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import numpy as np

from backend.channels import (
    DensityOperator, Observable, QuantumChannel, apply_channel, apply_choi, choi_to_kraus,
    compose, depolarizing_channel, dual_maps, is_cptp, is_unital, kraus_to_choi, min_kraus_rank,
    random_channel, random_observable, random_state, random_unital_channel,
    state_preparation_channel, unitary_channel, werner_holevo,
)
from backend.errors import ValidationError
from backend.linalg import max_entangled, structural_operators, swap_operator

HADAMARD = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def test_kraus_to_choi():
    """Choi operators of standard channels."""
    print("\nTesting kraus_to_choi...")

    identity = QuantumChannel([np.eye(2)])
    assert np.allclose(identity.choi, max_entangled(2))
    assert np.isclose(np.trace(identity.choi), 2)
    print("  ✓ identity channel -> Phi with trace 2")

    assert np.allclose(depolarizing_channel(2).choi, np.eye(4) / 2)
    paulis = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
    assert np.allclose(kraus_to_choi([p / 2 for p in paulis], 2, 2), np.eye(4) / 2)
    print("  ✓ fully depolarizing -> I/2 from two different Kraus sets")

    prep = state_preparation_channel(DensityOperator(np.diag([1.0, 0.0])), 2)
    assert np.allclose(prep.choi, np.diag([1, 0, 1, 0]))
    print("  ✓ state preparation of |0><0| -> diag(1,0,1,0)")


def test_choi_to_kraus():
    """Minimal Kraus decompositions."""
    print("\nTesting choi_to_kraus...")

    kraus = choi_to_kraus(max_entangled(2), 2, 2)
    assert len(kraus) == 1
    k = kraus[0]
    assert np.allclose(k / k[0, 0], np.eye(2))
    print("  ✓ Phi -> one Kraus operator proportional to I")

    assert len(choi_to_kraus(np.eye(4) / 2, 2, 2)) == 4
    print("  ✓ I/2 -> 4 Kraus operators")

    for seed in range(10):
        n = random_channel(2, 3, 3, seed)
        rebuilt = kraus_to_choi(choi_to_kraus(n.choi, 2, 3), 2, 3)
        assert np.max(np.abs(rebuilt - n.choi)) < 1e-9
    print("  ✓ roundtrip error < 1e-9 on random channels")

    faint = np.diag([1.0, 0.0, 0.0, 1e-6])
    assert len(choi_to_kraus(faint, 2, 2, tol=1e-3)) == 1
    assert len(choi_to_kraus(faint, 2, 2)) == 2
    print("  ✓ Kraus count is the rank at the given tolerance")

    try:
        choi_to_kraus(swap_operator(2), 2, 2)
        assert False, "non-PSD Choi accepted"
    except ValidationError:
        print("  ✓ swap (non-PSD) rejected")


def test_apply_channel():
    """Action of channels on states and operators."""
    print("\nTesting apply_channel...")

    rng = np.random.default_rng(1)
    rho = random_state(2, rng)
    identity = QuantumChannel([np.eye(2)])
    assert np.allclose(apply_channel(identity, rho).matrix, rho.matrix)
    print("  ✓ identity leaves rho unchanged")

    w_plus = werner_holevo(2, "+")
    off_diagonal = np.array([[0, 1], [0, 0]])
    expected = np.array([[0, 0], [1, 0]]) / 3
    assert np.allclose(w_plus.apply(off_diagonal), expected)
    assert np.allclose(apply_choi(w_plus.choi, off_diagonal, 2, 2), expected)
    print("  ✓ W2+ on |0><1| -> (1/3)|1><0|")

    out = apply_channel(depolarizing_channel(3), random_state(3, rng))
    assert np.allclose(out.matrix, np.eye(3) / 3)
    assert abs(np.trace(out.matrix) - 1) < 1e-10
    print("  ✓ fully depolarizing -> I/d")


def test_werner_holevo():
    """Werner-Holevo channels."""
    print("\nTesting werner_holevo...")

    ops = structural_operators(2)
    w_plus = werner_holevo(2, "+")
    assert np.allclose(w_plus.choi, 2 * ops.p_sym / 3)
    assert np.allclose(np.sort(np.linalg.eigvalsh(w_plus.choi)), [0, 2 / 3, 2 / 3, 2 / 3])
    print("  ✓ W2+ Choi = (2/3) P_sym with spectrum {0, 2/3, 2/3, 2/3}")

    rho = random_state(2, 7).matrix
    assert np.allclose(werner_holevo(2, "-").apply(rho), np.eye(2) - rho.T)
    print("  ✓ W2-(rho) = I - rho^T")

    for d in range(2, 7):
        for sign in "+-":
            ch = werner_holevo(d, sign)
            assert is_cptp(ch.choi, d, d)
            assert np.allclose(ch.apply(np.eye(d)) / d, np.eye(d) / d)
    print("  ✓ W+ and W- are CPTP and unital for d = 2..6")

    out = werner_holevo(3, "-").apply(np.diag([0.5, 0.5, 0.0]))
    assert np.allclose(out, np.diag([0.25, 0.25, 0.5]))
    print("  ✓ W3-(diag(1/2,1/2,0)) = diag(1/4,1/4,1/2)")


def test_dual_maps():
    """Conjugate, transpose and adjoint Choi operators."""
    print("\nTesting dual_maps...")

    h = unitary_channel(HADAMARD @ np.diag([1, 1j]))
    duals = dual_maps(h)
    u = HADAMARD @ np.diag([1, 1j])
    assert np.allclose(duals.adjoint_choi, unitary_channel(u.conj().T).choi)
    print("  ✓ adjoint of a unitary channel is the U^dagger channel")

    w_minus = werner_holevo(2, "-")
    assert np.allclose(dual_maps(w_minus).conj_choi, w_minus.choi)
    print("  ✓ W2- is invariant under conjugation")

    rho = DensityOperator(np.array([[0.6, 0.2 - 0.3j], [0.2 + 0.3j, 0.4]]))
    prep = state_preparation_channel(rho, 2)
    conj_prep = state_preparation_channel(DensityOperator(rho.matrix.T), 2)
    assert np.allclose(dual_maps(prep).conj_choi, conj_prep.choi)
    print("  ✓ conjugate of R^rho is R^(rho^T)")

    rng = np.random.default_rng(21)
    worst = 0.0
    for _ in range(100):
        d_in, d_out = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        rank = int(rng.integers(min_kraus_rank(d_in, d_out), d_in * d_out + 1))
        n = random_channel(d_in, d_out, rank, rng)
        duals = dual_maps(n)
        f = swap_operator(d_in, d_out)
        assert np.max(np.abs(duals.adjoint_choi - f @ n.choi.T @ f.conj().T)) < 1e-10

        # Conjugate of the transpose is the adjoint
        assert np.max(np.abs(duals.transpose_choi.T - duals.adjoint_choi)) < 1e-10

        rho = random_state(d_in, rng)
        o = random_observable(d_out, rng)
        forward = o.expectation(n.apply(rho.matrix))
        backward = np.real(np.trace(apply_choi(duals.adjoint_choi, o.matrix, d_out, d_in) @ rho.matrix))
        worst = max(worst, abs(forward - backward))
    assert worst < 1e-9
    print(f"  ✓ tr[O N(rho)] = tr[N^dagger(O) rho] on 100 random triples (max dev {worst:.1e})")


def test_random_channel():
    """Random channel generation."""
    print("\nTesting random_channel...")

    a = random_channel(2, 2, 3, 42)
    b = random_channel(2, 2, 3, 42)
    assert np.array_equal(a.choi, b.choi)
    print("  ✓ same seed gives identical Choi")

    u = random_channel(3, 3, 1, 4)
    k = u.kraus[0]
    assert np.allclose(k.conj().T @ k, np.eye(3))
    assert np.allclose(k @ k.conj().T, np.eye(3))
    print("  ✓ rank 1 with d_in = d_out is unitary")

    n = random_channel(2, 3, 4, 9)
    assert np.linalg.matrix_rank(n.choi, tol=1e-8) == 4
    print("  ✓ Choi rank equals kraus_rank")

    rng = np.random.default_rng(0)
    for _ in range(1000):
        assert is_cptp(random_channel(2, 2, 4, rng).choi, 2, 2)
    print("  ✓ 1000 draws at (2, 2, 4) pass is_cptp")

    for bad in (0, 5):
        try:
            random_channel(2, 2, bad, 0)
            assert False, f"rank {bad} accepted"
        except ValueError:
            pass
    print("  ✓ ranks outside [1, d_in d_out] rejected")


def test_is_cptp():
    """CPTP validation reports."""
    print("\nTesting is_cptp...")

    assert is_cptp(max_entangled(2), 2, 2)
    print("  ✓ Phi passes")

    report = is_cptp(swap_operator(2), 2, 2)
    assert not report
    assert np.isclose(report.min_eigenvalue, -1)
    assert report.constraint == "complete positivity"
    print("  ✓ swap fails with eigenvalue -1")

    tol = 1e-9
    perturbed = max_entangled(2) + 10 * tol * np.kron(np.eye(2), np.diag([1, 0]))
    report = is_cptp(perturbed, 2, 2, tol)
    assert not report
    assert report.constraint == "trace preservation"
    print("  ✓ TP perturbation of 10 tol fails")


def test_channel_validation():
    """Invariants enforced on construction."""
    print("\nTesting channel, state and observable validation...")

    try:
        QuantumChannel([np.sqrt(1.01) * np.eye(2)])
        assert False, "non-TP Kraus set accepted"
    except ValidationError as e:
        assert e.constraint == "trace preservation"
        assert abs(e.magnitude - 0.01) < 1e-12
        print("  ✓ sum K^dagger K = 1.01 I rejected with magnitude 0.01")

    try:
        DensityOperator(np.diag([0.6, 0.6]))
        assert False, "trace 1.2 accepted"
    except ValidationError as e:
        assert e.constraint == "unit trace"
        print("  ✓ trace-1.2 state rejected")

    try:
        Observable(np.diag([1.5, -1])).require_unit_range()
        assert False, "eigenvalue 1.5 accepted"
    except ValidationError as e:
        assert abs(e.magnitude - 0.5) < 1e-12
        print("  ✓ observable eigenvalue 1.5 rejected")

    assert is_unital(random_unital_channel(3, 4, 0))
    assert not is_unital(state_preparation_channel(DensityOperator(np.diag([1.0, 0.0])), 2))
    print("  ✓ is_unital separates mixed-unitary and replacement channels")

    composed = compose(werner_holevo(2, "+"), unitary_channel(HADAMARD))
    x = random_state(2, 3).matrix
    assert np.allclose(composed.apply(x), HADAMARD @ werner_holevo(2, "+").apply(x) @ HADAMARD)
    print("  ✓ composition applies the first channel first")


TESTS = [
    test_kraus_to_choi,
    test_choi_to_kraus,
    test_apply_channel,
    test_werner_holevo,
    test_dual_maps,
    test_random_channel,
    test_is_cptp,
    test_channel_validation,
]


def main():
    """Run all tests."""
    print("=" * 60)
    print("Channel Tests")
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
        print("All channel tests passed! ✓")
        return 0
    else:
        print("Some tests failed! ✗")
        return 1


if __name__ == "__main__":
    sys.exit(main())
