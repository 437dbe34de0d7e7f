#!/usr/bin/env python3
"""
Demo script showing dualchan backend functionality.

This script walks through the transpose, conjugate and Petz simulations
and the overhead certificates without going through the command line.
"""

import sys
import os

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import numpy as np

from backend.certificates import certify_base_norm
from backend.channels import DensityOperator, Observable, random_channel, random_state
from backend.conj_sampler import estimate_conjugate, quasiprob_weights
from backend.petz import PetzInstance, attempt_budget, estimate_petz
from backend.sampling import hoeffding_rounds
from backend.transpose_protocol import simulate_transpose

PAULI_Z = np.diag([1.0, -1.0])


def print_separator():
    """Print a separator line."""
    print("=" * 60)


def demo_transpose():
    """Demonstrate the post-selected transpose."""
    print_separator()
    print("TRANSPOSE SIMULATION DEMO")
    print_separator()

    channel = random_channel(2, 3, 3, seed=1)
    rho = random_state(3, seed=2)
    result = simulate_transpose(channel, rho)

    print(f"\nChannel: {channel}")
    print(f"Success probability: {result.success_probability:.6f}")
    if result.succeeded:
        print("Conditional state on A':\n")
        print(np.array2string(result.conditional_state.matrix, precision=4, suppress_small=True))


def demo_conjugate():
    """Demonstrate the quasi-probability conjugate estimator."""
    print_separator()
    print("CONJUGATE ESTIMATOR DEMO")
    print_separator()

    print("\nBranch decomposition for (d_A, d_B) = (2, 2):\n")
    sampler = quasiprob_weights(2, 2)
    for branch, weight in zip(sampler.branches, sampler.weights):
        print(f"  {branch.label}  p = {branch.probability:.4f}  w = {weight:+.4f}")
    print(f"\n  gamma = {sampler.gamma:g}")

    channel = random_channel(2, 2, 2, seed=3)
    rho = random_state(2, seed=4)
    rounds = hoeffding_rounds(0.1, 0.05, sampler.gamma)
    report = estimate_conjugate(channel, rho, Observable(PAULI_Z), rounds, seed=5)

    print(f"\nEstimating tr[Z N*(rho)] with {rounds} rounds...")
    print(f"  Estimate: {report.estimate:+.4f} ± {report.std_error:.4f}")
    print(f"  Oracle:   {report.oracle_value:+.4f}")
    print(f"  Time:     {report.elapsed:.3f} s")


def demo_petz():
    """Demonstrate the Petz recovery estimator."""
    print_separator()
    print("PETZ RECOVERY DEMO")
    print_separator()

    channel = random_channel(2, 2, 2, seed=6)
    sigma = DensityOperator(np.diag([0.7, 0.3]))
    inst = PetzInstance(channel, sigma, random_state(2, seed=7), Observable(PAULI_Z))

    budget = attempt_budget(inst, 0.2, 0.1)
    print(f"\nInstance: {inst}")
    print(f"  Range R:        {budget.value_range:.3f}")
    print(f"  Hoeffding part: {budget.hoeffding_part}")
    print(f"  Chernoff part:  {budget.chernoff_part} (eta = {budget.eta:.4f})")

    report = estimate_petz(inst, 0.2, 0.1, seed=8)
    print(f"\nEstimating tr[Z P(omega)] with {report.attempts} attempts...")
    print(f"  Estimate:   {report.estimate:+.4f} ± {report.std_error:.4f}")
    print(f"  Oracle:     {report.oracle_value:+.4f}")
    print(f"  Acceptance: {report.empirical_acceptance:.4f}")


def demo_certificates():
    """Show the certified optimal overheads."""
    print_separator()
    print("OPTIMAL OVERHEAD CERTIFICATES")
    print_separator()

    print("\n  d_A  d_B  primal  dual     pass")
    for d_a in (2, 3):
        for d_b in (2, 3):
            report = certify_base_norm(d_a, d_b, random_channels=5)
            status = "✓" if report.passed else "✗"
            print(f"  {d_a:3d}  {d_b:3d}  {report.primal_objective:6.3f}  "
                  f"{report.dual_objective:6.3f}   {status}")


def main():
    """Run all demos."""
    print("\n")
    print("╔" + "=" * 58 + "╗")
    print("║" + " " * 15 + "dualchan Backend Demo" + " " * 22 + "║")
    print("╚" + "=" * 58 + "╝")
    print()

    demo_transpose()
    demo_conjugate()
    demo_petz()
    demo_certificates()

    print_separator()
    print("Demo completed!")
    print_separator()
    print()


if __name__ == "__main__":
    main()
