#!/usr/bin/env python3
"""
Simple tests to verify dualchan components.
"""

import sys
import os

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

MODULES = [
    ("backend.errors", ["DualChanError", "ValidationError", "EstimationError"]),
    ("backend.linalg", ["partial_trace", "structural_operators"]),
    ("backend.channels", ["QuantumChannel", "DensityOperator", "Observable", "dual_maps"]),
    ("backend.transpose_protocol", ["simulate_transpose"]),
    ("backend.sampling", ["run_blocks", "hoeffding_rounds", "chernoff_attempts"]),
    ("backend.conj_sampler", ["quasiprob_weights", "virtual_comb_choi", "estimate_conjugate"]),
    ("backend.petz", ["PetzInstance", "exact_petz", "estimate_petz", "estimate_adjoint"]),
    ("backend.certificates", ["certify_base_norm", "gell_mann_basis"]),
    ("cli.loaders", ["load_instance", "channel_from_json"]),
    ("cli.commands", ["run", "build_parser"]),
]


def test_imports():
    """Test that all modules can be imported."""
    print("Testing imports...")

    for name, attributes in MODULES:
        try:
            module = __import__(name, fromlist=attributes)
            missing = [a for a in attributes if not hasattr(module, a)]
            if missing:
                print(f"  ✗ {name}: missing {', '.join(missing)}")
                return False
            print(f"  ✓ {name}")
        except ImportError as e:
            print(f"  ✗ {name}: {e}")
            return False

    return True


def test_channel_basics():
    """Test channel construction and the conjugate map."""
    print("\nTesting channel basics...")

    import numpy as np
    from backend.channels import QuantumChannel, dual_maps, werner_holevo

    channel = QuantumChannel([np.eye(2)])
    print(f"  ✓ {channel!r} instantiated")

    w = werner_holevo(3, "+")
    assert np.allclose(dual_maps(w).conj_choi, w.choi)
    print("  ✓ Werner-Holevo channel is real")

    return True


def test_parser():
    """Test that every subcommand is registered."""
    print("\nTesting command parser...")

    from cli.commands import COMMANDS, build_parser

    parser = build_parser()
    for command in COMMANDS:
        assert command in parser.format_help()
    print(f"  ✓ {len(COMMANDS)} subcommands registered")

    return True


def main():
    """Run all tests."""
    print("=" * 50)
    print("dualchan Component Tests")
    print("=" * 50)

    all_passed = True

    if not test_imports():
        all_passed = False

    if not test_channel_basics():
        all_passed = False

    if not test_parser():
        all_passed = False

    print("\n" + "=" * 50)
    if all_passed:
        print("All tests passed! ✓")
        return 0
    else:
        print("Some tests failed! ✗")
        return 1


if __name__ == "__main__":
    sys.exit(main())
