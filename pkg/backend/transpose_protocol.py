"""
Probabilistic transpose simulation by teleportation.

One query to N: prepare Phi/d_A on A'A and the input on B', send A
through N, then post-select BB' onto the normalized maximally entangled
projector. On success A' holds N^T(rho) / tr[N^T(rho)]; the success
probability is tr[N^T(rho)] / (d_A d_B), which is 1/d^2 for unital channels
with d_A = d_B = d.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from backend.channels import DensityOperator, QuantumChannel, dual_maps, apply_choi
from backend.errors import DimensionError
from backend.linalg import ComplexMatrix, as_matrix, max_entangled, partial_trace

logger = logging.getLogger(__name__)

# Below this success probability no conditional state is produced
MIN_SUCCESS_PROBABILITY = 1e-12


@dataclass
class TransposeResult:
    """Outcome of one transpose simulation."""
    success_probability: float
    unnormalized: ComplexMatrix
    conditional_state: Optional[DensityOperator]

    @property
    def succeeded(self) -> bool:
        return self.conditional_state is not None


def teleport_unnormalized(n: QuantumChannel, x) -> ComplexMatrix:
    """
    Unnormalized post-selected operator on A' for an arbitrary input x on B'.

    Equals N^T(x) / (d_A d_B); the trace is the success probability when x
    is a state.
    """
    d_a, d_b = n.d_in, n.d_out
    x = as_matrix(x)
    if x.shape != (d_b, d_b):
        raise DimensionError(f"input of shape {x.shape} does not match d_out={d_b}")
    identity_a = np.eye(d_a, dtype=np.complex128)
    identity_b = np.eye(d_b, dtype=np.complex128)

    # A' A B'
    state = np.kron(max_entangled(d_a) / d_a, x)

    # N on A turns it into A' B B'
    after = np.zeros((d_a * d_b * d_b,) * 2, dtype=np.complex128)
    for k in n.kraus:
        lifted = np.kron(np.kron(identity_a, k), identity_b)
        after += lifted @ state @ lifted.conj().T

    projector = np.kron(identity_a, max_entangled(d_b) / d_b)
    return partial_trace(projector @ after, [d_a, d_b, d_b], keep=[0])


def transpose_output(n: QuantumChannel, x) -> ComplexMatrix:
    """Closed form N^T(x) computed from the transpose Choi operator."""
    return apply_choi(dual_maps(n).transpose_choi, x, n.d_out, n.d_in)


def success_probability(n: QuantumChannel, rho: DensityOperator) -> float:
    """Post-selection probability tr[N^T(rho)] / (d_A d_B), clipped to [0, 1]."""
    p = float(np.real(np.trace(teleport_unnormalized(n, rho.matrix))))
    return min(max(p, 0.0), 1.0)


def simulate_transpose(n: QuantumChannel, rho: DensityOperator) -> TransposeResult:
    """
    Run the teleportation circuit on rho.

    Args:
        n: channel from A to B
        rho: state on B' (dimension d_B)

    Returns:
        TransposeResult; conditional_state is None when the post-selection
        probability is numerically zero
    """
    if rho.dim != n.d_out:
        raise DimensionError(f"state of dimension {rho.dim} does not match d_out={n.d_out}")
    unnormalized = teleport_unnormalized(n, rho.matrix)
    p_suc = min(max(float(np.real(np.trace(unnormalized))), 0.0), 1.0)
    if p_suc <= MIN_SUCCESS_PROBABILITY:
        logger.warning("Transpose post-selection failed for %s (p=%.3g)", n.name, p_suc)
        return TransposeResult(p_suc, unnormalized, None)
    state = DensityOperator(unnormalized / p_suc, tol=1e-9)
    logger.debug("Transpose simulation of %s succeeded with p=%.6g", n.name, p_suc)
    return TransposeResult(p_suc, unnormalized, state)
