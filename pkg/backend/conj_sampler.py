"""
Virtual comb for channel complex conjugation.

The conjugate map N* is the affine combination

    N* = sum_i w_i  W^{y_i}_{d_B} o N o W^{x_i}_{d_A}

over the branches (x, y) in ((+,+), (-,-), (+,-)) with weights
w = ((d_B+1)/2, (d_A-1)(d_B-1)/2, -d_A(d_B-1)/2). The weights sum to 1
and their l1 norm is gamma = d_A d_B - d_A + 1, the sampling overhead of
the Monte Carlo estimator of tr[O N*(rho)].

Comb Choi operators live on A'ABB' with dims (d_A, d_A, d_B, d_B).
"""

import logging
import time
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from backend.channels import (
    DensityOperator, Observable, QuantumChannel, apply_choi, dual_maps, werner_holevo,
)
from backend.errors import DimensionError, EstimationError
from backend.linalg import ComplexMatrix, embed, max_abs, partial_trace, swap_operator
from backend.sampling import (
    BlockTally, confidence_interval, hoeffding_rounds, run_blocks, sample_outcomes,
)

logger = logging.getLogger(__name__)

# Branch labels (x, y): W^x on the input side, W^y on the output side
BRANCH_SIGNS = (("+", "+"), ("-", "-"), ("+", "-"))


@dataclass(frozen=True)
class Branch:
    """One term of the quasi-probability decomposition."""
    probability: float
    sign: int
    pre_sign: str
    post_sign: str
    pre_channel: QuantumChannel
    post_channel: QuantumChannel

    @property
    def label(self) -> str:
        return f"({self.pre_sign},{self.post_sign})"


class QuasiSampler:
    """Branch probabilities, signs and Werner-Holevo channels for (d_A, d_B)."""

    def __init__(self, d_a: int, d_b: int, gamma: float, branches: Tuple[Branch, ...]):
        self.d_a = d_a
        self.d_b = d_b
        self.gamma = gamma
        self.branches = branches

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([b.probability for b in self.branches])

    @property
    def signs(self) -> np.ndarray:
        return np.array([b.sign for b in self.branches], dtype=np.float64)

    @property
    def weights(self) -> np.ndarray:
        """Signed affine weights s_i * gamma * p_i."""
        return self.signs * self.gamma * self.probabilities

    def branch_channel(self, n: QuantumChannel, index: int) -> "BranchMap":
        return BranchMap(self.branches[index], n)

    def __repr__(self):
        probs = ", ".join(f"{b.label}:{b.probability:.4f}" for b in self.branches)
        return f"QuasiSampler(d_a={self.d_a}, d_b={self.d_b}, gamma={self.gamma}, {probs})"


class BranchMap:
    """The physical branch channel W^y o N o W^x."""

    def __init__(self, branch: Branch, n: QuantumChannel):
        self.branch = branch
        self.channel = n
        self.d_in = n.d_in
        self.d_out = n.d_out
        self.kraus = [
            post @ k @ pre
            for pre in branch.pre_channel.kraus
            for k in n.kraus
            for post in branch.post_channel.kraus
        ]
        self.name = f"W{branch.post_sign} o {n.name} o W{branch.pre_sign}"

    def apply(self, x) -> ComplexMatrix:
        return self.branch.post_channel.apply(self.channel.apply(self.branch.pre_channel.apply(x)))


@dataclass
class VirtualCombChoi:
    """Choi operator of the conjugation comb together with its weighted decomposition."""
    d_a: int
    d_b: int
    choi: ComplexMatrix
    terms: Tuple[Tuple[float, ComplexMatrix], ...]

    @property
    def dims(self) -> List[int]:
        return [self.d_a, self.d_a, self.d_b, self.d_b]

    @property
    def l1_weight(self) -> float:
        return float(sum(abs(w) for w, _ in self.terms))


@dataclass
class EstimationReport:
    """Outcome of a quasi-probability estimation run."""
    estimate: float
    std_error: float
    rounds: int
    accepted: int
    seed: int
    oracle_value: float
    elapsed: float
    gamma: float
    ci_low: float
    ci_high: float

    @property
    def deviation(self) -> float:
        return abs(self.estimate - self.oracle_value)

    def to_dict(self) -> Dict:
        return asdict(self)


def _check_dims(d_a: int, d_b: int):
    if d_a < 2 or d_b < 2:
        raise DimensionError(f"comb dimensions must be at least 2, got ({d_a}, {d_b})")


def quasiprob_weights(d_a: int, d_b: int) -> QuasiSampler:
    """
    Branch probabilities p_i = |w_i| / gamma and signs (+, +, -).

    Args:
        d_a: input dimension of the channel
        d_b: output dimension of the channel

    Returns:
        QuasiSampler over the three branches
    """
    _check_dims(d_a, d_b)
    gamma = d_a * d_b - d_a + 1
    weights = ((d_b + 1) / 2, (d_a - 1) * (d_b - 1) / 2, -d_a * (d_b - 1) / 2)
    channels_a = {s: werner_holevo(d_a, s) for s in "+-"}
    channels_b = {s: werner_holevo(d_b, s) for s in "+-"}
    branches = tuple(
        Branch(
            probability=abs(w) / gamma,
            sign=1 if w >= 0 else -1,
            pre_sign=x,
            post_sign=y,
            pre_channel=channels_a[x],
            post_channel=channels_b[y],
        )
        for w, (x, y) in zip(weights, BRANCH_SIGNS)
    )
    return QuasiSampler(d_a, d_b, float(gamma), branches)


def virtual_comb_choi(d_a: int, d_b: int) -> VirtualCombChoi:
    """Comb Choi operator as the weighted sum of Werner-Holevo product terms."""
    sampler = quasiprob_weights(d_a, d_b)
    terms = tuple(
        (float(w), np.kron(b.pre_channel.choi, b.post_channel.choi))
        for w, b in zip(sampler.weights, sampler.branches)
    )
    choi = sum(w * c for w, c in terms)
    return VirtualCombChoi(d_a, d_b, choi, terms)


def closed_form_comb_choi(d_a: int, d_b: int) -> ComplexMatrix:
    """F_{A'A} (x) F_{BB'} + I/(d_A+1) - d_A (F_{A'A} (x) I_{BB'})/(d_A+1)."""
    _check_dims(d_a, d_b)
    f_a = swap_operator(d_a)
    f_b = swap_operator(d_b)
    identity_b = np.eye(d_b * d_b)
    total = d_a * d_a * d_b * d_b
    return (np.kron(f_a, f_b) + np.eye(total) / (d_a + 1)
            - d_a * np.kron(f_a, identity_b) / (d_a + 1))


def comb_constraint_violations(choi, d_a: int, d_b: int, normalization: float = 1.0) -> Dict[str, float]:
    """
    Max-entry deviations from the single-slot comb constraints.

    normalization: tr_{AB'} C must equal normalization * I_{A'B}
    causality: tr_{B'} C must equal tr_{BB'} C (x) I_B / d_B
    """
    dims = [d_a, d_a, d_b, d_b]
    marginal = partial_trace(choi, dims, keep=[0, 2])
    reduced = partial_trace(choi, dims, keep=[0, 1, 2])
    causal = np.kron(partial_trace(choi, dims, keep=[0, 1]), np.eye(d_b) / d_b)
    return {
        "normalization": max_abs(marginal - normalization * np.eye(d_a * d_b)),
        "causality": max_abs(reduced - causal),
    }


def apply_comb(comb: VirtualCombChoi, n: QuantumChannel) -> ComplexMatrix:
    """
    Link the comb with the channel's Choi operator.

    Returns tr_{AB}[C (I_{A'} (x) C_N^T (x) I_{B'})], the Choi operator on
    A'B' of the output map; for the conjugation comb it equals C_N^T.
    """
    if (n.d_in, n.d_out) != (comb.d_a, comb.d_b):
        raise DimensionError(
            f"channel ({n.d_in}->{n.d_out}) does not fit comb ({comb.d_a}, {comb.d_b})"
        )
    link = embed(n.choi.T, comb.dims, [1, 2])
    return partial_trace(comb.choi @ link, comb.dims, keep=[0, 3])


def contract_slot(choi, d_a: int, d_b: int, slot_ops) -> np.ndarray:
    """
    Batched slot contraction tr_{AB}[C (I (x) M (x) I)] for a stack of operators M on AB.

    Args:
        choi: operator on A'ABB'
        slot_ops: array of shape (k, d_A d_B, d_A d_B)

    Returns:
        Array of shape (k, d_A d_B, d_A d_B) of operators on A'B'
    """
    slot_ops = np.asarray(slot_ops, dtype=np.complex128)
    k = slot_ops.shape[0]
    c = np.asarray(choi).reshape([d_a, d_a, d_b, d_b] * 2)
    m = slot_ops.reshape(k, d_a, d_b, d_a, d_b)
    out = np.einsum("pabqPcdQ,jcdab->jpqPQ", c, m, optimize=True)
    return out.reshape(k, d_a * d_b, d_a * d_b)


def branch_output_states(sampler: QuasiSampler, n: QuantumChannel,
                         rho: DensityOperator) -> List[ComplexMatrix]:
    """Exact branch outputs W^y(N(W^x(rho))), one per branch."""
    return [sampler.branch_channel(n, i).apply(rho.matrix) for i in range(len(sampler.branches))]


def born_cdfs(states: List[ComplexMatrix], o: Observable) -> np.ndarray:
    """Cumulative outcome distributions of each state measured in o's eigenbasis."""
    v = o.eigenvectors
    rows = []
    for state in states:
        probs = np.clip(np.real(np.einsum("ji,jk,ki->i", v.conj(), state, v)), 0.0, None)
        total = probs.sum()
        rows.append(np.cumsum(probs / total) if total > 0 else np.linspace(0, 1, probs.size + 1)[1:])
    cdfs = np.array(rows)
    cdfs[:, -1] = 1.0
    return cdfs


def _check_estimator_inputs(n: QuantumChannel, rho: DensityOperator, o: Observable,
                            state_dim: int, observable_dim: int):
    if rho.dim != state_dim:
        raise DimensionError(f"state of dimension {rho.dim}, expected {state_dim}")
    if o.dim != observable_dim:
        raise DimensionError(f"observable of dimension {o.dim}, expected {observable_dim}")
    o.require_unit_range()


def estimate_conjugate(n: QuantumChannel, rho: DensityOperator, o: Observable,
                       rounds: int, seed: int, workers: Optional[int] = None) -> EstimationReport:
    """
    Monte Carlo estimate of tr[O N*(rho)].

    Each round samples a branch i with probability p_i, measures O on the
    exact branch output and records X = s_i * gamma * A(s). |X| <= gamma.

    Args:
        n: channel A -> B
        rho: state on A
        o: observable on B with eigenvalues in [-1, 1]
        rounds: number of rounds, at least 1
        seed: master seed of the block random streams
        workers: sampling threads (defaults to DUALCHAN_WORKERS or 1)

    Returns:
        EstimationReport with the exact oracle value for comparison
    """
    started = time.perf_counter()
    _check_estimator_inputs(n, rho, o, n.d_in, n.d_out)
    if rounds < 1:
        raise EstimationError(f"rounds must be at least 1, got {rounds}")

    sampler = quasiprob_weights(n.d_in, n.d_out)
    cdfs = born_cdfs(branch_output_states(sampler, n, rho), o)
    probabilities = sampler.probabilities
    values = sampler.signs[:, None] * sampler.gamma * o.eigenvalues[None, :]

    def draw(rng: np.random.Generator, size: int) -> BlockTally:
        branch = rng.choice(len(probabilities), size=size, p=probabilities)
        outcome = sample_outcomes(rng, branch, cdfs)
        x = values[branch, outcome]
        return BlockTally(
            count=size,
            total=float(x.sum()),
            total_sq=float(np.dot(x, x)),
            accepted=size,
            branch_counts=np.bincount(branch, minlength=len(probabilities)),
        )

    logger.debug("Conjugate estimator on %s: gamma=%s, rounds=%d", n.name, sampler.gamma, rounds)
    tally = run_blocks(rounds, seed, draw, workers)
    oracle = o.expectation(apply_choi(dual_maps(n).conj_choi, rho.matrix, n.d_in, n.d_out))
    low, high = confidence_interval(tally.mean, tally.std_error)
    return EstimationReport(
        estimate=tally.mean,
        std_error=tally.std_error,
        rounds=tally.count,
        accepted=tally.accepted,
        seed=int(seed),
        oracle_value=oracle,
        elapsed=time.perf_counter() - started,
        gamma=sampler.gamma,
        ci_low=low,
        ci_high=high,
    )
