"""
Petz recovery map: exact oracle and post-selected quasi-probability estimator.

The Petz map of a channel N with prior sigma is

    P(Y) = sigma^{1/2} N^dagger(N(sigma)^{-1/2} Y N(sigma)^{-1/2}) sigma^{1/2}.

The estimator writes N^dagger = (N*)^T, realizes N* with the virtual comb
and the transpose with post-selected teleportation, and simulates the two
block encodings (of N(sigma)^{-1/2} and sigma^{1/2}) as subnormalized CP
conjugations. Every attempt passes three post-selection stages in turn;
on acceptance it records s_i * gamma * d_A * d_B * c1^2 * c2^2 * A(s),
otherwise 0, which is an unbiased estimator of tr[O P(omega)].
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np

from backend.channels import (
    CPTP_TOL, DensityOperator, Observable, QuantumChannel, apply_choi, choi_of_map, dual_maps,
)
from backend.conj_sampler import born_cdfs, quasiprob_weights
from backend.errors import DimensionError, EstimationError
from backend.linalg import ComplexMatrix, hermitian_eigh, max_abs, partial_trace, psd_power
from backend.sampling import (
    BlockTally, chernoff_attempts, confidence_interval, hoeffding_rounds, run_blocks,
    sample_outcomes,
)
from backend.transpose_protocol import teleport_unnormalized

logger = logging.getLogger(__name__)

# Eigenvalues of N(sigma) at or below this define its kernel
SUPPORT_TOL = 1e-10

BUDGET_POLICIES = ("max", "chernoff", "hoeffding")


class PetzInstance:
    """A channel, prior, input state and observable for the Petz functional."""

    def __init__(self, channel: QuantumChannel, sigma: DensityOperator,
                 omega: DensityOperator, observable: Observable,
                 support_tol: float = SUPPORT_TOL):
        if sigma.dim != channel.d_in:
            raise DimensionError(f"prior of dimension {sigma.dim}, expected {channel.d_in}")
        if omega.dim != channel.d_out:
            raise DimensionError(f"input of dimension {omega.dim}, expected {channel.d_out}")
        if observable.dim != channel.d_in:
            raise DimensionError(f"observable of dimension {observable.dim}, expected {channel.d_in}")
        self.channel = channel
        self.sigma = sigma
        self.omega = omega
        self.observable = observable
        self.support_tol = support_tol

        self.n_sigma = channel.apply(sigma.matrix)
        vals, vecs = hermitian_eigh(self.n_sigma, CPTP_TOL)
        support = vals > support_tol
        if not np.any(support):
            raise EstimationError("N(sigma) vanishes within the support tolerance")
        self.inv_sqrt = psd_power(self.n_sigma, -0.5, support_tol)
        self.sigma_sqrt = psd_power(sigma.matrix, 0.5)
        self.support_projector = vecs[:, support] @ vecs[:, support].conj().T
        self.support_restricted = bool(not np.all(support))

        # Block-encoding subnormalizations: c1 = ||N(sigma)^{-1/2}||, c2 = ||sigma^{1/2}||
        self.c1_sq = float(1.0 / vals[support].min())
        self.c2_sq = float(sigma.eigenvalues.max())

        outside = np.eye(channel.d_out) - self.support_projector
        self.omega_leakage = float(np.real(np.trace(omega.matrix @ outside)))
        if self.support_restricted:
            logger.warning("N(sigma) is rank deficient (rank %d of %d); Petz map restricted to its support",
                           int(support.sum()), channel.d_out)
        if self.omega_leakage > support_tol:
            logger.warning("omega has weight %.3g outside the support of N(sigma)", self.omega_leakage)

    @property
    def d_a(self) -> int:
        return self.channel.d_in

    @property
    def d_b(self) -> int:
        return self.channel.d_out

    def __repr__(self):
        flag = ", support-restricted" if self.support_restricted else ""
        return f"PetzInstance({self.channel.name}{flag})"


class PetzMap:
    """Linear map B -> A held by its Choi operator."""

    def __init__(self, choi: ComplexMatrix, d_in: int, d_out: int, support_restricted: bool):
        self.choi = choi
        self.d_in = d_in
        self.d_out = d_out
        self.support_restricted = support_restricted

    def apply(self, y) -> ComplexMatrix:
        return apply_choi(self.choi, y, self.d_in, self.d_out)

    def trace_preservation_error(self) -> float:
        return max_abs(partial_trace(self.choi, [self.d_in, self.d_out], keep=[0]) - np.eye(self.d_in))

    def __repr__(self):
        return f"PetzMap({self.d_in}->{self.d_out}, support_restricted={self.support_restricted})"


@dataclass
class BranchAcceptance:
    """Exact acceptance probabilities of the three post-selection stages per branch."""
    block_encoding: float
    teleport: np.ndarray
    final: np.ndarray
    teleport_bounds: np.ndarray

    @property
    def joint(self) -> np.ndarray:
        return self.block_encoding * self.teleport * self.final


@dataclass
class AttemptBudget:
    hoeffding_part: int
    chernoff_part: int
    total: int
    value_range: float
    eta: float


@dataclass
class PetzEstimationReport:
    """Outcome of a post-selected estimation run."""
    estimate: float
    std_error: float
    attempts: int
    accepted: int
    empirical_acceptance: float
    eta_bound: float
    seed: int
    oracle_value: float
    elapsed: float
    value_range: float
    support_restricted: bool
    ci_low: float
    ci_high: float
    branch_sampled: List[int] = field(default_factory=list)
    teleport_reached: List[int] = field(default_factory=list)
    teleport_accepted: List[int] = field(default_factory=list)

    @property
    def deviation(self) -> float:
        return abs(self.estimate - self.oracle_value)

    @property
    def teleport_acceptance(self) -> List[float]:
        """Empirical per-branch acceptance of the teleportation stage."""
        return [a / r if r else 0.0 for a, r in zip(self.teleport_accepted, self.teleport_reached)]

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class _PostselectionPlan:
    probabilities: np.ndarray
    block_encoding: float
    teleport: np.ndarray
    final: np.ndarray
    cdfs: np.ndarray
    values: np.ndarray
    value_range: float


def exact_petz(n: QuantumChannel, sigma: DensityOperator, tol: float = SUPPORT_TOL) -> PetzMap:
    """
    Petz recovery map of (sigma, N) as an explicit Choi operator on B (x) A.

    N(sigma)^{-1/2} is taken on its support; a rank-deficient N(sigma) is
    flagged on the returned map rather than rejected.
    """
    if sigma.dim != n.d_in:
        raise DimensionError(f"prior of dimension {sigma.dim}, expected {n.d_in}")
    n_sigma = n.apply(sigma.matrix)
    inv_sqrt = psd_power(n_sigma, -0.5, tol)
    sigma_sqrt = psd_power(sigma.matrix, 0.5)
    adjoint = dual_maps(n).adjoint_choi

    def recover(y):
        return sigma_sqrt @ apply_choi(adjoint, inv_sqrt @ y @ inv_sqrt, n.d_out, n.d_in) @ sigma_sqrt

    vals = np.linalg.eigvalsh((n_sigma + n_sigma.conj().T) / 2)
    restricted = bool(np.any(vals <= tol))
    return PetzMap(choi_of_map(recover, n.d_out), n.d_out, n.d_in, restricted)


def petz_expectation_oracle(inst: PetzInstance) -> float:
    """Exact tr[O P(omega)]."""
    recovered = exact_petz(inst.channel, inst.sigma, inst.support_tol).apply(inst.omega.matrix)
    value = np.trace(inst.observable.matrix @ recovered)
    if abs(value.imag) > 1e-10:
        logger.warning("Petz functional has imaginary residue %.3g", value.imag)
    return float(value.real)


def acceptance_bound(n: QuantumChannel):
    """
    Lower bound eta on the teleportation-stage acceptance, with zeta_max.

    zeta_max is the largest eigenvalue of N(I/d_A) and
    eta = min(1 / (d_B (d_A + 1)), (1 - zeta_max) / (d_B (d_A - 1))).
    """
    d_a, d_b = n.d_in, n.d_out
    if d_a < 2:
        raise DimensionError(f"acceptance bound needs d_A >= 2, got {d_a}")
    zeta = float(np.linalg.eigvalsh(n.apply(np.eye(d_a) / d_a))[-1])
    eta = min(1 / (d_b * (d_a + 1)), (1 - zeta) / (d_b * (d_a - 1)))
    return eta, zeta


def teleport_lower_bounds(n: QuantumChannel) -> np.ndarray:
    """
    Per-branch lower bounds on the teleportation-stage acceptance.

    For branch (x, y) the exact acceptance is
    tr[(I + y N(I/d_A)) K] / (d_B (d_B + y) tr K), bounded below by
    1 / (d_B (d_B + 1)) for y = + and (1 - zeta_max) / (d_B (d_B - 1)) for y = -.
    """
    _, zeta = acceptance_bound(n)
    d_b = n.d_out
    sampler = quasiprob_weights(n.d_in, d_b)
    return np.array([
        1 / (d_b * (d_b + 1)) if b.post_sign == "+" else (1 - zeta) / (d_b * (d_b - 1))
        for b in sampler.branches
    ])


def _petz_plan(inst: PetzInstance) -> _PostselectionPlan:
    n = inst.channel
    sampler = quasiprob_weights(inst.d_a, inst.d_b)
    k = inst.inv_sqrt @ inst.omega.matrix @ inst.inv_sqrt / inst.c1_sq
    first = float(np.real(np.trace(k)))
    if first <= inst.support_tol:
        raise EstimationError(
            f"omega has numerically zero overlap with the support of N(sigma) (acceptance {first:.3g})"
        )

    teleport, final, finals = [], [], []
    for i in range(len(sampler.branches)):
        t = teleport_unnormalized(sampler.branch_channel(n, i), k)
        t_trace = float(np.real(np.trace(t)))
        f = inst.sigma_sqrt @ t @ inst.sigma_sqrt / inst.c2_sq
        f_trace = float(np.real(np.trace(f)))
        teleport.append(min(max(t_trace / first, 0.0), 1.0))
        final.append(min(max(f_trace / t_trace, 0.0), 1.0) if t_trace > 0 else 0.0)
        finals.append(f)

    scale = sampler.gamma * inst.d_a * inst.d_b * inst.c1_sq * inst.c2_sq
    return _PostselectionPlan(
        probabilities=sampler.probabilities,
        block_encoding=min(first, 1.0),
        teleport=np.array(teleport),
        final=np.array(final),
        cdfs=born_cdfs(finals, inst.observable),
        values=sampler.signs[:, None] * scale * inst.observable.eigenvalues[None, :],
        value_range=scale,
    )


def _postselected_draw(plan: _PostselectionPlan):
    branches = plan.probabilities.size

    def draw(rng: np.random.Generator, size: int) -> BlockTally:
        branch = rng.choice(branches, size=size, p=plan.probabilities)
        u = rng.random((4, size))
        encoded = u[0] < plan.block_encoding
        teleported = encoded & (u[1] < plan.teleport[branch])
        accepted = teleported & (u[2] < plan.final[branch])
        outcome = sample_outcomes(rng, branch, plan.cdfs, u[3])
        x = np.where(accepted, plan.values[branch, outcome], 0.0)
        return BlockTally(
            count=size,
            total=float(x.sum()),
            total_sq=float(np.dot(x, x)),
            accepted=int(accepted.sum()),
            branch_counts=np.bincount(branch, minlength=branches),
            stage_reached=np.bincount(branch[encoded], minlength=branches),
            stage_passed=np.bincount(branch[teleported], minlength=branches),
        )

    return draw


def _report(tally: BlockTally, plan: _PostselectionPlan, eta: float, seed: int, oracle: float,
            started: float, support_restricted: bool) -> PetzEstimationReport:
    low, high = confidence_interval(tally.mean, tally.std_error)
    return PetzEstimationReport(
        estimate=tally.mean,
        std_error=tally.std_error,
        attempts=tally.count,
        accepted=tally.accepted,
        empirical_acceptance=tally.accepted / tally.count,
        eta_bound=eta,
        seed=int(seed),
        oracle_value=oracle,
        elapsed=time.perf_counter() - started,
        value_range=plan.value_range,
        support_restricted=support_restricted,
        ci_low=low,
        ci_high=high,
        branch_sampled=[int(c) for c in tally.branch_counts],
        teleport_reached=[int(c) for c in tally.stage_reached],
        teleport_accepted=[int(c) for c in tally.stage_passed],
    )


def branch_acceptance(inst: PetzInstance) -> BranchAcceptance:
    plan = _petz_plan(inst)
    return BranchAcceptance(
        block_encoding=plan.block_encoding,
        teleport=plan.teleport,
        final=plan.final,
        teleport_bounds=teleport_lower_bounds(inst.channel),
    )


def attempt_budget(inst: PetzInstance, epsilon: float, delta: float,
                   policy: str = "max") -> AttemptBudget:
    """
    Number of attempts for an (epsilon, delta) estimate.

    The failure probability is split evenly. The Hoeffding part bounds the
    rescaled variables in [-R, R] with R = gamma d_A d_B c1^2 c2^2; the
    Chernoff part guarantees enough teleportation-stage acceptances for a
    gamma-range average, using the smaller of eta and the per-branch bounds.

    Only the "chernoff" count grows like (d_A d_B)^3 for unital channels.
    The default "max" is usually set by the Hoeffding part, which grows
    with R and with the spectra of sigma and N(sigma) through c1 and c2.

    Args:
        policy: "max" (both guarantees), "chernoff" or "hoeffding"
    """
    if policy not in BUDGET_POLICIES:
        raise ValueError(f"unknown budget policy {policy!r}; expected one of {BUDGET_POLICIES}")
    if not 0 < epsilon < 1 or not 0 < delta < 1:
        raise ValueError(f"epsilon and delta must lie in (0, 1), got ({epsilon}, {delta})")
    gamma = quasiprob_weights(inst.d_a, inst.d_b).gamma
    value_range = gamma * inst.d_a * inst.d_b * inst.c1_sq * inst.c2_sq
    eta, _ = acceptance_bound(inst.channel)
    eta = min(eta, float(teleport_lower_bounds(inst.channel).min()))
    if eta <= 0:
        raise EstimationError("acceptance bound is zero; N(I/d_A) is pure")

    hoeffding_part = hoeffding_rounds(epsilon, delta / 2, value_range)
    chernoff_part = chernoff_attempts(hoeffding_rounds(epsilon, delta / 2, gamma), delta / 2, eta)
    total = {
        "max": max(hoeffding_part, chernoff_part),
        "chernoff": chernoff_part,
        "hoeffding": hoeffding_part,
    }[policy]
    return AttemptBudget(hoeffding_part, chernoff_part, total, value_range, eta)


def estimate_petz(inst: PetzInstance, epsilon: float, delta: float, seed: int,
                  workers: Optional[int] = None, budget: str = "max",
                  attempts: Optional[int] = None) -> PetzEstimationReport:
    """
    Post-selected Monte Carlo estimate of tr[O P(omega)].

    Args:
        inst: validated instance; its observable must have eigenvalues in [-1, 1]
        epsilon: target accuracy
        delta: target failure probability
        seed: master seed
        workers: sampling threads
        budget: attempt budget policy (see attempt_budget)
        attempts: explicit attempt count overriding the budget

    Returns:
        PetzEstimationReport including the exact oracle value
    """
    started = time.perf_counter()
    inst.observable.require_unit_range()
    plan = _petz_plan(inst)
    planned = attempt_budget(inst, epsilon, delta, budget)
    total = planned.total if attempts is None else int(attempts)
    if total < 1:
        raise EstimationError(f"attempts must be at least 1, got {total}")
    logger.debug("Petz estimator on %s: %d attempts (hoeffding %d, chernoff %d), R=%.6g",
                 inst.channel.name, total, planned.hoeffding_part, planned.chernoff_part,
                 planned.value_range)

    tally = run_blocks(total, seed, _postselected_draw(plan), workers)
    eta, _ = acceptance_bound(inst.channel)
    return _report(tally, plan, eta, seed, petz_expectation_oracle(inst), started,
                   inst.support_restricted)


def estimate_adjoint(n: QuantumChannel, rho: DensityOperator, o: Observable, rounds: int,
                     seed: int, workers: Optional[int] = None) -> PetzEstimationReport:
    """
    Monte Carlo estimate of tr[O N^dagger(rho)] through the virtual conjugate
    followed by the post-selected transpose.

    Args:
        n: channel A -> B
        rho: state on B
        o: observable on A with eigenvalues in [-1, 1]
        rounds: number of attempts
        seed: master seed
    """
    started = time.perf_counter()
    if rho.dim != n.d_out:
        raise DimensionError(f"state of dimension {rho.dim}, expected {n.d_out}")
    if o.dim != n.d_in:
        raise DimensionError(f"observable of dimension {o.dim}, expected {n.d_in}")
    o.require_unit_range()
    if rounds < 1:
        raise EstimationError(f"rounds must be at least 1, got {rounds}")

    sampler = quasiprob_weights(n.d_in, n.d_out)
    teleported = [teleport_unnormalized(sampler.branch_channel(n, i), rho.matrix)
                  for i in range(len(sampler.branches))]
    scale = sampler.gamma * n.d_in * n.d_out
    plan = _PostselectionPlan(
        probabilities=sampler.probabilities,
        block_encoding=1.0,
        teleport=np.array([min(max(float(np.real(np.trace(t))), 0.0), 1.0) for t in teleported]),
        final=np.ones(len(teleported)),
        cdfs=born_cdfs(teleported, o),
        values=sampler.signs[:, None] * scale * o.eigenvalues[None, :],
        value_range=scale,
    )
    tally = run_blocks(rounds, seed, _postselected_draw(plan), workers)
    oracle = o.expectation(apply_choi(dual_maps(n).adjoint_choi, rho.matrix, n.d_out, n.d_in))
    eta, _ = acceptance_bound(n)
    return _report(tally, plan, eta, seed, oracle, started, False)
