"""
Block-parallel Monte Carlo engine.

Sample draws are split into fixed-size blocks. Block b always uses the
random stream derived from (seed, b), and block tallies are reduced in
block order, so results are identical for any number of workers.
"""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.stats import norm

from backend.errors import EstimationError

logger = logging.getLogger(__name__)

SAMPLING_BLOCK = 4096
WORKERS_ENV = "DUALCHAN_WORKERS"
CONFIDENCE_LEVEL = 0.95


@dataclass
class BlockTally:
    """Sufficient statistics of a batch of bounded samples."""
    count: int = 0
    total: float = 0.0
    total_sq: float = 0.0
    accepted: int = 0
    branch_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    stage_reached: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    stage_passed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def merge(self, other: "BlockTally") -> "BlockTally":
        def add(a, b):
            if a.size == 0:
                return b.copy()
            if b.size == 0:
                return a.copy()
            return a + b

        return BlockTally(
            count=self.count + other.count,
            total=self.total + other.total,
            total_sq=self.total_sq + other.total_sq,
            accepted=self.accepted + other.accepted,
            branch_counts=add(self.branch_counts, other.branch_counts),
            stage_reached=add(self.stage_reached, other.stage_reached),
            stage_passed=add(self.stage_passed, other.stage_passed),
        )

    @property
    def mean(self) -> float:
        return self.total / self.count

    @property
    def std_error(self) -> float:
        """Sample standard deviation (ddof=1) over sqrt(count); 0 for a single sample."""
        if self.count < 2:
            return 0.0
        variance = (self.total_sq - self.count * self.mean ** 2) / (self.count - 1)
        return math.sqrt(max(variance, 0.0) / self.count)


BlockDraw = Callable[[np.random.Generator, int], BlockTally]


def block_layout(total: int, block: int = SAMPLING_BLOCK) -> List[Tuple[int, int]]:
    """(block index, block size) pairs covering total draws."""
    return [(b, min(block, total - b * block)) for b in range((total + block - 1) // block)]


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Independent stream for one block, keyed by (seed, block index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(block)])))


def resolve_workers(workers: Optional[int] = None) -> int:
    """Worker count from the argument, then DUALCHAN_WORKERS, then 1."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                workers = int(env)
            except ValueError:
                logger.warning("Ignoring non-integer %s=%r", WORKERS_ENV, env)
                workers = 1
        else:
            workers = 1
    return max(1, int(workers))


def run_blocks(total: int, seed: int, draw: BlockDraw, workers: Optional[int] = None) -> BlockTally:
    """
    Draw total samples in blocks and reduce the tallies in block order.

    Args:
        total: number of draws, at least 1
        seed: master seed
        draw: callable producing the tally of one block from its generator and size
        workers: thread count (see resolve_workers)

    Returns:
        The merged tally
    """
    if total < 1:
        raise EstimationError(f"need at least one draw, got {total}")
    if seed is None:
        raise EstimationError("a seed is required")
    layout = block_layout(total)
    workers = resolve_workers(workers)

    def run(item):
        index, size = item
        return draw(block_rng(seed, index), size)

    logger.debug("Drawing %d samples in %d blocks on %d workers", total, len(layout), workers)
    if workers == 1 or len(layout) == 1:
        tallies = [run(item) for item in layout]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            tallies = list(pool.map(run, layout))

    result = BlockTally()
    for tally in tallies:
        result = result.merge(tally)
    return result


def confidence_interval(estimate: float, std_error: float,
                        level: float = CONFIDENCE_LEVEL) -> Tuple[float, float]:
    """Normal-approximation two-sided interval."""
    z = float(norm.ppf(0.5 + level / 2))
    return estimate - z * std_error, estimate + z * std_error


def sample_outcomes(rng: np.random.Generator, labels: np.ndarray,
                    cdfs: np.ndarray, u: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Inverse-CDF sampling of an outcome index for each label.

    Args:
        rng: generator used when u is not given
        labels: per-draw row index into cdfs
        cdfs: (n_labels, n_outcomes) cumulative distributions
        u: optional uniforms, one per draw

    Returns:
        Outcome indices
    """
    if u is None:
        u = rng.random(labels.size)
    outcomes = np.empty(labels.size, dtype=np.int64)
    last = cdfs.shape[1] - 1
    for label in range(cdfs.shape[0]):
        mask = labels == label
        if np.any(mask):
            outcomes[mask] = np.minimum(np.searchsorted(cdfs[label], u[mask], side="right"), last)
    return outcomes


def hoeffding_rounds(epsilon: float, delta: float, value_range: float) -> int:
    """
    Rounds for an average of variables bounded in [-R, R] to be within epsilon
    of its mean with probability at least 1 - delta: ceil(2 R^2 ln(2/delta) / epsilon^2).
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if not 0 < epsilon <= value_range:
        raise ValueError(f"epsilon must lie in (0, {value_range}], got {epsilon}")
    return math.ceil(2 * value_range ** 2 * math.log(2 / delta) / epsilon ** 2)


def chernoff_attempts(n: int, delta: float, eta: float) -> int:
    """
    Attempts M such that at least n of M Bernoulli(eta) trials succeed with
    probability at least 1 - delta: ceil((n + L + sqrt(L^2 + 2 n L)) / eta), L = ln(2/delta).
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    log_term = math.log(2 / delta)
    return math.ceil((n + log_term + math.sqrt(log_term ** 2 + 2 * n * log_term)) / eta)
