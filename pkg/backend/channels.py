"""
Quantum channels, states and observables.

Channels are stored as Kraus operators together with their Choi operator
C = sum_ij |i><j| (x) N(|i><j|) (input factor first, unnormalized). The
three dual maps (complex conjugate, transpose, adjoint) are obtained as
fixed index permutations of C.
"""

from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional, Sequence

import numpy as np

from backend.errors import DimensionError, ValidationError
from backend.linalg import (
    HERMITIAN_TOL, ComplexMatrix, as_matrix, extreme_eigenvalues, hermitian_eigh,
    max_abs, partial_trace, structural_operators, swap_operator,
)

# Tolerance for complete positivity and trace preservation checks
CPTP_TOL = 1e-9

# Relative eigenvalue cutoff when turning a Choi operator back into Kraus operators
KRAUS_RANK_TOL = 1e-12


@dataclass
class CPTPReport:
    """Outcome of a CPTP check. Truthy when the channel is valid."""
    ok: bool
    min_eigenvalue: float
    tp_violation: float
    hermiticity_violation: float

    def __bool__(self) -> bool:
        return self.ok

    def _violations(self):
        return {
            "complete positivity": max(-self.min_eigenvalue, 0.0),
            "trace preservation": self.tp_violation,
            "Choi hermiticity": self.hermiticity_violation,
        }

    @property
    def constraint(self) -> str:
        """Name of the worst violated constraint."""
        violations = self._violations()
        return max(violations, key=violations.get)

    @property
    def magnitude(self) -> float:
        return max(self._violations().values())


class DualMaps(NamedTuple):
    """Choi operators of the conjugate, transpose and adjoint of a channel."""
    conj_choi: ComplexMatrix
    transpose_choi: ComplexMatrix
    adjoint_choi: ComplexMatrix


def kraus_to_choi(kraus: Sequence, d_in: int, d_out: int) -> ComplexMatrix:
    """
    Choi operator of the map X -> sum_k K_k X K_k^dagger.

    Args:
        kraus: operators of shape (d_out, d_in)
        d_in: input dimension
        d_out: output dimension

    Returns:
        (d_in*d_out) square matrix, input factor first
    """
    choi = np.zeros((d_in * d_out, d_in * d_out), dtype=np.complex128)
    for k in kraus:
        v = as_matrix(k).T.reshape(-1)
        choi += np.outer(v, v.conj())
    return choi


def choi_to_kraus(choi, d_in: int, d_out: int, tol: float = HERMITIAN_TOL) -> List[ComplexMatrix]:
    """
    Minimal Kraus decomposition of a positive semidefinite Choi operator.

    Eigenvalues at or below tol, or below KRAUS_RANK_TOL times the largest
    eigenvalue, count as zero; the Kraus count is the rank at that cutoff.
    """
    vals, vecs = hermitian_eigh(choi, tol)
    if vals.size and vals[0] < -max(tol, CPTP_TOL):
        raise ValidationError("complete positivity", -vals[0])
    cutoff = max(tol, KRAUS_RANK_TOL * max(float(vals[-1]), 0.0))
    kraus = []
    for val, vec in zip(vals[::-1], vecs.T[::-1]):
        if val <= cutoff:
            break
        kraus.append(np.sqrt(val) * vec.reshape(d_in, d_out).T)
    return kraus


def apply_choi(choi, x, d_in: int, d_out: int) -> ComplexMatrix:
    """Evaluate the linear map with Choi operator choi on x: tr_in[(x^T (x) I) C]."""
    x = as_matrix(x)
    if x.shape != (d_in, d_in):
        raise DimensionError(f"input of shape {x.shape} does not match d_in={d_in}")
    t = as_matrix(choi).reshape(d_in, d_out, d_in, d_out)
    return np.einsum("ij,iajb->ab", x, t)


def choi_of_map(fn: Callable[[ComplexMatrix], ComplexMatrix], d_in: int) -> ComplexMatrix:
    """Choi operator of an arbitrary linear map given as a Python callable."""
    blocks = []
    for i in range(d_in):
        row = []
        for j in range(d_in):
            e_ij = np.zeros((d_in, d_in), dtype=np.complex128)
            e_ij[i, j] = 1.0
            row.append(as_matrix(fn(e_ij)))
        blocks.append(row)
    return np.block(blocks)


def is_cptp(choi, d_in: int, d_out: int, tol: float = CPTP_TOL) -> CPTPReport:
    """
    Check complete positivity (C >= 0) and trace preservation (tr_out C = I).

    Never raises on an invalid channel; the report carries the violation.
    """
    choi = as_matrix(choi)
    if choi.shape != (d_in * d_out, d_in * d_out):
        raise DimensionError(f"Choi of shape {choi.shape} does not match ({d_in}, {d_out})")
    herm = max_abs(choi - choi.conj().T)
    lo, _ = extreme_eigenvalues(choi)
    tp = max_abs(partial_trace(choi, [d_in, d_out], keep=[0]) - np.eye(d_in))
    ok = herm <= tol and lo >= -tol and tp <= tol
    return CPTPReport(ok=ok, min_eigenvalue=lo, tp_violation=tp, hermiticity_violation=herm)


class DensityOperator:
    """A validated quantum state: Hermitian, positive semidefinite, unit trace."""

    def __init__(self, matrix, tol: float = HERMITIAN_TOL):
        self.matrix = as_matrix(matrix)
        vals, _ = hermitian_eigh(self.matrix, tol)
        if vals[0] < -tol:
            raise ValidationError("positive semidefiniteness", -vals[0])
        trace_error = abs(np.trace(self.matrix) - 1)
        if trace_error > tol:
            raise ValidationError("unit trace", trace_error)
        self.matrix = (self.matrix + self.matrix.conj().T) / 2
        self.eigenvalues = np.clip(vals, 0.0, None)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def rank(self) -> int:
        return int(np.sum(self.eigenvalues > HERMITIAN_TOL))

    def __repr__(self):
        return f"DensityOperator(dim={self.dim}, rank={self.rank})"


class Observable:
    """A Hermitian observable with its cached eigendecomposition."""

    def __init__(self, matrix, tol: float = HERMITIAN_TOL):
        self.matrix = as_matrix(matrix)
        self.eigenvalues, self.eigenvectors = hermitian_eigh(self.matrix, tol)
        self.matrix = (self.matrix + self.matrix.conj().T) / 2

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    def require_unit_range(self, tol: float = HERMITIAN_TOL):
        """Raise unless every eigenvalue lies in [-1, 1]."""
        excess = self.norm - 1.0
        if excess > tol:
            raise ValidationError("observable eigenvalues within [-1, 1]", excess)

    def expectation(self, state) -> float:
        rho = state.matrix if isinstance(state, DensityOperator) else as_matrix(state)
        return float(np.real(np.trace(self.matrix @ rho)))

    def __repr__(self):
        return f"Observable(dim={self.dim}, norm={self.norm:.6g})"


class QuantumChannel:
    """A CPTP map from a d_in to a d_out dimensional system."""

    def __init__(self, kraus: Sequence, d_in: Optional[int] = None,
                 d_out: Optional[int] = None, tol: float = CPTP_TOL,
                 name: Optional[str] = None):
        """
        Build and validate a channel from its Kraus operators.

        Args:
            kraus: non-empty sequence of (d_out, d_in) matrices
            d_in: input dimension (inferred from the first operator if omitted)
            d_out: output dimension (inferred likewise)
            tol: CPTP tolerance
            name: optional label used in logs and reports

        Raises:
            DimensionError: on inconsistent shapes
            ValidationError: if sum_k K_k^dagger K_k differs from I by more than tol
        """
        if len(kraus) == 0:
            raise DimensionError("a channel needs at least one Kraus operator")
        self.kraus = [as_matrix(k) for k in kraus]
        shape = self.kraus[0].shape
        self.d_out = shape[0] if d_out is None else int(d_out)
        self.d_in = shape[1] if d_in is None else int(d_in)
        for k in self.kraus:
            if k.shape != (self.d_out, self.d_in):
                raise DimensionError(
                    f"Kraus operator of shape {k.shape}, expected ({self.d_out}, {self.d_in})"
                )
        self.name = name or f"N[{self.d_in}->{self.d_out}]"

        completeness = sum(k.conj().T @ k for k in self.kraus)
        tp = max_abs(completeness - np.eye(self.d_in))
        if tp > tol:
            raise ValidationError("trace preservation", tp, self.name)
        self.choi = kraus_to_choi(self.kraus, self.d_in, self.d_out)

    @classmethod
    def from_choi(cls, choi, d_in: int, d_out: int, tol: float = CPTP_TOL,
                  name: Optional[str] = None) -> "QuantumChannel":
        """Build a channel from a Choi operator, validating it first."""
        report = is_cptp(choi, d_in, d_out, tol)
        if not report:
            raise ValidationError(report.constraint, report.magnitude, name or "")
        return cls(choi_to_kraus(choi, d_in, d_out), d_in, d_out, tol=tol, name=name)

    @property
    def kraus_rank(self) -> int:
        return len(self.kraus)

    def apply(self, x) -> ComplexMatrix:
        """Action on an arbitrary d_in x d_in operator."""
        x = as_matrix(x)
        if x.shape != (self.d_in, self.d_in):
            raise DimensionError(f"input of shape {x.shape} does not match d_in={self.d_in}")
        return sum(k @ x @ k.conj().T for k in self.kraus)

    def __repr__(self):
        return f"QuantumChannel({self.name}, kraus_rank={self.kraus_rank})"


def apply_channel(n: QuantumChannel, rho: DensityOperator) -> DensityOperator:
    """Output state N(rho)."""
    if rho.dim != n.d_in:
        raise DimensionError(f"state of dimension {rho.dim} does not match d_in={n.d_in}")
    return DensityOperator(n.apply(rho.matrix), tol=CPTP_TOL)


def compose(*channels: QuantumChannel) -> QuantumChannel:
    """Sequential composition, first argument applied first."""
    kraus = channels[0].kraus
    current_out = channels[0].d_out
    for ch in channels[1:]:
        if ch.d_in != current_out:
            raise DimensionError(f"cannot compose: output {current_out} into input {ch.d_in}")
        kraus = [b @ a for a in kraus for b in ch.kraus]
        current_out = ch.d_out
    name = " o ".join(ch.name for ch in reversed(channels))
    # Compress through the Choi operator to keep the Kraus count minimal
    choi = kraus_to_choi(kraus, channels[0].d_in, current_out)
    return QuantumChannel(choi_to_kraus(choi, channels[0].d_in, current_out),
                          channels[0].d_in, current_out, name=name)


def dual_maps(n: QuantumChannel) -> DualMaps:
    """
    Choi operators of N* (conjugate), N^T (transpose) and N^dagger (adjoint).

    The conjugate map has Kraus set {conj(K)} and Choi C^T; the transpose
    has Kraus set {K^T} and Choi F C F^dagger with F the swap of input and
    output; the adjoint combines both.
    """
    choi = n.choi
    f = swap_operator(n.d_in, n.d_out)
    return DualMaps(
        conj_choi=choi.T.copy(),
        transpose_choi=f @ choi @ f.conj().T,
        adjoint_choi=f @ choi.T @ f.conj().T,
    )


def werner_holevo(d: int, sign: str) -> QuantumChannel:
    """
    Werner-Holevo channel W_d^+ or W_d^- on C^d.

    Choi operator 2 P / (d +- 1) with P the symmetric (+) or antisymmetric (-)
    projector; its action is X -> (tr(X) I +- X^T) / (d +- 1).
    """
    if sign not in ("+", "-"):
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    if d < 2:
        raise DimensionError(f"Werner-Holevo channels need d >= 2, got {d}")
    ops = structural_operators(d)
    if sign == "+":
        choi = 2 * ops.p_sym / (d + 1)
    else:
        choi = 2 * ops.p_anti / (d - 1)
    return QuantumChannel.from_choi(choi, d, d, name=f"W{sign}_{d}")


def unitary_channel(u) -> QuantumChannel:
    u = as_matrix(u)
    return QuantumChannel([u], name=f"U[{u.shape[0]}]")


def depolarizing_channel(d_in: int, d_out: Optional[int] = None) -> QuantumChannel:
    """Fully depolarizing channel X -> tr(X) I / d_out."""
    d_out = d_in if d_out is None else d_out
    choi = np.eye(d_in * d_out, dtype=np.complex128) / d_out
    return QuantumChannel.from_choi(choi, d_in, d_out, name=f"D[{d_in}->{d_out}]")


def state_preparation_channel(rho: DensityOperator, d_in: int) -> QuantumChannel:
    """Replacement channel X -> tr(X) rho."""
    choi = np.kron(np.eye(d_in, dtype=np.complex128), rho.matrix)
    return QuantumChannel.from_choi(choi, d_in, rho.dim, name=f"Prep[{d_in}->{rho.dim}]")


def is_unital(n: QuantumChannel, tol: float = CPTP_TOL) -> bool:
    """True when N(I/d_in) = I/d_out."""
    return max_abs(n.apply(np.eye(n.d_in) / n.d_in) - np.eye(n.d_out) / n.d_out) <= tol


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _ginibre(rng: np.random.Generator, rows: int, cols: int) -> ComplexMatrix:
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def min_kraus_rank(d_in: int, d_out: int) -> int:
    """Fewest Kraus operators a channel d_in -> d_out can have."""
    return -(-d_in // d_out)


def random_channel(d_in: int, d_out: int, kraus_rank: int, seed) -> QuantumChannel:
    """
    Random channel from a Haar-like isometry V: C^d_in -> C^(d_out*r).

    The Kraus operators are the d_out-row blocks of V. The result depends
    only on the arguments.
    """
    if d_in < 1 or d_out < 1:
        raise DimensionError(f"dimensions must be positive, got ({d_in}, {d_out})")
    if not 1 <= kraus_rank <= d_in * d_out:
        raise ValueError(f"kraus_rank must lie in [1, {d_in * d_out}], got {kraus_rank}")
    if kraus_rank < min_kraus_rank(d_in, d_out):
        raise ValueError(
            f"kraus_rank {kraus_rank} too small for an isometry from {d_in} into {d_out}"
        )
    rng = _rng(seed)
    v, r = np.linalg.qr(_ginibre(rng, d_out * kraus_rank, d_in))
    # Fix the phase ambiguity of QR so the distribution is unitarily invariant
    v = v * (np.diag(r) / np.abs(np.diag(r)))
    kraus = [v[k * d_out:(k + 1) * d_out, :] for k in range(kraus_rank)]
    return QuantumChannel(kraus, d_in, d_out, name=f"Rand[{d_in}->{d_out},r={kraus_rank}]")


def random_unitary(d: int, seed) -> ComplexMatrix:
    rng = _rng(seed)
    q, r = np.linalg.qr(_ginibre(rng, d, d))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_unital_channel(d: int, n_unitaries: int, seed) -> QuantumChannel:
    """Random mixed-unitary channel sum_k p_k U_k X U_k^dagger."""
    rng = _rng(seed)
    weights = rng.dirichlet(np.ones(n_unitaries))
    kraus = [np.sqrt(p) * random_unitary(d, rng) for p in weights]
    return QuantumChannel(kraus, d, d, name=f"MixU[{d},{n_unitaries}]")


def random_state(d: int, seed, rank: Optional[int] = None) -> DensityOperator:
    """Random density operator G G^dagger / tr(G G^dagger) with G a d x rank Ginibre matrix."""
    rng = _rng(seed)
    g = _ginibre(rng, d, d if rank is None else rank)
    rho = g @ g.conj().T
    return DensityOperator(rho / np.trace(rho).real)


def random_pure_state(d: int, seed) -> DensityOperator:
    return random_state(d, seed, rank=1)


def random_observable(d: int, seed) -> Observable:
    """Random Hermitian observable rescaled to have spectral norm 1."""
    rng = _rng(seed)
    g = _ginibre(rng, d, d)
    h = (g + g.conj().T) / 2
    return Observable(h / np.max(np.abs(np.linalg.eigvalsh(h))))
