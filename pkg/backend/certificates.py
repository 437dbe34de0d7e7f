"""
Optimality certificates for the conjugation comb.

The smallest l1 weight of any decomposition of a single-slot virtual comb
realizing channel conjugation is d_A d_B - d_A + 1. This module builds an
explicit primal solution (a pair of scaled physical combs) and an explicit
dual solution of the underlying semidefinite program and checks every
constraint numerically; matching objectives certify the value.

Operators on the comb live on A'ABB' with dims (d_A, d_A, d_B, d_B).
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np

from backend.channels import min_kraus_rank, random_channel, random_pure_state, werner_holevo
from backend.conj_sampler import comb_constraint_violations, contract_slot, quasiprob_weights
from backend.errors import DimensionError
from backend.linalg import (
    ComplexMatrix, embed, extreme_eigenvalues, max_abs, partial_trace, permute_systems,
    psd_power,
)

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9

# Random channels used to cross-check reproduction beyond the basis
RANDOM_CHECK_CHANNELS = 20


class HermitianBasis:
    """
    Generalized Gell-Mann basis of d x d Hermitian matrices.

    Ordering: I/sqrt(d); the d-1 diagonal elements; the symmetric
    off-diagonal elements (|j><k| + |k><j|)/sqrt(2) for j < k; the
    antisymmetric ones (-i|j><k| + i|k><j|)/sqrt(2) for j < k. The m-th
    diagonal element (m = 1..d-1) has entries 1 at indices 0..m-1 and -m at
    index m, scaled by 1/sqrt(m(m+1)).
    """

    def __init__(self, d: int):
        if d < 2:
            raise DimensionError(f"basis dimension must be at least 2, got {d}")
        self.d = d
        elements = [np.eye(d, dtype=np.complex128) / np.sqrt(d)]
        for m in range(1, d):
            diag = np.zeros(d, dtype=np.complex128)
            diag[:m] = 1.0
            diag[m] = -m
            elements.append(np.diag(diag) / np.sqrt(m * (m + 1)))
        pairs = [(j, k) for j in range(d) for k in range(j + 1, d)]
        for j, k in pairs:
            e = np.zeros((d, d), dtype=np.complex128)
            e[j, k] = e[k, j] = 1.0
            elements.append(e / np.sqrt(2))
        for j, k in pairs:
            e = np.zeros((d, d), dtype=np.complex128)
            e[j, k] = -1j
            e[k, j] = 1j
            elements.append(e / np.sqrt(2))
        self.elements = elements

    def __len__(self):
        return len(self.elements)

    def __getitem__(self, index: int) -> ComplexMatrix:
        return self.elements[index]

    def gram(self) -> np.ndarray:
        stack = np.array(self.elements)
        return np.einsum("iab,jab->ij", stack.conj(), stack)


@dataclass
class PrimalCertificate:
    d_a: int
    d_b: int
    c1: ComplexMatrix
    c2: ComplexMatrix
    p1_hat: float
    p2_hat: float

    @property
    def objective(self) -> float:
        return self.p1_hat + self.p2_hat


@dataclass
class DualCertificate:
    d_a: int
    d_b: int
    x: ComplexMatrix
    g: List[ComplexMatrix]
    deltas: List[ComplexMatrix]
    z1: ComplexMatrix
    z2: ComplexMatrix
    y1: ComplexMatrix
    y2: ComplexMatrix

    def objective(self) -> float:
        d = depolarizing_choi(self.d_a, self.d_b)
        value = np.trace(self.x @ d.T)
        value += sum(np.trace(g @ delta.T) for g, delta in zip(self.g, self.deltas))
        return float(np.real(value))


@dataclass
class CertificateReport:
    d_a: int
    d_b: int
    primal_objective: float
    dual_objective: float
    expected: float
    tol: float
    violations: Dict[str, float] = field(default_factory=dict)
    passed: bool = False

    @property
    def max_violation(self) -> float:
        return max(self.violations.values()) if self.violations else 0.0

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["pass"] = data.pop("passed")
        data["max_violation"] = self.max_violation
        return data


def gell_mann_basis(d: int) -> HermitianBasis:
    return HermitianBasis(d)


def _kernel_basis(d_a: int, d_b: int):
    """(alpha, Delta) pairs spanning the kernel of tr_B."""
    basis_a = gell_mann_basis(d_a)
    basis_b = gell_mann_basis(d_b)
    return [
        (alpha, np.kron(basis_a[alpha], basis_b[beta]))
        for alpha in range(len(basis_a))
        for beta in range(1, len(basis_b))
    ]


def traceless_b_basis(d_a: int, d_b: int) -> List[ComplexMatrix]:
    """The d_A^2 (d_B^2 - 1) orthonormal products L_A (x) L_B with traceless L_B."""
    return [delta for _, delta in _kernel_basis(d_a, d_b)]


def depolarizing_choi(d_a: int, d_b: int) -> ComplexMatrix:
    """Choi operator I_{AB} / d_B of the fully depolarizing channel A -> B."""
    return np.eye(d_a * d_b, dtype=np.complex128) / d_b


def primal_certificate(d_a: int, d_b: int) -> PrimalCertificate:
    """
    Positive and negative parts of the conjugation comb as scaled physical combs.
    """
    w_plus_a, w_minus_a = werner_holevo(d_a, "+").choi, werner_holevo(d_a, "-").choi
    w_plus_b, w_minus_b = werner_holevo(d_b, "+").choi, werner_holevo(d_b, "-").choi
    c1 = ((d_b + 1) / 2) * np.kron(w_plus_a, w_plus_b) \
        + ((d_a - 1) * (d_b - 1) / 2) * np.kron(w_minus_a, w_minus_b)
    c2 = (d_a * (d_b - 1) / 2) * np.kron(w_plus_a, w_minus_b)
    return PrimalCertificate(
        d_a=d_a,
        d_b=d_b,
        c1=c1,
        c2=c2,
        p1_hat=(d_a * d_b - d_a + 2) / 2,
        p2_hat=d_a * (d_b - 1) / 2,
    )


def _dual_g_coefficient(alpha: int, d_a: int, d_b: int) -> float:
    if alpha == 0:
        return (d_a + d_b) / (d_a * (d_b ** 2 + d_b))
    return 1 / (d_a * (d_b + 1))


def dual_certificate(d_a: int, d_b: int) -> DualCertificate:
    """
    Closed-form dual solution: X = Z = I/(d_A d_B), Y = I and G_j = g_j Delta_j^T.
    """
    kernel = _kernel_basis(d_a, d_b)
    identity_ab = np.eye(d_a * d_b, dtype=np.complex128)
    identity_aab = np.eye(d_a * d_a * d_b, dtype=np.complex128)
    return DualCertificate(
        d_a=d_a,
        d_b=d_b,
        x=identity_ab / (d_a * d_b),
        g=[_dual_g_coefficient(alpha, d_a, d_b) * delta.T for alpha, delta in kernel],
        deltas=[delta for _, delta in kernel],
        z1=identity_ab / (d_a * d_b),
        z2=identity_ab / (d_a * d_b),
        y1=identity_aab.copy(),
        y2=identity_aab.copy(),
    )


def reproduction_residuals(cert: PrimalCertificate, slot_ops) -> np.ndarray:
    """
    f(X) = tr_{AB}[(C1 - C2)(I (x) X^T (x) I)] - X^T for a stack of operators X on AB.
    """
    slot_ops = np.asarray(slot_ops, dtype=np.complex128)
    transposed = np.transpose(slot_ops, (0, 2, 1))
    linked = contract_slot(cert.c1 - cert.c2, cert.d_a, cert.d_b, transposed)
    return linked - transposed


def dual_spectrum_operator(cert: DualCertificate) -> ComplexMatrix:
    """Sum_j Delta_j^T (x) G_j arranged on A'ABB'."""
    d_a, d_b = cert.d_a, cert.d_b
    deltas_t = np.array([delta.T for delta in cert.deltas]).reshape(-1, d_a, d_b, d_a, d_b)
    gs = np.array(cert.g).reshape(-1, d_a, d_b, d_a, d_b)
    # Delta on (A, B), G on (A', B') -> ket and bra both ordered A' A B B'
    s = np.einsum("jabxy,jpqrs->pabqrxys", deltas_t, gs, optimize=True)
    side = d_a * d_a * d_b * d_b
    return s.reshape(side, side)


def dual_spectrum_bounds(d_a: int, d_b: int):
    """Closed-form extreme eigenvalues (largest, smallest) of the dual spectrum operator."""
    return (d_b - 1) / (d_a * d_b ** 2), -(d_b + 1) / (d_a * d_b ** 2)


def _dual_slacks(cert: DualCertificate, s: Optional[ComplexMatrix] = None):
    d_a, d_b = cert.d_a, cert.d_b
    dims = [d_a, d_a, d_b, d_b]
    if s is None:
        s = dual_spectrum_operator(cert)
    d = depolarizing_choi(d_a, d_b)
    d_x = embed(d.T, dims, [1, 2]) @ embed(cert.x, dims, [0, 3])

    def y_terms(y):
        reduced = partial_trace(y, [d_a, d_a, d_b], keep=[0, 1])
        return embed(y, dims, [0, 1, 2]) - embed(reduced, dims, [0, 1]) / d_b

    upper = y_terms(cert.y1) + embed(cert.z1, dims, [0, 2]) - d_x - s
    lower = d_x + s + y_terms(cert.y2) + embed(cert.z2, dims, [0, 2])
    return upper, lower


def check_primal(cert: PrimalCertificate, tol: float = FEASIBILITY_TOL,
                 random_channels: int = RANDOM_CHECK_CHANNELS, seed: int = 0) -> Dict[str, float]:
    """
    Violation magnitudes of every primal constraint family.

    Keys: psd, normalization, causality, reproduction_depolarizing,
    reproduction_kernel and (when random_channels > 0) reproduction_random.
    """
    d_a, d_b = cert.d_a, cert.d_b
    psd = max(0.0, -extreme_eigenvalues(cert.c1)[0], -extreme_eigenvalues(cert.c2)[0])
    marginals = [
        comb_constraint_violations(c, d_a, d_b, normalization=p)
        for c, p in ((cert.c1, cert.p1_hat), (cert.c2, cert.p2_hat))
    ]
    violations = {
        "psd": psd,
        "normalization": max(m["normalization"] for m in marginals),
        "causality": max(m["causality"] for m in marginals),
        "reproduction_depolarizing": max_abs(
            reproduction_residuals(cert, [depolarizing_choi(d_a, d_b)])),
        "reproduction_kernel": max_abs(reproduction_residuals(cert, traceless_b_basis(d_a, d_b))),
    }
    if random_channels > 0:
        rng = np.random.default_rng(seed)
        lowest = min_kraus_rank(d_a, d_b)
        chois = [random_channel(d_a, d_b, int(rng.integers(lowest, d_a * d_b + 1)), rng).choi
                 for _ in range(random_channels)]
        violations["reproduction_random"] = max_abs(reproduction_residuals(cert, chois))
    for name, value in violations.items():
        if value > tol:
            logger.warning("Primal certificate (%d, %d): %s violated by %.3g", d_a, d_b, name, value)
    return violations


def check_dual(cert: DualCertificate, tol: float = FEASIBILITY_TOL) -> Dict[str, float]:
    """
    Violation magnitudes of every dual constraint family.

    Keys: trace (tr Z = 1), slack_upper and slack_lower (negativity of the two
    operator inequalities) and spectrum (distance of the extreme eigenvalues
    of the spectrum operator from their closed forms).
    """
    s = dual_spectrum_operator(cert)
    upper, lower = _dual_slacks(cert, s)
    smallest, largest = extreme_eigenvalues(s)
    lam_1, lam_2 = dual_spectrum_bounds(cert.d_a, cert.d_b)
    violations = {
        "trace": max(abs(np.trace(cert.z1) - 1), abs(np.trace(cert.z2) - 1)),
        "slack_upper": max(0.0, -extreme_eigenvalues(upper)[0]),
        "slack_lower": max(0.0, -extreme_eigenvalues(lower)[0]),
        "spectrum": max(abs(largest - lam_1), abs(smallest - lam_2)),
    }
    for name, value in violations.items():
        if value > tol:
            logger.warning("Dual certificate (%d, %d): %s violated by %.3g",
                           cert.d_a, cert.d_b, name, value)
    return violations


def perturb_dual(cert: DualCertificate, shrink: float, scale: float, seed) -> DualCertificate:
    """
    Shrink the G_j by (1 - shrink) and add a random Hermitian perturbation.

    The perturbation is normalized so its contribution to the spectrum
    operator has norm at most scale * min(lambda_1, |lambda_2|); with
    scale <= shrink the result stays feasible.
    """
    rng = np.random.default_rng(seed)
    d_a, d_b = cert.d_a, cert.d_b
    side = d_a * d_b
    h = rng.standard_normal((side, side)) + 1j * rng.standard_normal((side, side))
    h = (h + h.conj().T) / 2
    probe = DualCertificate(
        d_a, d_b, cert.x, [h.copy() for _ in cert.g], cert.deltas,
        cert.z1, cert.z2, cert.y1, cert.y2,
    )
    lo, hi = extreme_eigenvalues(dual_spectrum_operator(probe))
    lam_1, lam_2 = dual_spectrum_bounds(d_a, d_b)
    factor = scale * min(lam_1, abs(lam_2)) / max(abs(lo), abs(hi), 1e-300)
    g = [(1 - shrink) * g_j + factor * h for g_j in cert.g]
    return DualCertificate(d_a, d_b, cert.x, g, cert.deltas, cert.z1, cert.z2, cert.y1, cert.y2)


def certify_base_norm(d_a: int, d_b: int, tol: float = FEASIBILITY_TOL,
                      random_channels: int = RANDOM_CHECK_CHANNELS, seed: int = 0) -> CertificateReport:
    """
    Verify both certificates for (d_A, d_B) and compare objectives with d_A d_B - d_A + 1.

    Never raises on a failed check; the report carries the violations.
    """
    if d_a < 2 or d_b < 2:
        raise DimensionError(f"dimensions must be at least 2, got ({d_a}, {d_b})")
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    expected = float(d_a * d_b - d_a + 1)
    primal = primal_certificate(d_a, d_b)
    dual = dual_certificate(d_a, d_b)

    primal_checks = check_primal(primal, tol, random_channels, seed)
    violations = {f"primal_{k}": float(v) for k, v in primal_checks.items()}
    violations.update({f"dual_{k}": float(v) for k, v in check_dual(dual, tol).items()})
    primal_objective = primal.objective
    dual_objective = dual.objective()
    violations["primal_gamma_match"] = abs(primal_objective - quasiprob_weights(d_a, d_b).gamma)

    passed = (abs(primal_objective - expected) < tol and abs(dual_objective - expected) < tol
              and all(v < tol for v in violations.values()))
    logger.debug("Certificate (%d, %d): primal %.12g dual %.12g pass=%s",
                 d_a, d_b, primal_objective, dual_objective, passed)
    return CertificateReport(
        d_a=d_a,
        d_b=d_b,
        primal_objective=primal_objective,
        dual_objective=dual_objective,
        expected=expected,
        tol=tol,
        violations=violations,
        passed=passed,
    )


def tester_value(comb_choi, d_a: int, d_b: int, seed, outcomes: int = 4) -> float:
    """
    sum_i |p_i| for the comb probed by a random single-slot tester.

    The tester prepares a random pure state on A'R, links the comb's slot
    to a random memory channel A R -> B R' and measures B'R' with a random
    POVM. For physical combs the p_i form a probability distribution; for
    a virtual comb the sum is a lower bound on its diamond norm.
    """
    rng = np.random.default_rng(seed)
    r = d_a
    psi = random_pure_state(d_a * r, rng).matrix.reshape(d_a, r, d_a, r)
    d_in, d_out = d_a * r, d_b * r
    rank = int(rng.integers(min_kraus_rank(d_in, d_out), d_in * d_out + 1))
    memory = random_channel(d_in, d_out, rank, rng)
    e = memory.choi.reshape(d_a, r, d_b, r, d_a, r, d_b, r)

    side = d_b * r
    raw = []
    for _ in range(outcomes):
        g = rng.standard_normal((side, side)) + 1j * rng.standard_normal((side, side))
        raw.append(g @ g.conj().T)
    inv_sqrt = psd_power(sum(raw), -0.5)
    povm = [inv_sqrt @ m @ inv_sqrt for m in raw]

    c = np.asarray(comb_choi).reshape([d_a, d_a, d_b, d_b] * 2)
    total = 0.0
    for m in povm:
        mt = m.T.reshape(d_b, r, d_b, r)
        # Ket indices link with ket indices, bra with bra
        tester = np.einsum("prPs,arbqAsBt,uqUt->pabuPABU", psi, e, mt, optimize=True)
        total += abs(float(np.real(np.sum(c * tester))))
    return total


def permuted_dual_layout(cert: DualCertificate) -> ComplexMatrix:
    """Spectrum operator built in (A, B, A', B') order and permuted to A'ABB'."""
    d_a, d_b = cert.d_a, cert.d_b
    big = sum(np.kron(delta.T, g) for delta, g in zip(cert.deltas, cert.g))
    return permute_systems(big, [d_a, d_b, d_a, d_b], [2, 0, 1, 3])
