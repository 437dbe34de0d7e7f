"""
Dense linear algebra primitives.

Tensor products, partial traces, spectral functions and the structural
operators (maximally entangled operator, swap, symmetric and antisymmetric
projectors) that every other backend module builds on.

Subsystems are always ordered left to right as tensor factors: for
dims [d0, d1, d2] the basis index is (i0 * d1 + i1) * d2 + i2.
"""

from typing import List, NamedTuple, Sequence

import numpy as np
import numpy.typing as npt
import scipy.linalg

from backend.errors import DimensionError, ValidationError

ComplexMatrix = npt.NDArray[np.complex128]
SystemDims = Sequence[int]

# Max-abs entry of (M - M^dagger) accepted as roundoff
HERMITIAN_TOL = 1e-10


class StructuralOperators(NamedTuple):
    """Operators on C^d (x) C^d shared by the Choi and comb constructions."""
    phi: ComplexMatrix
    swap: ComplexMatrix
    p_sym: ComplexMatrix
    p_anti: ComplexMatrix


def as_matrix(m) -> ComplexMatrix:
    """
    Coerce input to a 2-D complex128 array with finite entries.

    Raises:
        DimensionError: if the input is not two-dimensional
        ValidationError: if any entry is NaN or infinite
    """
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim != 2:
        raise DimensionError(f"expected a matrix, got an array of shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("finite entries", float("inf"))
    return arr


def max_abs(m) -> float:
    """Largest absolute entry, the norm used for every tolerance check."""
    arr = np.asarray(m)
    if arr.size == 0:
        return 0.0
    return float(np.max(np.abs(arr)))


def _check_dims(m: ComplexMatrix, dims: SystemDims) -> List[int]:
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims):
        raise DimensionError(f"subsystem dimensions must be positive, got {dims}")
    total = int(np.prod(dims))
    if m.shape != (total, total):
        raise DimensionError(
            f"matrix of shape {m.shape} does not match subsystem dims {dims}"
        )
    return dims


def tensor(*ops) -> ComplexMatrix:
    """
    Kronecker product of the given operators, first factor most significant.

    Args:
        ops: one or more matrices

    Returns:
        The tensor product ops[0] (x) ops[1] (x) ...
    """
    if not ops:
        raise DimensionError("tensor requires at least one operand")
    result = as_matrix(ops[0])
    for op in ops[1:]:
        result = np.kron(result, as_matrix(op))
    return result


def partial_trace(m, dims: SystemDims, keep: Sequence[int]) -> ComplexMatrix:
    """
    Trace out every subsystem not listed in keep.

    Args:
        m: square matrix on the composite system
        dims: subsystem dimensions, left to right
        keep: indices of the subsystems to keep (returned in ascending order)

    Returns:
        The reduced operator on the kept subsystems
    """
    m = as_matrix(m)
    dims = _check_dims(m, dims)
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise DimensionError(f"keep indices {keep} out of range for {n} subsystems")
    traced = [i for i in range(n) if i not in keep]

    # Move kept systems to the front, traced ones to the back, then trace in one go
    order = keep + traced
    t = m.reshape(dims + dims).transpose(order + [i + n for i in order])
    d_keep = int(np.prod([dims[i] for i in keep]))
    d_traced = int(np.prod([dims[i] for i in traced]))
    t = t.reshape(d_keep, d_traced, d_keep, d_traced)
    return np.trace(t, axis1=1, axis2=3)


def permute_systems(m, dims: SystemDims, perm: Sequence[int]) -> ComplexMatrix:
    """
    Reorder tensor factors: subsystem k of the result is subsystem perm[k] of m.
    """
    m = as_matrix(m)
    dims = _check_dims(m, dims)
    n = len(dims)
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(n)):
        raise DimensionError(f"{perm} is not a permutation of {n} subsystems")
    t = m.reshape(dims + dims).transpose(perm + [p + n for p in perm])
    return t.reshape(m.shape)


def embed(op, dims: SystemDims, targets: Sequence[int]) -> ComplexMatrix:
    """
    Place op on the target subsystems (in the given order) and identity elsewhere.

    Args:
        op: operator on the target subsystems, factors ordered as in targets
        dims: dimensions of the full system
        targets: subsystem indices op acts on

    Returns:
        The embedded operator on the full system
    """
    dims = [int(d) for d in dims]
    targets = [int(t) for t in targets]
    rest = [i for i in range(len(dims)) if i not in targets]
    order = targets + rest
    d_rest = int(np.prod([dims[i] for i in rest]))
    big = np.kron(as_matrix(op), np.eye(d_rest, dtype=np.complex128))
    return permute_systems(big, [dims[i] for i in order], [order.index(k) for k in range(len(dims))])


def hermitian_eigh(m, tol: float = HERMITIAN_TOL):
    """
    Eigendecomposition of a Hermitian matrix, the single spectral primitive.

    The input is symmetrized before diagonalization so that roundoff-level
    anti-Hermitian parts do not leak into the eigenvectors.

    Returns:
        (eigenvalues ascending, eigenvectors as columns)

    Raises:
        ValidationError: if m is not Hermitian within tol
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    deviation = max_abs(m - m.conj().T)
    if deviation > tol:
        raise ValidationError("hermiticity", deviation)
    return scipy.linalg.eigh((m + m.conj().T) / 2)


def psd_power(m, exponent: float, tol: float = HERMITIAN_TOL) -> ComplexMatrix:
    """
    Apply t -> t**exponent to the spectrum of a positive semidefinite matrix.

    For exponent -1/2 the function acts on the support only: eigenvalues at
    or below tol are mapped to zero (pseudo-inverse square root).

    Args:
        m: Hermitian PSD matrix
        exponent: 1/2 or -1/2
        tol: hermiticity tolerance, negativity tolerance and support threshold

    Returns:
        The matrix power
    """
    if exponent not in (0.5, -0.5):
        raise ValueError(f"unsupported exponent {exponent}; expected 1/2 or -1/2")
    vals, vecs = hermitian_eigh(m, tol)
    if vals.size and vals[0] < -tol:
        raise ValidationError("positive semidefiniteness", -vals[0])
    vals = np.clip(vals, 0.0, None)
    if exponent > 0:
        f = np.sqrt(vals)
    else:
        f = np.zeros_like(vals)
        support = vals > tol
        f[support] = 1.0 / np.sqrt(vals[support])
    return (vecs * f) @ vecs.conj().T


def max_entangled(d: int) -> ComplexMatrix:
    """Unnormalized maximally entangled operator sum_ij |ii><jj| (trace d)."""
    v = np.eye(d, dtype=np.complex128).reshape(d * d)
    return np.outer(v, v.conj())


def swap_operator(d1: int, d2: int = None) -> ComplexMatrix:
    """
    Permutation F with F|i>|j> = |j>|i>, mapping C^d1 (x) C^d2 to C^d2 (x) C^d1.
    """
    d2 = d1 if d2 is None else d2
    f = np.zeros((d1 * d2, d1 * d2), dtype=np.complex128)
    for i in range(d1):
        for j in range(d2):
            f[j * d1 + i, i * d2 + j] = 1.0
    return f


def structural_operators(d: int) -> StructuralOperators:
    """
    Maximally entangled operator, swap and the symmetric/antisymmetric projectors on C^d (x) C^d.
    """
    if d < 2:
        raise DimensionError(f"structural operators need d >= 2, got {d}")
    identity = np.eye(d * d, dtype=np.complex128)
    swap = swap_operator(d)
    return StructuralOperators(
        phi=max_entangled(d),
        swap=swap,
        p_sym=(identity + swap) / 2,
        p_anti=(identity - swap) / 2,
    )


def extreme_eigenvalues(m):
    """(smallest, largest) eigenvalue of the Hermitian part of m."""
    m = as_matrix(m)
    vals = scipy.linalg.eigvalsh((m + m.conj().T) / 2)
    return float(vals[0]), float(vals[-1])
