"""Dense complex linear algebra for small multi-qubit density matrices.

Conventions used throughout the package:

* Operators and states are numpy ``complex128`` arrays in row-major order;
  a plain 2-D ndarray is the carrier for every gate and Kraus operator.
* All entropies are in bits (base-2 logarithms), so a maximally entangled
  qubit pair carries exactly 1 bit of entanglement.
* The Bell basis is fixed once, in this order:

      0: |Phi+> = (|00> + |11>)/sqrt(2)
      1: |Psi+> = (|01> + |10>)/sqrt(2)
      2: |Psi-> = (|01> - |10>)/sqrt(2)
      3: |Phi-> = (|00> - |11>)/sqrt(2)

  Index 0 is the distillation target; "fidelity" always means overlap with
  it unless stated otherwise.

Two Werner-family constructors are provided because the two common
parameterizations genuinely differ and the reproduction harness needs both:
``werner(F)`` is the direct mixture F|Phi+><Phi+| + (1-F)I/4, while
``werner_from_channel(p)`` is the state a one-sided depolarizing channel of
strength p actually produces on half a Bell pair (Bell weights
(1-p, p/3, p/3, p/3)). Identifying the two via F = 1-p is wrong except at
p = 0; see the harness discrepancy report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
SUPPORT_TOL = 1e-12

# Single-qubit operators.
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
PAULIS = (I2, X, Y, Z)

_SQRT2 = math.sqrt(2)
BELL_LABELS = ("phi_plus", "psi_plus", "psi_minus", "phi_minus")
BELL_VECTORS = (
    np.array([1, 0, 0, 1], dtype=complex) / _SQRT2,
    np.array([0, 1, 1, 0], dtype=complex) / _SQRT2,
    np.array([0, 1, -1, 0], dtype=complex) / _SQRT2,
    np.array([1, 0, 0, -1], dtype=complex) / _SQRT2,
)


def as_operator(entries) -> np.ndarray:
    """Coerce to a finite 2-D complex matrix, rejecting NaN/Inf entries."""
    a = np.asarray(entries, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"operator must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):  # checks real and imaginary parts
        raise ValueError("operator contains non-finite entries")
    return a


def _frozen_copy(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=complex, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, PSD matrix tagged with subsystem dimensions.

    Construction validates Hermiticity (1e-10 entrywise), trace (1e-10) and
    positivity (minimum eigenvalue >= -1e-10); instances are immutable.
    """

    matrix: np.ndarray
    dims: tuple[int, ...]

    def __init__(self, matrix, dims: Sequence[int] = (2, 2)):
        m = as_operator(matrix)
        dims = tuple(int(d) for d in dims)
        d = int(np.prod(dims))
        if m.shape != (d, d):
            raise ValueError(f"matrix shape {m.shape} does not match dims {dims}")
        if np.abs(m - m.conj().T).max() > HERMITICITY_TOL:
            raise ValueError("matrix is not Hermitian within tolerance")
        if abs(np.trace(m).real - 1.0) > TRACE_TOL or abs(np.trace(m).imag) > TRACE_TOL:
            raise ValueError("matrix trace differs from 1")
        if np.linalg.eigvalsh(m).min() < -PSD_TOL:
            raise ValueError("matrix has a negative eigenvalue beyond tolerance")
        object.__setattr__(self, "matrix", _frozen_copy(m))
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_state_vector(cls, psi, dims: Sequence[int] = (2, 2)) -> "DensityMatrix":
        v = np.asarray(psi, dtype=complex).reshape(-1)
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"state vector norm {norm} differs from 1")
        return cls(np.outer(v, v.conj()), dims)

    @classmethod
    def maximally_mixed(cls, dims: Sequence[int] = (2,)) -> "DensityMatrix":
        d = int(np.prod(tuple(dims)))
        return cls(np.eye(d, dtype=complex) / d, dims)


def bell_state(index: int = 0) -> np.ndarray:
    """State vector of the Bell state at the fixed basis position."""
    return BELL_VECTORS[index].copy()


def bell_pair(index: int = 0) -> DensityMatrix:
    return DensityMatrix.from_state_vector(BELL_VECTORS[index], (2, 2))


def bell_fidelity(rho: DensityMatrix | np.ndarray) -> float:
    """Overlap with the target Bell state |Phi+>."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    v = BELL_VECTORS[0]
    return float((v.conj() @ m @ v).real)


@dataclass(frozen=True)
class BellDiagonalState:
    """Four probabilities over the fixed Bell basis.

    ``coefficients[0]`` is the weight on |Phi+>, i.e. the Bell fidelity.
    """

    coefficients: tuple[float, float, float, float]

    def __init__(self, coefficients: Iterable[float]):
        c = tuple(float(x) for x in coefficients)
        if len(c) != 4:
            raise ValueError("exactly four Bell coefficients required")
        if any(x < -1e-12 or x > 1 + 1e-12 for x in c):
            raise ValueError(f"coefficients outside [0, 1]: {c}")
        if abs(sum(c) - 1.0) > 1e-12:
            raise ValueError(f"coefficients sum to {sum(c)}, expected 1")
        c = tuple(min(max(x, 0.0), 1.0) for x in c)
        object.__setattr__(self, "coefficients", c)

    @property
    def fidelity(self) -> float:
        return self.coefficients[0]

    @property
    def max_coefficient(self) -> float:
        return max(self.coefficients)

    def to_density_matrix(self) -> DensityMatrix:
        m = np.zeros((4, 4), dtype=complex)
        for c, v in zip(self.coefficients, BELL_VECTORS):
            m += c * np.outer(v, v.conj())
        return DensityMatrix(m, (2, 2))

    @classmethod
    def from_density_matrix(cls, rho: DensityMatrix, tol: float = 1e-10) -> "BellDiagonalState":
        """Read off Bell-basis weights; rejects states with off-diagonal parts.

        Use :func:`bell_projection` to deliberately discard coherences.
        """
        weights = [float((v.conj() @ rho.matrix @ v).real) for v in BELL_VECTORS]
        rebuilt = sum(w * np.outer(v, v.conj()) for w, v in zip(weights, BELL_VECTORS))
        if np.abs(rebuilt - rho.matrix).max() > tol:
            raise ValueError("state is not Bell-diagonal within tolerance")
        total = sum(weights)
        return cls(tuple(w / total for w in weights))


def bell_projection(rho: DensityMatrix) -> BellDiagonalState:
    """Bell-diagonal part of a two-qubit state (Bell-basis dephasing/twirl)."""
    weights = np.array([float((v.conj() @ rho.matrix @ v).real) for v in BELL_VECTORS])
    weights = np.clip(weights, 0.0, None)
    return BellDiagonalState(tuple(weights / weights.sum()))


def werner(fidelity_param: float) -> BellDiagonalState:
    """Direct mixture F|Phi+><Phi+| + (1-F)I/4 with Bell weights ((1+3F)/4, (1-F)/4 x3)."""
    F = float(fidelity_param)
    if F < -1 / 3 - 1e-12 or F > 1 + 1e-12:
        raise ValueError(f"Werner mixing parameter {F} outside [-1/3, 1]")
    rest = (1 - F) / 4
    return BellDiagonalState(((1 + 3 * F) / 4, rest, rest, rest))


def werner_from_channel(p: float) -> BellDiagonalState:
    """Output of a one-sided depolarizing channel on half a Bell pair.

    Bell weights (1-p, p/3, p/3, p/3); equals ``werner(1 - 4p/3)``, not
    ``werner(1-p)``.
    """
    p = float(p)
    if p < 0 or p > 0.75 + 1e-12:
        raise ValueError(f"depolarizing parameter {p} outside [0, 3/4]")
    return BellDiagonalState((1 - p, p / 3, p / 3, p / 3))


def tensor(a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    """Kronecker product of two states; subsystem dims are concatenated."""
    return DensityMatrix(np.kron(a.matrix, b.matrix), a.dims + b.dims)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduce to the listed subsystems (order preserved, trace preserved)."""
    keep = sorted(set(int(k) for k in keep))
    n = len(rho.dims)
    if not keep or any(k < 0 or k >= n for k in keep):
        raise ValueError(f"invalid subsystem selection {keep} for dims {rho.dims}")
    dims = list(rho.dims)
    reshaped = rho.matrix.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    for idx in sorted(traced, reverse=True):
        reshaped = np.trace(reshaped, axis1=idx, axis2=idx + len(dims))
        dims.pop(idx)
    d = int(np.prod(dims))
    return DensityMatrix(reshaped.reshape(d, d), tuple(dims))


def partial_transpose(rho: DensityMatrix | np.ndarray, subsystem: int = 1) -> np.ndarray:
    """Transpose on one side of a two-qubit state; Hermitian, possibly non-PSD."""
    if isinstance(rho, DensityMatrix):
        if rho.dims != (2, 2):
            raise ValueError(f"partial transpose requires a qubit pair, got dims {rho.dims}")
        m = rho.matrix
    else:
        m = as_operator(rho)
        if m.shape != (4, 4):
            raise ValueError(f"partial transpose requires a 4x4 matrix, got {m.shape}")
    if subsystem not in (0, 1):
        raise ValueError("subsystem must be 0 or 1")
    r = m.reshape(2, 2, 2, 2)
    if subsystem == 0:
        r = r.transpose(2, 1, 0, 3)
    else:
        r = r.transpose(0, 3, 2, 1)
    return r.reshape(4, 4)


def _clamped_spectrum(m: np.ndarray) -> np.ndarray:
    vals = np.linalg.eigvalsh(m)
    return vals[vals > SUPPORT_TOL]


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """-sum lambda log2 lambda over the spectrum, with 0 log 0 := 0."""
    vals = _clamped_spectrum(rho.matrix)
    return float(-np.sum(vals * np.log2(vals)))


def relative_entropy(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Tr[rho (log2 rho - log2 sigma)]; +inf when rho leaves sigma's support."""
    if rho.dim != sigma.dim:
        raise ValueError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")
    svals, svecs = np.linalg.eigh(sigma.matrix)
    diag = np.einsum("ij,jk,ki->i", svecs.conj().T, rho.matrix, svecs).real
    null = svals <= SUPPORT_TOL
    if np.any(diag[null] > SUPPORT_TOL):
        return math.inf
    cross = float(np.sum(diag[~null] * np.log2(svals[~null])))
    rvals = _clamped_spectrum(rho.matrix)
    return float(np.sum(rvals * np.log2(rvals))) - cross


def purity_and_mixedness(rho: DensityMatrix) -> tuple[float, float]:
    """(Tr rho^2, linear entropy normalized to [0, 1])."""
    purity = float(np.trace(rho.matrix @ rho.matrix).real)
    d = rho.dim
    linear_entropy = (d / (d - 1)) * (1.0 - purity)
    return purity, linear_entropy


def binary_entropy(x: float) -> float:
    """H2(x) = -x log2 x - (1-x) log2(1-x) on [0, 1], endpoints 0."""
    x = float(x)
    if x < 0.0 or x > 1.0:
        raise ValueError(f"binary entropy argument {x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return float(-x * math.log2(x) - (1 - x) * math.log2(1 - x))


def random_pure_state(rng: np.random.Generator, dim: int = 4) -> np.ndarray:
    """Haar-distributed state vector."""
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density_matrix(rng: np.random.Generator, dims: Sequence[int] = (2, 2), rank: int | None = None) -> DensityMatrix:
    """Random mixed state from a Ginibre factor G G^dag / Tr."""
    d = int(np.prod(tuple(dims)))
    r = rank or d
    g = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real, dims)
