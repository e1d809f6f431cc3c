"""Quantum channels as Kraus-operator lists, plus decoupling transforms.

A channel is a finite list of Kraus operators satisfying the completeness
relation sum K_i^dag K_i = I. Channels carry a family tag so that the
parametric decoupling transform knows which parameter to compress.

Two pulse-sequence transforms are exposed:

* :func:`dd_effective_parametric` applies the compression rule
  p' = p * exp(-gamma_sd / f_dd) to the channel's noise parameter.
* :func:`dd_effective_pulse_average` builds the channel
  rho -> (1/M) sum_k N(P_k rho P_k^dag), exactly the displayed pulse-average
  form, with Kraus set {K_i P_k / sqrt(M)}. Note that this form does NOT
  undo the pulse after the channel; :func:`pauli_twirl` is the conjugate
  version P_k^dag N(P_k rho P_k^dag) P_k, which is the one whose Choi state
  is Bell-diagonal for every qubit channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .qstate import (
    DensityMatrix,
    I2,
    PAULIS,
    X,
    Y,
    Z,
    as_operator,
    bell_pair,
    partial_transpose,
)

COMPLETENESS_TOL = 1e-10
PRUNE_TOL = 1e-12

DEPOLARIZING = "depolarizing"
AMPLITUDE_DAMPING = "amplitude_damping"
CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """CPTP map given by Kraus operators, with family metadata."""

    kraus_ops: tuple[np.ndarray, ...]
    family: str
    param: float | None

    def __init__(self, kraus_ops: Sequence[np.ndarray], family: str = CUSTOM, param: float | None = None):
        ops = tuple(as_operator(k) for k in kraus_ops)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        if any(k.shape != (d, d) for k in ops):
            raise ValueError("Kraus operators must share one square dimension")
        total = sum(k.conj().T @ k for k in ops)
        if np.abs(total - np.eye(d)).max() > COMPLETENESS_TOL:
            raise ValueError("Kraus completeness sum differs from identity")
        frozen = []
        for k in ops:
            c = k.copy()
            c.setflags(write=False)
            frozen.append(c)
        object.__setattr__(self, "kraus_ops", tuple(frozen))
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "param", param)

    @property
    def dim(self) -> int:
        return self.kraus_ops[0].shape[0]


def identity_channel(dim: int = 2) -> QuantumChannel:
    return QuantumChannel([np.eye(dim, dtype=complex)], CUSTOM, None)


def depolarizing(p: float) -> QuantumChannel:
    """Kraus set {sqrt(1-p) I, sqrt(p/3) X, sqrt(p/3) Y, sqrt(p/3) Z}, p in [0, 3/4]."""
    p = float(p)
    if p < 0 or p > 0.75:
        raise ValueError(f"depolarizing parameter {p} outside [0, 3/4]")
    k = math.sqrt(p / 3)
    ops = [math.sqrt(1 - p) * I2, k * X, k * Y, k * Z]
    return QuantumChannel(ops, DEPOLARIZING, p)


def amplitude_damping(gamma: float) -> QuantumChannel:
    """Kraus set K0 = |0><0| + sqrt(1-gamma)|1><1|, K1 = sqrt(gamma)|0><1|."""
    gamma = float(gamma)
    if gamma < 0 or gamma > 1:
        raise ValueError(f"damping parameter {gamma} outside [0, 1]")
    k0 = np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)
    return QuantumChannel([k0, k1], AMPLITUDE_DAMPING, gamma)


def _embed(op: np.ndarray, target: int, dims: Sequence[int]) -> np.ndarray:
    factors = [op if i == target else np.eye(d, dtype=complex) for i, d in enumerate(dims)]
    return reduce(np.kron, factors)


def apply(channel: QuantumChannel, rho: DensityMatrix, target: int = 0) -> DensityMatrix:
    """Apply the channel to one subsystem: sum_i (I (x) K_i) rho (I (x) K_i)^dag."""
    if target < 0 or target >= len(rho.dims):
        raise ValueError(f"target {target} invalid for dims {rho.dims}")
    if rho.dims[target] != channel.dim:
        raise ValueError(
            f"channel dimension {channel.dim} does not match subsystem {target} of dims {rho.dims}"
        )
    out = np.zeros_like(rho.matrix)
    for k in channel.kraus_ops:
        big = _embed(k, target, rho.dims)
        out += big @ rho.matrix @ big.conj().T
    return DensityMatrix(out, rho.dims)


def compose(outer: QuantumChannel, inner: QuantumChannel) -> QuantumChannel:
    """Channel doing ``inner`` first, then ``outer``; small Kraus terms pruned."""
    if outer.dim != inner.dim:
        raise ValueError("cannot compose channels of different dimensions")
    ops = []
    for a in outer.kraus_ops:
        for b in inner.kraus_ops:
            k = a @ b
            if np.linalg.norm(k) > PRUNE_TOL:
                ops.append(k)
    return QuantumChannel(ops, CUSTOM, None)


def choi(channel: QuantumChannel) -> DensityMatrix:
    """Choi state (I (x) N)(|Phi+><Phi+|), normalized as a two-qubit state."""
    if channel.dim != 2:
        raise ValueError("Choi state construction is implemented for qubit channels")
    return apply(channel, bell_pair(), target=1)


@dataclass(frozen=True)
class EBResult:
    """Entanglement-breaking verdict with the minimal PT eigenvalue as witness."""

    is_breaking: bool
    min_pt_eigenvalue: float


def is_entanglement_breaking(channel: QuantumChannel) -> EBResult:
    """PPT test on the Choi state; exact for qubit channels."""
    c = choi(channel)
    min_eig = float(np.linalg.eigvalsh(partial_transpose(c)).min())
    return EBResult(min_eig >= -1e-10, min_eig)


PARAMETRIC = "parametric"
PULSE_AVERAGE = "pulse_average"


@dataclass(frozen=True, eq=False)
class DDConfig:
    """Decoupling pulse settings.

    ``noise_spectral_density`` and ``pulse_frequency`` share inverse-time
    units; only their ratio enters the parametric compression. This spectral
    density is a different quantity from the damping parameter of
    :func:`amplitude_damping`, despite the conventional shared symbol.
    """

    mode: str = PARAMETRIC
    pulse_count: int = 4
    pulse_frequency: float = 10.0
    noise_spectral_density: float = 0.0
    pulse_set: tuple[np.ndarray, ...] = PAULIS

    def __post_init__(self):
        if self.mode not in (PARAMETRIC, PULSE_AVERAGE):
            raise ValueError(f"unknown decoupling mode {self.mode!r}")
        if self.pulse_count < 1:
            raise ValueError("pulse_count must be at least 1")
        if self.pulse_frequency <= 0:
            raise ValueError("pulse_frequency must be positive")
        if self.noise_spectral_density < 0:
            raise ValueError("noise_spectral_density must be non-negative")
        if len(self.pulse_set) == 0:
            raise ValueError("pulse_set must not be empty")

    @property
    def compression(self) -> float:
        """exp(-gamma_sd / f_dd), the parametric noise compression factor."""
        return math.exp(-self.noise_spectral_density / self.pulse_frequency)


def dd_effective_parametric(channel: QuantumChannel, cfg: DDConfig) -> QuantumChannel:
    """Same channel family with parameter compressed by exp(-gamma_sd/f_dd).

    Note the formula's own limit: as f_dd -> infinity the compression factor
    tends to 1, i.e. p' -> p, not p' -> 0.
    """
    if cfg.mode != PARAMETRIC:
        raise ValueError("configuration is not in parametric mode")
    scaled = channel.param * cfg.compression if channel.param is not None else None
    if channel.family == DEPOLARIZING:
        return depolarizing(scaled)
    if channel.family == AMPLITUDE_DAMPING:
        return amplitude_damping(scaled)
    raise ValueError("parametric compression is defined only for tagged channel families")


def dd_effective_pulse_average(channel: QuantumChannel, cfg: DDConfig) -> QuantumChannel:
    """Uniform average of the channel over pulse-conjugated inputs.

    Kraus set {K_i P_k / sqrt(M)} over the configured pulse set, acting as
    rho -> (1/M) sum_k N(P_k rho P_k^dag). No un-rotation is applied after
    the channel; see :func:`pauli_twirl` for the conjugate version.
    """
    if cfg.mode != PULSE_AVERAGE:
        raise ValueError("configuration is not in pulse_average mode")
    pulses = [as_operator(p) for p in cfg.pulse_set]
    if any(p.shape != (channel.dim, channel.dim) for p in pulses):
        raise ValueError("pulse unitaries must match the channel dimension")
    m = len(pulses)
    scale = 1 / math.sqrt(m)
    ops = [scale * (k @ p) for p in pulses for k in channel.kraus_ops]
    return QuantumChannel(ops, CUSTOM, None)


def pauli_twirl(channel: QuantumChannel) -> QuantumChannel:
    """Pauli-conjugated average rho -> (1/4) sum_k P_k^dag N(P_k rho P_k^dag) P_k.

    The result has a Bell-diagonal Choi state for every qubit channel; on a
    Pauli-covariant channel (e.g. depolarizing) it leaves the action unchanged.
    """
    if channel.dim != 2:
        raise ValueError("Pauli twirl is implemented for qubit channels")
    ops = [0.5 * (p.conj().T @ k @ p) for p in PAULIS for k in channel.kraus_ops]
    return QuantumChannel(ops, CUSTOM, None)


def eb_threshold_depolarizing(tol: float = 1e-10) -> float:
    """Depolarizing strength where the channel turns entanglement-breaking.

    Located by bisection on the minimal PT eigenvalue of the Choi state.
    """
    lo, hi = 0.0, 0.75
    if is_entanglement_breaking(depolarizing(lo)).is_breaking:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if is_entanglement_breaking(depolarizing(mid)).is_breaking:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
