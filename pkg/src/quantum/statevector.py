"""Dense statevector simulation for RY / CZ circuits.

Qubit ``q`` is bit ``q`` of the basis index (little-endian). Gates act in place
on an amplitude array with an optional leading batch axis: the array is viewed
as ``(batch, 2**(n-q-1), 2, 2**q)`` so the middle axis is the target bit, which
makes every single-qubit gate O(2**n) without building any 2**n x 2**n matrix.
"""
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional, Sequence
import logging

import numpy as np

from utils.errors import ParameterBindingError, QubitIndexError, ValidationError

logger = logging.getLogger('beam_qtl.statevector')

NORM_TOLERANCE = 1e-10


class GateKind(Enum):
    ROTATION_Y = 'RY'
    CONTROLLED_Z = 'CZ'


@dataclass(frozen=True)
class GateOp:
    kind: GateKind
    target: int
    control: Optional[int] = None
    angle_slot: Optional[int] = None

    def __post_init__(self):
        if self.kind is GateKind.ROTATION_Y:
            if self.angle_slot is None:
                raise ValidationError("RY gate needs an angle_slot")
            if self.control is not None:
                raise ValidationError("RY gate takes no control qubit")
        else:
            if self.control is None:
                raise ValidationError("CZ gate needs a control qubit")
            if self.angle_slot is not None:
                raise ValidationError("CZ gate takes no angle_slot")
            if self.control == self.target:
                raise QubitIndexError(f"CZ control and target are both {self.target}")

    @classmethod
    def ry(cls, target, angle_slot):
        return cls(GateKind.ROTATION_Y, target, angle_slot=angle_slot)

    @classmethod
    def cz(cls, control, target):
        return cls(GateKind.CONTROLLED_Z, target, control=control)

    def qubits(self):
        return (self.target,) if self.control is None else (self.control, self.target)

    def __str__(self):
        if self.kind is GateKind.ROTATION_Y:
            return f"RY(q{self.target}, slot{self.angle_slot})"
        return f"CZ(q{self.control}, q{self.target})"


@dataclass
class QuantumState:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValidationError(f"n_qubits must be positive, got {self.n_qubits}")
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValidationError(
                f"expected {1 << self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got shape {self.amplitudes.shape}"
            )

    @classmethod
    def zero(cls, n_qubits):
        return cls.basis(n_qubits, 0)

    @classmethod
    def basis(cls, n_qubits, index):
        amps = np.zeros(1 << n_qubits, dtype=np.complex128)
        amps[index] = 1.0
        return cls(n_qubits, amps)

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def copy(self):
        return QuantumState(self.n_qubits, self.amplitudes.copy())


def _check_qubit(qubit, n_qubits):
    if not 0 <= qubit < n_qubits:
        raise QubitIndexError(f"qubit {qubit} out of range for {n_qubits} qubits")


def _n_qubits_of(amps):
    dim = amps.shape[-1]
    n = dim.bit_length() - 1
    if dim != 1 << n:
        raise ValidationError(f"amplitude length {dim} is not a power of two")
    return n


def ry_kernel(amps, qubit, theta):
    """In-place RY on a ``(batch, 2**n)`` array; ``theta`` is a scalar or one angle per row"""
    n = _n_qubits_of(amps)
    view = amps.reshape(amps.shape[0], 1 << (n - qubit - 1), 2, 1 << qubit)
    half = np.asarray(theta, dtype=np.float64) / 2.0
    if half.ndim:
        half = half.reshape(-1, 1, 1)
    c, s = np.cos(half), np.sin(half)
    a0 = view[:, :, 0, :].copy()
    a1 = view[:, :, 1, :]
    view[:, :, 0, :] = c * a0 - s * a1
    view[:, :, 1, :] = s * a0 + c * a1
    return amps


@lru_cache(maxsize=None)
def _cz_indices(n_qubits, a, b):
    idx = np.arange(1 << n_qubits)
    both = ((idx >> a) & 1).astype(bool) & ((idx >> b) & 1).astype(bool)
    return np.flatnonzero(both)


@lru_cache(maxsize=None)
def _z_signs(n_qubits):
    idx = np.arange(1 << n_qubits)
    bits = (idx[:, None] >> np.arange(n_qubits)[None, :]) & 1
    return (1 - 2 * bits).astype(np.float64)


def cz_kernel(amps, a, b):
    """In-place CZ on a ``(batch, 2**n)`` array"""
    n = _n_qubits_of(amps)
    amps[:, _cz_indices(n, min(a, b), max(a, b))] *= -1.0
    return amps


def apply_ry(state: QuantumState, qubit: int, theta: float) -> QuantumState:
    _check_qubit(qubit, state.n_qubits)
    amps = state.amplitudes.copy()[None, :]
    ry_kernel(amps, qubit, theta)
    return QuantumState(state.n_qubits, amps[0])


def apply_cz(state: QuantumState, a: int, b: int) -> QuantumState:
    _check_qubit(a, state.n_qubits)
    _check_qubit(b, state.n_qubits)
    if a == b:
        raise QubitIndexError(f"CZ needs two distinct qubits, got {a} twice")
    amps = state.amplitudes.copy()[None, :]
    cz_kernel(amps, a, b)
    return QuantumState(state.n_qubits, amps[0])


def expectation_z(state: QuantumState, qubit: int) -> float:
    _check_qubit(qubit, state.n_qubits)
    probs = np.abs(state.amplitudes) ** 2
    return float(probs @ _z_signs(state.n_qubits)[:, qubit])


def expectation_z_all(amps):
    """Per-qubit <Z> for amplitudes shaped ``(..., 2**n)``; returns ``(..., n)``"""
    n = _n_qubits_of(amps)
    return (np.abs(amps) ** 2) @ _z_signs(n)


def validate_circuit(n_qubits: int, ops: Sequence[GateOp], n_params: int):
    for op in ops:
        for q in op.qubits():
            _check_qubit(q, n_qubits)
        if op.angle_slot is not None and not 0 <= op.angle_slot < n_params:
            raise ParameterBindingError(
                f"{op} refers to slot {op.angle_slot} but only {n_params} parameters were bound"
            )


def product_state(angles, dtype=np.float64) -> np.ndarray:
    """RY(angles[:, q]) on qubit q of |0...0>, one row per angle vector; shape ``(batch, 2**n)``"""
    angles = np.atleast_2d(np.asarray(angles, dtype=np.float64))
    half = angles / 2.0
    factors = np.stack([np.cos(half), np.sin(half)], axis=-1).astype(dtype)  # (batch, n, 2)
    amps = factors[:, 0, :]
    for q in range(1, angles.shape[1]):
        # bit q is the new most significant bit
        amps = (factors[:, q, :, None] * amps[:, None, :]).reshape(angles.shape[0], -1)
    return amps


def run_circuit_batch(n_qubits: int, ops: Sequence[GateOp], params, initial=None,
                      dtype=np.complex128) -> np.ndarray:
    """Run one circuit for each row of ``params`` (shape ``(batch, n_params)``)

    Starts from ``initial`` (``(batch, 2**n)``, copied) or |0...0>. RY and CZ keep
    real amplitudes real, so ``dtype=np.float64`` is exact for these circuits.
    """
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 2:
        raise ValidationError(f"params must be 2-D (batch, n_params), got shape {params.shape}")
    validate_circuit(n_qubits, ops, params.shape[1])
    if initial is None:
        amps = np.zeros((params.shape[0], 1 << n_qubits), dtype=dtype)
        amps[:, 0] = 1.0
    else:
        amps = np.array(initial, dtype=dtype)
        if amps.shape != (params.shape[0], 1 << n_qubits):
            raise ValidationError(f"initial amplitudes must have shape {(params.shape[0], 1 << n_qubits)}, "
                                  f"got {amps.shape}")
    for op in ops:
        if op.kind is GateKind.ROTATION_Y:
            ry_kernel(amps, op.target, params[:, op.angle_slot])
        else:
            cz_kernel(amps, op.control, op.target)
    return amps


def run_circuit(n_qubits: int, ops: Sequence[GateOp], params: Sequence[float]) -> QuantumState:
    params = np.asarray(params, dtype=np.float64).reshape(1, -1)
    amps = run_circuit_batch(n_qubits, ops, params)
    return QuantumState(n_qubits, amps[0])
