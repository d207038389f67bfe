"""Motor de vetor de estado com amplitudes reais.

Convenção: o qubit 0 é o bit menos significativo do índice da base.
Todas as portas suportadas (R_Y, X, Z, H, CNOT, MCX) são ortogonais reais.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from fracvqa.core.errors import UsageError


class Topology(str, Enum):
    LINEAR = "linear"
    CIRCULAR = "circular"


class ShiftDirection(str, Enum):
    INCREMENT = "increment"
    DECREMENT = "decrement"


@dataclass(frozen=True)
class RY:
    qubit: int
    theta: float


@dataclass(frozen=True)
class X:
    qubit: int


@dataclass(frozen=True)
class Z:
    qubit: int


@dataclass(frozen=True)
class H:
    qubit: int


@dataclass(frozen=True)
class CNOT:
    control: int
    target: int


@dataclass(frozen=True)
class MCX:
    controls: tuple[int, ...]
    target: int


Gate = Union[RY, X, Z, H, CNOT, MCX]


@dataclass(frozen=True)
class Operation:
    """Uma porta mais condições de controle extras ``(qubit, valor)``."""

    gate: Gate
    controls: tuple[tuple[int, int], ...] = ()

    def qubits(self) -> tuple[int, ...]:
        return gate_qubits(self.gate) + tuple(q for q, _ in self.controls)


def gate_qubits(gate: Gate) -> tuple[int, ...]:
    if isinstance(gate, CNOT):
        return (gate.control, gate.target)
    if isinstance(gate, MCX):
        return tuple(gate.controls) + (gate.target,)
    return (gate.qubit,)


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(2 ** n_qubits)
        amps[0] = 1.0
        return cls(n_qubits=n_qubits, amplitudes=amps)

    @classmethod
    def from_amplitudes(cls, amplitudes) -> "StateVector":
        amps = np.array(amplitudes, dtype=float)
        n = int(amps.size).bit_length() - 1
        if amps.size != 2 ** n:
            raise UsageError(f"amplitude vector length {amps.size} is not a power of 2")
        return cls(n_qubits=n, amplitudes=amps)

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class AnsatzSpec:
    n_qubits: int
    layers: int
    topology: Topology = Topology.LINEAR

    def __post_init__(self):
        object.__setattr__(self, "topology", Topology(self.topology))
        if self.n_qubits < 1 or self.layers < 1:
            raise UsageError("ansatz needs at least one qubit and one layer")
        if self.topology is Topology.CIRCULAR and self.n_qubits <= 2:
            raise UsageError("circular topology requires n > 2")

    @property
    def n_params(self) -> int:
        return self.n_qubits * self.layers


# {{{ índices

@lru_cache(maxsize=256)
def _pair_indices(n_qubits: int, qubit: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(2 ** n_qubits)
    i0 = idx[(idx >> qubit) & 1 == 0]
    return i0, i0 | (1 << qubit)


def _condition_mask(indices: np.ndarray, conditions: Iterable[tuple[int, int]]) -> np.ndarray:
    mask = np.ones(indices.shape, dtype=bool)
    for q, value in conditions:
        mask &= ((indices >> q) & 1) == value
    return mask

# }}}


def _validate(n_qubits: int, qubits: Sequence[int]) -> None:
    for q in qubits:
        if not (0 <= q < n_qubits):
            raise UsageError(f"qubit index {q} out of range for {n_qubits} qubits")
    if len(set(qubits)) != len(qubits):
        raise UsageError(f"qubit indices must be distinct, got {tuple(qubits)}")


def apply_gate(state: StateVector, gate: Gate, controls: Sequence[tuple[int, int]] = ()) -> StateVector:
    """Aplica ``gate`` in-place; ``controls`` restringe aos ramos com os valores dados."""
    controls = tuple(controls)
    for _, value in controls:
        if value not in (0, 1):
            raise UsageError(f"control value must be 0 or 1, got {value}")
    _validate(state.n_qubits, gate_qubits(gate) + tuple(q for q, _ in controls))

    conditions = list(controls)
    if isinstance(gate, (RY, X, Z, H)):
        target = gate.qubit
    elif isinstance(gate, CNOT):
        target = gate.target
        conditions.append((gate.control, 1))
    elif isinstance(gate, MCX):
        target = gate.target
        conditions.extend((c, 1) for c in gate.controls)
    else:
        raise UsageError(f"unsupported gate {gate!r}")

    i0, i1 = _pair_indices(state.n_qubits, target)
    if conditions:
        mask = _condition_mask(i0, conditions)
        i0, i1 = i0[mask], i1[mask]

    amps = state.amplitudes
    a0 = amps[i0]
    a1 = amps[i1]
    if isinstance(gate, RY):
        c, s = np.cos(gate.theta / 2.0), np.sin(gate.theta / 2.0)
        amps[i0] = c * a0 - s * a1
        amps[i1] = s * a0 + c * a1
    elif isinstance(gate, H):
        amps[i0] = (a0 + a1) / np.sqrt(2.0)
        amps[i1] = (a0 - a1) / np.sqrt(2.0)
    elif isinstance(gate, Z):
        amps[i1] = -a1
    else:  # X, CNOT, MCX
        amps[i0] = a1
        amps[i1] = a0
    return state


def apply_operations(
    state: StateVector,
    operations: Iterable[Operation],
    after_each: Callable[[StateVector, Operation], None] | None = None,
) -> StateVector:
    for op in operations:
        apply_gate(state, op.gate, op.controls)
        if after_each is not None:
            after_each(state, op)
    return state


# {{{ operador de deslocamento cíclico

def shift_gates(n_qubits: int, direction: ShiftDirection | str = ShiftDirection.INCREMENT, offset: int = 0) -> list[Gate]:
    """Cascata de MCX (número de controles decrescente) seguida de X no bit 0.

    Incremento: o bit t inverte se todos os bits abaixo dele são 1. O decremento
    é a mesma sequência em ordem reversa (todas as portas são involuções).
    """
    gates: list[Gate] = []
    for t in range(n_qubits - 1, 0, -1):
        controls = tuple(offset + q for q in range(t))
        gates.append(CNOT(controls[0], offset + t) if t == 1 else MCX(controls, offset + t))
    gates.append(X(offset))
    if ShiftDirection(direction) is ShiftDirection.DECREMENT:
        gates.reverse()
    return gates


def apply_shift(
    state: StateVector,
    direction: ShiftDirection | str = ShiftDirection.INCREMENT,
    qubits: Sequence[int] | None = None,
    use_permutation: bool = False,
) -> StateVector:
    """|i> -> |(i ± 1) mod 2^n> sobre o registrador contíguo ``qubits``."""
    direction = ShiftDirection(direction)
    if qubits is None:
        qubits = range(state.n_qubits)
    qubits = list(qubits)
    offset = qubits[0] if qubits else 0
    if qubits != list(range(offset, offset + len(qubits))):
        raise UsageError("shift register must be contiguous")
    if use_permutation and len(qubits) == state.n_qubits:
        step = 1 if direction is ShiftDirection.INCREMENT else -1
        state.amplitudes = np.roll(state.amplitudes, step)
        return state
    for gate in shift_gates(len(qubits), direction, offset):
        apply_gate(state, gate)
    return state

# }}}


# {{{ ansatz

def ansatz_gates(spec: AnsatzSpec, params, offset: int = 0) -> list[Gate]:
    """Camadas R_Y seguidas da escada de CNOTs.

    O fio j do circuito (j = 0 no topo) corresponde ao bit ``n-1-j``; a escada
    liga fio j -> fio j+1 e a topologia circular acrescenta fio n-1 -> fio 0.
    Parâmetros em ordem camada-major: ``params[i*n + j]``.
    """
    params = np.asarray(params, dtype=float).ravel()
    if params.size != spec.n_params:
        raise UsageError(f"expected {spec.n_params} parameters, got {params.size}")
    n = spec.n_qubits

    def bit(wire: int) -> int:
        return offset + n - 1 - wire

    gates: list[Gate] = []
    for i in range(spec.layers):
        for j in range(n):
            gates.append(RY(bit(j), float(params[i * n + j])))
        for j in range(n - 1):
            gates.append(CNOT(bit(j), bit(j + 1)))
        if spec.topology is Topology.CIRCULAR:
            gates.append(CNOT(bit(n - 1), bit(0)))
    return gates


def apply_ansatz(state_zero: StateVector, spec: AnsatzSpec, params) -> StateVector:
    if state_zero.n_qubits != spec.n_qubits:
        raise UsageError("state and ansatz qubit counts differ")
    for gate in ansatz_gates(spec, params):
        apply_gate(state_zero, gate)
    return state_zero


def prepare(spec: AnsatzSpec, params) -> np.ndarray:
    """Amplitudes de U(θ)|0...0>."""
    return apply_ansatz(StateVector.zero(spec.n_qubits), spec, params).amplitudes

# }}}


def controlled_apply(
    joint_state: StateVector,
    control_qubit: int,
    control_value: int,
    operation: Gate | Iterable[Gate],
) -> StateVector:
    """Aplica ``operation`` apenas no ramo em que ``control_qubit`` vale ``control_value``."""
    gates = [operation] if not isinstance(operation, (list, tuple)) else list(operation)
    for gate in gates:
        if control_qubit in gate_qubits(gate):
            raise UsageError(f"control qubit {control_qubit} overlaps the target register")
        apply_gate(joint_state, gate, ((control_qubit, control_value),))
    return joint_state


def inner_product(a: StateVector, b: StateVector) -> float:
    if a.n_qubits != b.n_qubits:
        raise UsageError(f"dimension mismatch: {a.n_qubits} vs {b.n_qubits} qubits")
    return float(np.dot(a.amplitudes, b.amplitudes))


def probabilities(state: StateVector) -> np.ndarray:
    p = np.square(state.amplitudes)
    return p / p.sum()


def sample_bitstrings(state: StateVector, shots: int, seed=None) -> dict[int, int]:
    if shots < 1:
        raise UsageError(f"shots must be >= 1, got {shots}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    counts = rng.multinomial(shots, probabilities(state))
    return {int(i): int(c) for i, c in enumerate(counts) if c}
