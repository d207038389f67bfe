"""Avaliação de overlaps e valores esperados usados nas funções custo.

Três modos:

* ``exact``   -- álgebra linear direta sobre os vetores de amplitudes;
* ``circuit`` -- os circuitos de teste de Hadamard, lidos com as
  probabilidades exatas (sem shots), útil para validar as construções;
* ``sampled`` -- os mesmos circuitos com amostragem de shots e ruído opcional.

Registradores: dados nos qubits 0..n-1; a ancila é sempre o qubit mais alto.
No teste de três registradores, reg1 = 0..n-1, reg2 = n..2n-1, ancila = 2n.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from fracvqa.core.errors import UsageError
from fracvqa.schemas.noise import NoiseConfig
from fracvqa.solver.fractional_core import Boundary, SystemMatrix
from fracvqa.solver.noise import execute
from fracvqa.solver.statevector import (
    CNOT,
    AnsatzSpec,
    H,
    Operation,
    ShiftDirection,
    StateVector,
    ansatz_gates,
    apply_operations,
    prepare,
    probabilities,
    shift_gates,
)

logger = logging.getLogger(__name__)

_CACHE_LIMIT = 4096


class BackendMode(str, Enum):
    EXACT = "exact"
    CIRCUIT = "circuit"
    SAMPLED = "sampled"


class TermKind(str, Enum):
    H1 = "H1"
    H2 = "H2"
    H3 = "H3"
    H4 = "H4"


class ShiftSign(str, Enum):
    """Vizinho usado no termo não linear: PLUS lê u_{x+1}, MINUS lê u_{x-1}."""

    PLUS = "+"
    MINUS = "-"


@dataclass(frozen=True)
class ObservableTerm:
    kind: TermKind
    conjugated: bool
    coefficient: float

    @property
    def has_x(self) -> bool:
        return self.kind is not TermKind.H4

    @property
    def projector(self) -> bool:
        return self.kind in (TermKind.H3, TermKind.H4)


def hamiltonian_terms(A: SystemMatrix) -> list[ObservableTerm]:
    """Decomposição ⟨A⟩ = b + Σ coef·⟨T⟩.

    H1 = X no bit 0; S†H2S = S†X0S; S†H3S = S†(P0⊗X0)S; S†H4S = S†(P0⊗I)S,
    com P0 o projetor dos bits 1..n-1 em zero e (Su)_i = u_{i-1}.
    """
    a = A.a
    terms = [
        ObservableTerm(TermKind.H1, False, -a),
        ObservableTerm(TermKind.H2, True, -a),
    ]
    if A.boundary in (Boundary.DIRICHLET, Boundary.NEUMANN):
        terms.append(ObservableTerm(TermKind.H3, True, a))
    if A.boundary is Boundary.NEUMANN:
        terms.append(ObservableTerm(TermKind.H4, True, -a))
    return terms


def term_eigenvalues(term: ObservableTerm, n_qubits: int) -> np.ndarray:
    """Autovalor do observável rotacionado (X0 -> Z0) para cada índice da base."""
    idx = np.arange(2 ** n_qubits)
    values = np.ones(idx.size)
    if term.has_x:
        values *= 1.0 - 2.0 * (idx & 1)
    if term.projector:
        values *= ((idx >> 1) == 0).astype(float)
    return values


def term_bilinear_dense(u: np.ndarray, w: np.ndarray, term: ObservableTerm) -> float:
    """⟨u|T|w⟩ direto sobre amplitudes."""
    if term.conjugated:
        u = np.roll(u, 1)
        w = np.roll(w, 1)
    idx = np.arange(u.size)
    tw = w[idx ^ 1] if term.has_x else w
    if term.projector:
        mask = (idx >> 1) == 0
        return float(np.dot(u[mask], tw[mask]))
    return float(np.dot(u, tw))


def neighbor(v: np.ndarray, direction: ShiftSign | str) -> np.ndarray:
    """Campo deslocado com periodicidade: PLUS -> v_{x+1}, MINUS -> v_{x-1}."""
    if ShiftSign(direction) is ShiftSign.PLUS:
        return np.roll(v, -1)
    return np.roll(v, 1)


# {{{ construção de circuitos

def _controlled(gates, conditions) -> list[Operation]:
    return [Operation(g, tuple(conditions)) for g in gates]


def expectation_circuit(spec: AnsatzSpec, theta, term: ObservableTerm) -> list[Operation]:
    """U(θ), deslocamento S opcional e rotação H no bit 0 para o fator X."""
    ops = _controlled(ansatz_gates(spec, theta), ())
    if term.conjugated:
        ops += _controlled(shift_gates(spec.n_qubits, ShiftDirection.INCREMENT), ())
    if term.has_x:
        ops.append(Operation(H(0)))
    return ops


def hadamard_test_circuit(spec: AnsatzSpec, theta_u, theta_w, term: ObservableTerm | None = None) -> list[Operation]:
    """Teste de Hadamard para ⟨u|T|w⟩ (T = identidade quando ``term`` é None).

    Ramo 0 da ancila prepara u, ramo 1 prepara w; a rotação do observável age
    sobre os dados sem controle antes do H final da ancila.
    """
    n = spec.n_qubits
    anc = n
    ops = [Operation(H(anc))]
    ops += _controlled(ansatz_gates(spec, theta_u), [(anc, 0)])
    ops += _controlled(ansatz_gates(spec, theta_w), [(anc, 1)])
    if term is not None:
        if term.conjugated:
            ops += _controlled(shift_gates(n, ShiftDirection.INCREMENT), ())
        if term.has_x:
            ops.append(Operation(H(0)))
    ops.append(Operation(H(anc)))
    return ops


def triple_overlap_circuit(
    spec: AnsatzSpec,
    theta_k,
    theta_a,
    theta_b,
    direction: ShiftSign | str | None = None,
    shared_first: bool = False,
) -> list[Operation]:
    """Σ_x u_x a_x (Λb)_x com três registradores.

    Ramo 0: reg1 = U(θ_k)|0>, reg2 = |0>. Ramo 1: reg1 = U(θ_a)|0>,
    reg2 = U(θ_b)|0>, deslocado, e depois CNOT q -> n+q, que leva |x>|y> em
    |x>|x⊕y>; a sobreposição entre ramos sobrevive apenas em y = x.
    PLUS (vizinho x+1) é o decremento S† em reg2.
    """
    n = spec.n_qubits
    anc = 2 * n
    ops = [Operation(H(anc))]
    if shared_first:
        ops += _controlled(ansatz_gates(spec, theta_k), ())
    else:
        ops += _controlled(ansatz_gates(spec, theta_k), [(anc, 0)])
        ops += _controlled(ansatz_gates(spec, theta_a), [(anc, 1)])
    ops += _controlled(ansatz_gates(spec, theta_b, offset=n), [(anc, 1)])
    if direction is not None:
        shift = ShiftDirection.DECREMENT if ShiftSign(direction) is ShiftSign.PLUS else ShiftDirection.INCREMENT
        ops += _controlled(shift_gates(n, shift, offset=n), [(anc, 1)])
    # escada transversal reg1 -> reg2
    ops += _controlled([CNOT(q, n + q) for q in range(n)], [(anc, 1)])
    ops.append(Operation(H(anc)))
    return ops


def uniform_overlap_circuit(spec: AnsatzSpec, theta) -> list[Operation]:
    n = spec.n_qubits
    anc = n
    ops = [Operation(H(anc))]
    ops += _controlled(ansatz_gates(spec, theta), [(anc, 0)])
    ops += _controlled([H(q) for q in range(n)], [(anc, 1)])
    ops.append(Operation(H(anc)))
    return ops


def ancilla_weights(n_total: int, ancilla: int, data_values: np.ndarray | None = None) -> np.ndarray:
    """Peso (-1)^{ancila}·o(dados) para cada resultado; estimador = média ponderada."""
    idx = np.arange(2 ** n_total)
    sign = 1.0 - 2.0 * ((idx >> ancilla) & 1)
    if data_values is None:
        return sign
    n_data = int(data_values.size).bit_length() - 1
    data = idx & ((1 << n_data) - 1)
    return sign * data_values[data]

# }}}


@dataclass
class MeasurementBackend:
    mode: BackendMode = BackendMode.EXACT
    shots: int = 10_000
    seed: int | None = None
    noise: NoiseConfig | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False)
    n_circuits: int = field(default=0, init=False)

    def __post_init__(self):
        self.mode = BackendMode(self.mode)
        if self.shots < 1:
            raise UsageError(f"shots must be >= 1, got {self.shots}")
        self._seq = np.random.SeedSequence(self.seed)
        self._fault_seq = None
        if self.noise is not None and self.noise.seed is not None:
            self._fault_seq = np.random.SeedSequence(self.noise.seed)

    @classmethod
    def exact(cls) -> "MeasurementBackend":
        return cls(mode=BackendMode.EXACT)

    @classmethod
    def sampled(cls, shots: int, seed: int | None = None, noise: NoiseConfig | None = None) -> "MeasurementBackend":
        return cls(mode=BackendMode.SAMPLED, shots=shots, seed=seed, noise=noise)

    @property
    def is_exact(self) -> bool:
        return self.mode is BackendMode.EXACT

    def next_rng(self) -> np.random.Generator:
        """Gerador independente por avaliação, derivado da semente mestre."""
        return np.random.default_rng(self._seq.spawn(1)[0])

    def next_fault_rng(self) -> np.random.Generator | None:
        """Gerador das falhas de porta quando o ruído tem semente própria."""
        if self._fault_seq is None:
            return None
        return np.random.default_rng(self._fault_seq.spawn(1)[0])

    def state(self, spec: AnsatzSpec, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).ravel()
        key = (spec, theta.tobytes())
        cached = self._cache.get(key)
        if cached is None:
            if len(self._cache) >= _CACHE_LIMIT:
                self._cache.clear()
            cached = prepare(spec, theta)
            cached.setflags(write=False)
            self._cache[key] = cached
        return cached

    def _estimate(self, ops: Sequence[Operation], n_total: int, weights: np.ndarray) -> float:
        self.n_circuits += 1
        if self.mode is BackendMode.CIRCUIT:
            state = apply_operations(StateVector.zero(n_total), ops)
            return float(np.dot(probabilities(state), weights))
        counts = execute(ops, n_total, self.shots, self.noise, self.next_rng(), self.next_fault_rng())
        return float(np.dot(counts, weights) / counts.sum())

    @staticmethod
    def _check(*specs: AnsatzSpec) -> None:
        first = specs[0]
        for other in specs[1:]:
            if other != first:
                raise UsageError(f"ansatz mismatch: {first} vs {other}")

    # {{{ operações

    def overlap(self, spec: AnsatzSpec, theta_u, theta_v) -> float:
        """Re⟨u|v⟩."""
        if self.is_exact:
            return float(np.dot(self.state(spec, theta_u), self.state(spec, theta_v)))
        ops = hadamard_test_circuit(spec, theta_u, theta_v)
        return self._estimate(ops, spec.n_qubits + 1, ancilla_weights(spec.n_qubits + 1, spec.n_qubits))

    def term_expectation(self, spec: AnsatzSpec, theta, term: ObservableTerm) -> float:
        if self.is_exact:
            u = self.state(spec, theta)
            return term_bilinear_dense(u, u, term)
        ops = expectation_circuit(spec, theta, term)
        return self._estimate(ops, spec.n_qubits, term_eigenvalues(term, spec.n_qubits))

    def term_bilinear(self, spec: AnsatzSpec, theta_u, theta_w, term: ObservableTerm) -> float:
        if self.is_exact:
            return term_bilinear_dense(self.state(spec, theta_u), self.state(spec, theta_w), term)
        n = spec.n_qubits
        ops = hadamard_test_circuit(spec, theta_u, theta_w, term)
        return self._estimate(ops, n + 1, ancilla_weights(n + 1, n, term_eigenvalues(term, n)))

    def expect_hamiltonian(self, spec: AnsatzSpec, theta, A: SystemMatrix) -> float:
        """⟨u|A|u⟩ pela decomposição em termos simples."""
        if A.n_points != 2 ** spec.n_qubits:
            raise UsageError(f"matrix of size {A.n_points} does not match {spec.n_qubits} qubits")
        value = A.b
        for term in hamiltonian_terms(A):
            if term.coefficient != 0.0:
                value += term.coefficient * self.term_expectation(spec, theta, term)
        return value

    def matrix_overlap(self, spec: AnsatzSpec, theta_u, theta_w, B: SystemMatrix) -> float:
        """⟨u|B|w⟩ pela mesma decomposição aplicada à forma bilinear."""
        if B.n_points != 2 ** spec.n_qubits:
            raise UsageError(f"matrix of size {B.n_points} does not match {spec.n_qubits} qubits")
        value = 0.0
        if B.b != 0.0:
            value += B.b * self.overlap(spec, theta_u, theta_w)
        for term in hamiltonian_terms(B):
            if term.coefficient != 0.0:
                value += term.coefficient * self.term_bilinear(spec, theta_u, theta_w, term)
        return value

    def triple_overlap(
        self,
        spec: AnsatzSpec,
        theta_k,
        theta_a,
        theta_b,
        direction: ShiftSign | str | None = None,
        scale: float = 1.0,
    ) -> float:
        """scale·Σ_x u_x a_x (Λb)_x; ``direction`` None significa sem deslocamento."""
        if self.is_exact:
            u = self.state(spec, theta_k)
            a = self.state(spec, theta_a)
            b = self.state(spec, theta_b)
            if direction is not None:
                b = neighbor(b, direction)
            return scale * float(np.sum(u * a * b))
        n = spec.n_qubits
        ops = triple_overlap_circuit(spec, theta_k, theta_a, theta_b, direction)
        return scale * self._estimate(ops, 2 * n + 1, ancilla_weights(2 * n + 1, 2 * n))

    def nonlinear_overlap(self, spec: AnsatzSpec, theta_k, theta_prev, r: float, direction: ShiftSign | str) -> float:
        """⟨u^k, Λ±(r v) r v⟩ = r²·Σ_x u_x v_{x±1} v_x."""
        return self.triple_overlap(spec, theta_k, theta_prev, theta_prev, direction, scale=r * r)

    def diagonal_expectation(self, spec: AnsatzSpec, theta_s, theta_i, r: float) -> float:
        """r·Σ_x s_x² i_x."""
        if self.is_exact:
            s = self.state(spec, theta_s)
            i = self.state(spec, theta_i)
            return r * float(np.sum(s * s * i))
        n = spec.n_qubits
        ops = triple_overlap_circuit(spec, theta_s, theta_s, theta_i, None, shared_first=True)
        return r * self._estimate(ops, 2 * n + 1, ancilla_weights(2 * n + 1, 2 * n))

    def uniform_overlap(self, spec: AnsatzSpec, theta) -> float:
        """√(2^n)·⟨u|+^n⟩ = Σ_x u_x."""
        if self.is_exact:
            return float(np.sum(self.state(spec, theta)))
        n = spec.n_qubits
        ops = uniform_overlap_circuit(spec, theta)
        return np.sqrt(2.0 ** n) * self._estimate(ops, n + 1, ancilla_weights(n + 1, n))

    # }}}
