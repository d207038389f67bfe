"""Ruído de porta por trajetórias, inversão de leitura e a análise de erro
(orçamento η_O/η_H/η_C e reset da norma).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from fracvqa.core.errors import UsageError
from fracvqa.schemas.history import HistoryRecord, SolutionHistory
from fracvqa.schemas.noise import NoiseConfig
from fracvqa.solver.statevector import (
    Operation,
    StateVector,
    X,
    Z,
    apply_gate,
    apply_operations,
    probabilities,
)

logger = logging.getLogger(__name__)

# Paulis reais por qubit: 0 = I, 1 = X, 2 = Z, 3 = ZX (iY a menos de fase)
_PAULI_CHOICES = 4


def apply_noise_channel(state: StateVector, operation: Operation, config: NoiseConfig, rng: np.random.Generator) -> bool:
    """Sorteia uma falha após ``operation``; devolve True quando uma Pauli foi aplicada."""
    qubits = operation.qubits()
    p = config.gate_probability(len(qubits))
    if p <= 0.0 or rng.random() >= p:
        return False
    while True:
        choice = rng.integers(0, _PAULI_CHOICES, size=len(qubits))
        if choice.any():
            break
    for q, c in zip(qubits, choice):
        if c in (2, 3):
            apply_gate(state, Z(q))
        if c in (1, 3):
            apply_gate(state, X(q))
    return True


def apply_readout_flips(outcomes: np.ndarray, n_qubits: int, p_readout: float, rng: np.random.Generator) -> np.ndarray:
    """Inverte cada bit de cada resultado com probabilidade ``p_readout``."""
    if p_readout <= 0.0 or outcomes.size == 0:
        return outcomes
    flipped = outcomes.copy()
    for q in range(n_qubits):
        mask = rng.random(outcomes.size) < p_readout
        flipped[mask] ^= 1 << q
    return flipped


def _sample(state: StateVector, shots: int, p_readout: float, rng: np.random.Generator) -> np.ndarray:
    counts = rng.multinomial(shots, probabilities(state))
    if p_readout <= 0.0:
        return counts
    outcomes = np.repeat(np.arange(counts.size), counts)
    outcomes = apply_readout_flips(outcomes, state.n_qubits, p_readout, rng)
    return np.bincount(outcomes, minlength=counts.size)


def split_shots(shots: int, trajectories: int) -> list[int]:
    trajectories = max(1, min(trajectories, shots))
    base, extra = divmod(shots, trajectories)
    return [base + (1 if i < extra else 0) for i in range(trajectories)]


def execute(
    operations: Sequence[Operation],
    n_qubits: int,
    shots: int,
    noise: NoiseConfig | None = None,
    rng: np.random.Generator | None = None,
    fault_rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Executa o circuito a partir de |0...0> e devolve contagens por índice da base.

    Sem ruído há uma única trajetória; com ruído os shots são divididos entre
    ``noise.trajectories`` trajetórias, cada uma com suas próprias falhas.
    ``fault_rng`` sorteia só as falhas de porta (padrão: ``rng``), de modo que
    as trajetórias podem ser fixadas independentemente da amostragem dos shots.
    """
    if shots < 1:
        raise UsageError(f"shots must be >= 1, got {shots}")
    rng = rng if rng is not None else np.random.default_rng()
    fault_rng = fault_rng if fault_rng is not None else rng
    operations = list(operations)

    if noise is None or noise.is_noiseless:
        state = apply_operations(StateVector.zero(n_qubits), operations)
        return _sample(state, shots, 0.0, rng)

    counts = np.zeros(2 ** n_qubits, dtype=np.int64)
    gate_noise = noise.p_1q > 0 or noise.p_2q > 0 or noise.p_3q > 0
    if not gate_noise:
        state = apply_operations(StateVector.zero(n_qubits), operations)
        return _sample(state, shots, noise.p_readout, rng)

    for part in split_shots(shots, noise.trajectories):
        faults = 0

        def hook(st: StateVector, op: Operation) -> None:
            nonlocal faults
            if apply_noise_channel(st, op, noise, fault_rng):
                faults += 1

        state = apply_operations(StateVector.zero(n_qubits), operations, after_each=hook)
        counts += _sample(state, part, noise.p_readout, rng)
        logger.debug("[NOISE] trajectory with %d shots, %d faults", part, faults)
    return counts


@dataclass(frozen=True)
class NoiseErrorBudget:
    eta_O: float
    eta_H: float
    eta_C: float

    @property
    def overlap_share_squared(self) -> float:
        """Fração da variância do custo devida ao overlap: (2η_O)²/η_C²."""
        if self.eta_C == 0.0:
            return 0.0
        return (2.0 * self.eta_O) ** 2 / self.eta_C ** 2

    @property
    def overlap_share(self) -> float:
        return math.sqrt(self.overlap_share_squared)


def error_budget(eta_O: float, eta_H: float) -> NoiseErrorBudget:
    """η_C = √((2η_O)² + η_H²): o overlap entra ao quadrado no custo."""
    if eta_O < 0 or eta_H < 0:
        raise UsageError("noise errors must be non-negative")
    eta_C = math.sqrt((2.0 * eta_O) ** 2 + eta_H ** 2)
    return NoiseErrorBudget(eta_O=float(eta_O), eta_H=float(eta_H), eta_C=eta_C)


def norm_reset_policy(history: SolutionHistory, classical_field, cohort: str = "u", k: int | None = None) -> SolutionHistory:
    """Troca r^k armazenado pela norma clássica (sem erro) antes do próximo passo.

    ``classical_field`` é uma grade N×(M+1); com ``k`` só esse registro muda.
    """
    field = np.asarray(classical_field, dtype=float)
    updated: list[HistoryRecord] = []
    for rec in history.records:
        if rec.cohort == cohort and rec.k > 0 and (k is None or rec.k == k):
            if rec.k >= field.shape[1]:
                raise UsageError(f"classical field has no column {rec.k}")
            r_classical = float(np.linalg.norm(field[:, rec.k]))
            # o sinal de r acompanha o sinal global do estado do ansatz
            sign = -1.0 if rec.r < 0 else 1.0
            rec = rec.model_copy(
                update={"r": sign * r_classical, "norm_reset": True, "r_measured": rec.r_measured if rec.norm_reset else rec.r}
            )
        updated.append(rec)
    return SolutionHistory(records=updated)
