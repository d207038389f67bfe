import numpy as np
import pytest

from fracvqa.core.errors import UsageError
from fracvqa.solver.statevector import (
    CNOT,
    RY,
    AnsatzSpec,
    H,
    MCX,
    ShiftDirection,
    StateVector,
    X,
    apply_gate,
    apply_shift,
    controlled_apply,
    inner_product,
    prepare,
    sample_bitstrings,
)


def test_zero_parameters_prepare_ground_state():
    spec = AnsatzSpec(3, 2)
    u = prepare(spec, np.zeros(spec.n_params))
    expected = np.zeros(8)
    expected[0] = 1.0
    np.testing.assert_allclose(u, expected)


def test_single_qubit_rotation():
    u = prepare(AnsatzSpec(1, 1), [0.7])
    np.testing.assert_allclose(u, [np.cos(0.35), np.sin(0.35)])


@pytest.mark.parametrize("topology", ["linear", "circular"])
def test_ansatz_is_normalized(topology, rng):
    spec = AnsatzSpec(4, 3, topology)
    u = prepare(spec, rng.uniform(-np.pi, np.pi, spec.n_params))
    assert np.linalg.norm(u) == pytest.approx(1.0, abs=1e-12)


def test_ansatz_spec_validation():
    assert AnsatzSpec(5, 4).n_params == 20
    with pytest.raises(UsageError):
        AnsatzSpec(2, 1, "circular")
    with pytest.raises(UsageError):
        AnsatzSpec(0, 1)
    with pytest.raises(UsageError):
        prepare(AnsatzSpec(2, 1), [0.1, 0.2, 0.3])


def test_gates_on_basis_states():
    state = StateVector.zero(2)
    apply_gate(state, X(0))
    apply_gate(state, CNOT(0, 1))
    np.testing.assert_allclose(state.amplitudes, [0, 0, 0, 1])

    state = StateVector.zero(3)
    apply_gate(state, X(0))
    apply_gate(state, X(1))
    apply_gate(state, MCX((0, 1), 2))
    assert state.amplitudes[7] == 1.0

    state = StateVector.zero(1)
    apply_gate(state, H(0))
    np.testing.assert_allclose(state.amplitudes, [1 / np.sqrt(2), 1 / np.sqrt(2)])


def test_gate_validation():
    state = StateVector.zero(2)
    with pytest.raises(UsageError):
        apply_gate(state, X(2))
    with pytest.raises(UsageError):
        apply_gate(state, CNOT(1, 1))
    with pytest.raises(UsageError):
        apply_gate(state, RY(0, 0.1), controls=((1, 2),))


@pytest.mark.parametrize("direction", list(ShiftDirection))
def test_shift_circuit_matches_permutation(direction, rng):
    amps = rng.normal(size=16)
    by_gates = apply_shift(StateVector.from_amplitudes(amps), direction)
    by_roll = apply_shift(StateVector.from_amplitudes(amps), direction, use_permutation=True)
    np.testing.assert_allclose(by_gates.amplitudes, by_roll.amplitudes)
    step = 1 if direction is ShiftDirection.INCREMENT else -1
    np.testing.assert_allclose(by_gates.amplitudes, np.roll(amps, step))


def test_shift_on_sub_register(rng):
    # registrador alto (qubits 2..3) de um estado produto
    low = rng.normal(size=4)
    high = rng.normal(size=4)
    state = StateVector.from_amplitudes(np.kron(high, low))
    apply_shift(state, "increment", qubits=[2, 3])
    np.testing.assert_allclose(state.amplitudes, np.kron(np.roll(high, 1), low))
    with pytest.raises(UsageError):
        apply_shift(state, "increment", qubits=[1, 3])


def test_controlled_apply_only_touches_branch():
    state = StateVector.zero(2)
    apply_gate(state, H(1))
    controlled_apply(state, 1, 1, X(0))
    np.testing.assert_allclose(state.amplitudes, [1 / np.sqrt(2), 0, 0, 1 / np.sqrt(2)])
    with pytest.raises(UsageError):
        controlled_apply(state, 0, 1, X(0))


def test_inner_product_and_sampling():
    a = StateVector.from_amplitudes([0.6, 0.8])
    b = StateVector.from_amplitudes([0.8, 0.6])
    assert inner_product(a, b) == pytest.approx(0.96)
    with pytest.raises(UsageError):
        inner_product(a, StateVector.zero(2))

    counts = sample_bitstrings(a, 1000, seed=3)
    assert sum(counts.values()) == 1000
    assert counts == sample_bitstrings(a, 1000, seed=3)
    with pytest.raises(UsageError):
        sample_bitstrings(a, 0)


def test_hadamard_counts_within_binomial_band():
    state = StateVector.zero(1)
    apply_gate(state, H(0))
    shots = 10 ** 6
    counts = sample_bitstrings(state, shots, seed=21)
    # σ = √(shots/4) = 500
    assert abs(counts[0] - shots / 2) <= 4 * 500
    assert counts[0] + counts[1] == shots
