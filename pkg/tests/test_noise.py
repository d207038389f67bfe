import math

import numpy as np
import pytest
from pydantic import ValidationError

from fracvqa.core.errors import UsageError
from fracvqa.schemas.history import HistoryRecord, SolutionHistory
from fracvqa.schemas.noise import NOISE_PRESETS, NoiseConfig
from fracvqa.solver.measurement import MeasurementBackend
from fracvqa.solver.noise import (
    apply_noise_channel,
    apply_readout_flips,
    error_budget,
    execute,
    norm_reset_policy,
    split_shots,
)
from fracvqa.solver.statevector import CNOT, AnsatzSpec, H, Operation, StateVector, X


def test_error_budget_share():
    budget = error_budget(eta_O=0.03, eta_H=0.01)
    assert budget.eta_C == pytest.approx(math.sqrt(0.0036 + 0.0001))
    assert budget.overlap_share == pytest.approx(math.sqrt(36 / 37), abs=1e-12)
    assert budget.overlap_share == pytest.approx(0.986, abs=1e-3)
    assert error_budget(0.0, 0.0).overlap_share == 0.0
    with pytest.raises(UsageError):
        error_budget(-0.1, 0.1)


def test_noise_config():
    default = NOISE_PRESETS["default"]
    assert default.gate_probability(1) == 0.0005
    assert default.gate_probability(2) == 0.01
    assert default.gate_probability(5) == 0.03
    assert NOISE_PRESETS["none"].is_noiseless
    assert not NOISE_PRESETS["readout_only"].is_noiseless
    with pytest.raises(ValidationError):
        NoiseConfig(p_2q=1.0)


def test_split_shots():
    assert split_shots(10, 3) == [4, 3, 3]
    assert sum(split_shots(10_000, 64)) == 10_000
    assert split_shots(2, 64) == [1, 1]


def test_noise_channel_keeps_norm(rng):
    state = StateVector.zero(3)
    op = Operation(CNOT(0, 1))
    config = NoiseConfig(p_2q=0.99)
    hits = sum(apply_noise_channel(state, op, config, rng) for _ in range(50))
    assert hits > 0
    assert state.norm() == pytest.approx(1.0)
    assert not apply_noise_channel(state, op, NoiseConfig(), rng)


def test_readout_flips(rng):
    outcomes = np.zeros(10_000, dtype=np.int64)
    flipped = apply_readout_flips(outcomes, 2, 0.1, rng)
    for q in range(2):
        assert abs(((flipped >> q) & 1).mean() - 0.1) < 0.02
    np.testing.assert_array_equal(apply_readout_flips(outcomes, 2, 0.0, rng), outcomes)


def test_execute_counts(rng):
    ops = [Operation(H(0))]
    counts = execute(ops, 1, 4000, None, rng)
    assert counts.sum() == 4000
    assert abs(counts[0] / 4000 - 0.5) < 0.05
    noisy = execute(ops, 1, 4000, NOISE_PRESETS["default"], rng)
    assert noisy.sum() == 4000
    with pytest.raises(UsageError):
        execute(ops, 1, 0)


def test_noise_lowers_overlap_of_identical_states(rng):
    spec = AnsatzSpec(2, 1)
    noisy = MeasurementBackend.sampled(20_000, seed=1, noise=NOISE_PRESETS["default"])
    clean = MeasurementBackend.sampled(20_000, seed=1)
    values_noisy = []
    values_clean = []
    for _ in range(5):
        theta = rng.uniform(-np.pi, np.pi, spec.n_params)
        values_noisy.append(noisy.overlap(spec, theta, theta))
        values_clean.append(clean.overlap(spec, theta, theta))
    assert np.mean(values_noisy) < np.mean(values_clean)
    assert np.mean(values_noisy) < 0.99
    assert np.mean(values_clean) == pytest.approx(1.0)


def _history():
    history = SolutionHistory()
    history.append(HistoryRecord(k=0, theta=[0.0, 0.0], r=1.0))
    history.append(HistoryRecord(k=1, theta=[0.1, 0.2], r=-0.8))
    history.append(HistoryRecord(k=2, theta=[0.1, 0.3], r=0.5))
    return history


def test_norm_reset_policy():
    field = np.array([[1.0, 0.6, 0.3], [0.0, 0.8, 0.4]])
    history = _history()
    reset = norm_reset_policy(history, field, k=1)
    rec = reset.get(1)
    assert rec.r == pytest.approx(-1.0)
    assert rec.norm_reset and rec.r_measured == -0.8
    # outros passos e o histórico original ficam intactos
    assert reset.get(2).r == 0.5 and not reset.get(2).norm_reset
    assert history.get(1).r == -0.8

    again = norm_reset_policy(reset, 2 * field, k=1)
    assert again.get(1).r == pytest.approx(-2.0)
    assert again.get(1).r_measured == -0.8

    everything = norm_reset_policy(history, field)
    assert everything.get(2).r == pytest.approx(0.5)
    assert everything.get(0).r == 1.0
    with pytest.raises(UsageError):
        norm_reset_policy(history, field[:, :2])


def test_fault_seed_fixes_trajectories():
    # estados de base continuam de base sob falhas de Pauli: as contagens só
    # dependem do gerador das falhas
    ops = [Operation(X(0)), Operation(CNOT(0, 1))]
    config = NoiseConfig(p_1q=0.3, p_2q=0.3, trajectories=16)
    first = execute(ops, 2, 160, config, np.random.default_rng(1), np.random.default_rng(42))
    second = execute(ops, 2, 160, config, np.random.default_rng(2), np.random.default_rng(42))
    np.testing.assert_array_equal(first, second)
    assert first.sum() == 160
    assert first[0b11] < 160


def test_backend_uses_noise_seed_for_faults():
    seeded = NoiseConfig(p_2q=0.01, seed=11)
    a = MeasurementBackend.sampled(1000, seed=1, noise=seeded)
    b = MeasurementBackend.sampled(1000, seed=2, noise=seeded)
    assert a.next_fault_rng().random() == b.next_fault_rng().random()
    assert a.next_rng().random() != b.next_rng().random()
    assert MeasurementBackend.sampled(1000, seed=1, noise=NOISE_PRESETS["default"]).next_fault_rng() is None
    assert MeasurementBackend.sampled(1000, seed=1).next_fault_rng() is None


def test_noisy_backend_is_reproducible(rng):
    spec = AnsatzSpec(2, 1)
    theta_a = rng.uniform(-np.pi, np.pi, spec.n_params)
    theta_b = rng.uniform(-np.pi, np.pi, spec.n_params)
    for noise in (NOISE_PRESETS["default"], NoiseConfig(p_1q=0.001, p_2q=0.02, p_3q=0.05, seed=3)):
        a = MeasurementBackend.sampled(2000, seed=5, noise=noise)
        b = MeasurementBackend.sampled(2000, seed=5, noise=noise)
        for _ in range(3):
            assert a.overlap(spec, theta_a, theta_b) == b.overlap(spec, theta_a, theta_b)
