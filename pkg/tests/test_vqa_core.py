import math

import numpy as np
import pytest

from fracvqa.core.errors import MissingHistoryError, OptimizationError, UsageError
from fracvqa.schemas.history import HistoryRecord, SolutionHistory
from fracvqa.schemas.optimizer import OptimizerConfig
from fracvqa.solver.classical_reference import classical_subdiffusion, norm_fidelity, trace_error
from fracvqa.solver.fractional_core import build_crank_nicolson, history_coefficients
from fracvqa.solver.measurement import MeasurementBackend
from fracvqa.solver.models import SEIR_COHORTS, BurgersProblem, SeirProblem, SubdiffusionProblem
from fracvqa.solver import vqa_core
from fracvqa.solver.statevector import AnsatzSpec, prepare
from fracvqa.solver.vqa_core import (
    CountingCost,
    build_context,
    central_difference,
    cost,
    cost_burgers,
    cost_crank_nicolson,
    cost_fractional,
    cost_seir,
    cost_with_norm,
    denominator,
    encode_initial,
    minimize,
    numerator,
    optimal_norm,
    parameter_shift_gradient,
    reconstruct_field,
    step_optimizer,
    time_march,
)

SPEC = AnsatzSpec(2, 2)


def _history(rng, steps, cohorts=("u",), scale=1.0):
    history = SolutionHistory()
    for k in range(steps):
        for c in cohorts:
            history.append(HistoryRecord(
                k=k, cohort=c, theta=rng.uniform(-math.pi, math.pi, SPEC.n_params),
                r=scale * rng.uniform(0.5, 1.5),
            ))
    return history


def _u(theta):
    return prepare(SPEC, theta)


def _stored(history, m, c="u"):
    return history.r(m, c) * _u(history.theta(m, c))


def _assert_gradients_agree(theta, ctx):
    ps = parameter_shift_gradient(theta, ctx)
    fd = central_difference(lambda t: cost(t, ctx), theta, 1e-6)
    assert np.linalg.norm(ps - fd) <= 1e-5 * max(np.linalg.norm(ps), 1e-12)


# {{{ custos contra montagem densa

def test_fractional_cost_matches_dense(rng):
    problem = SubdiffusionProblem(alpha=0.4, N=4, M=4, boundary="dirichlet")
    history = _history(rng, 3)
    ctx = build_context(problem, SPEC, history, MeasurementBackend.exact(), k=3)
    theta = rng.uniform(-math.pi, math.pi, SPEC.n_params)
    u = _u(theta)
    rhs = history_coefficients(problem.weights(), 3).combine([_stored(history, m) for m in range(3)])
    F = float(u @ rhs)
    D = float(u @ problem.system_matrix().dense() @ u)
    assert numerator(theta, ctx) == pytest.approx(F, abs=1e-12)
    assert denominator(theta, ctx) == pytest.approx(D, abs=1e-10)
    assert cost_fractional(theta, ctx) == pytest.approx(-0.5 * F * F / D, rel=1e-10)


def test_burgers_cost_matches_dense(rng):
    problem = BurgersProblem(N=4, M=4, nu=0.05, boundary="periodic")
    history = _history(rng, 2)
    ctx = build_context(problem, SPEC, history, MeasurementBackend.exact(), k=2)
    theta = rng.uniform(-math.pi, math.pi, SPEC.n_params)
    u = _u(theta)
    v = _stored(history, 1)
    rhs = history_coefficients(problem.weights(), 2).combine([_stored(history, m) for m in range(2)])
    rhs = rhs - problem.b_adv * (np.roll(v, -1) - np.roll(v, 1)) * v
    F = float(u @ rhs)
    D = float(u @ problem.system_matrix().dense() @ u)
    assert cost_burgers(theta, ctx) == pytest.approx(-0.5 * F * F / D, rel=1e-10)


def test_crank_nicolson_cost_matches_dense(rng):
    problem = SubdiffusionProblem(alpha=1.0, N=4, M=4, boundary="neumann")
    history = _history(rng, 2)
    ctx = build_context(problem, SPEC, history, MeasurementBackend.exact(), k=2, scheme="crank_nicolson")
    pair = build_crank_nicolson(4, problem.a, "neumann")
    theta = rng.uniform(-math.pi, math.pi, SPEC.n_params)
    u = _u(theta)
    prev = _stored(history, 1)
    F = float(u @ (prev + pair.B.dense() @ prev))
    D = float(u @ pair.A.dense() @ u)
    assert cost_crank_nicolson(theta, ctx) == pytest.approx(-0.5 * F * F / D, rel=1e-10)


@pytest.mark.parametrize("cohort", SEIR_COHORTS)
def test_seir_cost_matches_dense(cohort, rng):
    problem = SeirProblem(N=4, M=4)
    history = _history(rng, 2, cohorts=SEIR_COHORTS, scale=10.0)
    ctx = build_context(problem, SPEC, history, MeasurementBackend.exact(), k=2, cohort=cohort)
    theta = rng.uniform(-math.pi, math.pi, SPEC.n_params)
    u = _u(theta)
    w = problem.weights(cohort)
    rhs = w.g * history_coefficients(w, 2).combine([_stored(history, m, cohort) for m in range(2)])
    A = problem.system_matrix(cohort).dense()
    prev = {c: _stored(history, 1, c) for c in SEIR_COHORTS}
    if cohort == "S":
        rhs = rhs + problem.Pi
        A = A + np.diag(problem.beta * prev["I"])
    elif cohort == "E":
        rhs = rhs + problem.beta * prev["I"] * prev["S"]
    elif cohort == "I":
        rhs = rhs + problem.sigma * prev["E"]
    else:
        rhs = rhs + problem.rho * prev["I"]
    F = float(u @ rhs)
    D = float(u @ A @ u)
    assert cost_seir(cohort, theta, ctx) == pytest.approx(-0.5 * F * F / D, rel=1e-10)


def test_cost_guards_reject_wrong_family(rng):
    history = _history(rng, 2)
    ctx = build_context(BurgersProblem(N=4, M=4), SPEC, history, MeasurementBackend.exact(), k=1)
    theta = np.zeros(SPEC.n_params)
    with pytest.raises(UsageError):
        cost_fractional(theta, ctx)
    with pytest.raises(UsageError):
        cost_crank_nicolson(theta, ctx)
    seir_ctx = build_context(SeirProblem(N=4, M=4), SPEC, _history(rng, 2, SEIR_COHORTS), MeasurementBackend.exact(), 1, cohort="E")
    with pytest.raises(UsageError):
        cost_seir("S", theta, seir_ctx)


def test_missing_history_is_reported(rng):
    ctx = build_context(SubdiffusionProblem(N=4, M=4), SPEC, _history(rng, 1), MeasurementBackend.exact(), k=3)
    with pytest.raises(MissingHistoryError):
        cost(np.zeros(SPEC.n_params), ctx)

# }}}


def test_norm_elimination(rng):
    problem = SubdiffusionProblem(alpha=0.5, N=4, M=4, boundary="periodic")
    ctx = build_context(problem, SPEC, _history(rng, 2), MeasurementBackend.exact(), k=2)
    theta = rng.uniform(-math.pi, math.pi, SPEC.n_params)
    r = optimal_norm(theta, ctx)
    assert r == pytest.approx(numerator(theta, ctx) / denominator(theta, ctx))
    assert cost_with_norm(r, theta, ctx) == pytest.approx(cost(theta, ctx), rel=1e-12)
    assert cost_with_norm(r + 0.1, theta, ctx) > cost(theta, ctx)
    assert cost_with_norm(r - 0.1, theta, ctx) > cost(theta, ctx)


# {{{ gradientes

def test_parameter_shift_gradients_all_families(rng):
    backend = MeasurementBackend.exact()
    contexts = [
        build_context(SubdiffusionProblem(alpha=0.3, N=4, M=8), SPEC, _history(rng, 4), backend, k=4),
        build_context(SubdiffusionProblem(alpha=0.7, N=4, M=8, boundary="neumann"), SPEC, _history(rng, 3),
                      backend, k=3, xi=2),
        build_context(SubdiffusionProblem(alpha=1.0, N=4, M=8), SPEC, _history(rng, 2), backend, k=2,
                      scheme="crank_nicolson"),
        build_context(BurgersProblem(N=4, M=8), SPEC, _history(rng, 3), backend, k=3),
    ]
    seir_history = _history(rng, 2, SEIR_COHORTS, scale=10.0)
    contexts += [
        build_context(SeirProblem(N=4, M=8), SPEC, seir_history, backend, k=2, cohort=c) for c in SEIR_COHORTS
    ]
    for ctx in contexts:
        for _ in range(5):
            _assert_gradients_agree(rng.uniform(-math.pi, math.pi, SPEC.n_params), ctx)

# }}}


# {{{ otimizadores

def test_quasi_newton_on_quadratic():
    def f(t):
        return float(np.sum((t - 1.0) ** 2))

    theta, stats = minimize(f, np.zeros(3), OptimizerConfig(rel_tol=1e-12, grad_tol=1e-10))
    np.testing.assert_allclose(theta, 1.0, atol=1e-4)
    assert stats.converged
    assert stats.n_eval > 0 and stats.n_iter > 0


def test_jacobian_calls_are_counted():
    calls = {"jac": 0, "cost": 0}

    def jac(t):
        calls["jac"] += 1
        return 2.0 * (t - 1.0)

    def f(t):
        calls["cost"] += 1
        return float(np.sum((t - 1.0) ** 2))

    theta, stats = minimize(f, np.zeros(2), OptimizerConfig(), jac=jac, jac_evaluations=5)
    assert calls["jac"] > 0
    assert stats.n_eval == calls["cost"] + 5 * calls["jac"]


def test_spsa_reduces_cost_with_fixed_budget():
    def f(t):
        return float(np.sum((t - 1.0) ** 2))

    config = OptimizerConfig(method="spsa", spsa_iterations=200, seed=0)
    theta, stats = minimize(f, np.zeros(3), config)
    assert stats.n_eval == 2 * 200 + 1
    assert stats.n_iter == 200
    assert stats.cost < 0.5 * f(np.zeros(3))
    again, _ = minimize(f, np.zeros(3), config)
    np.testing.assert_array_equal(theta, again)


def test_spsa_returns_best_evaluated_point():
    # ganho grande demais: os iterados oscilam e divergem, o melhor ponto é
    # a primeira perturbação (θ = -0.1)
    config = OptimizerConfig(method="spsa", spsa_iterations=5, spsa_a=3.0, spsa_A=0.0, seed=4)
    theta, stats = minimize(lambda t: float(t[0] ** 2), np.array([0.1]), config)
    np.testing.assert_allclose(theta, [-0.1])
    assert stats.cost == pytest.approx(0.01)
    assert not stats.converged
    assert "budget" in stats.message
    assert stats.n_eval == 2 * 5 + 1


def test_spsa_default_gains():
    a, A = OptimizerConfig(spsa_iterations=200).spsa_gains()
    assert A == pytest.approx(20.0)
    assert a == pytest.approx(0.05 * 21.0 ** 0.602)


def test_non_finite_cost_raises():
    counted = CountingCost(lambda t: float("nan"))
    with pytest.raises(OptimizationError):
        counted(np.zeros(2))

# }}}


def test_encode_recovers_representable_target(rng):
    target = -3.0 * prepare(SPEC, rng.uniform(-math.pi, math.pi, SPEC.n_params))
    enc = encode_initial(target, SPEC, threshold=1e-6, restarts=4, seed=1)
    assert enc.residual < 1e-4
    assert abs(enc.r) == pytest.approx(3.0)
    np.testing.assert_allclose(enc.r * prepare(SPEC, enc.theta), target, atol=1e-3)
    assert enc.n_eval > 0


def test_encode_rejects_bad_targets():
    with pytest.raises(UsageError):
        encode_initial(np.zeros(4), SPEC)
    with pytest.raises(UsageError):
        encode_initial(np.ones(8), SPEC)


def test_time_march_tracks_classical_oracle():
    problem = SubdiffusionProblem(alpha=0.5, T=0.5, N=4, M=2)
    optimizer = OptimizerConfig(gradient_method="parameter_shift", rel_tol=1e-12, grad_tol=1e-10, seed=3)
    history = time_march(problem, SPEC, optimizer, MeasurementBackend.exact(), encode_threshold=1e-6,
                         encode_restarts=4)
    classical = classical_subdiffusion(problem)
    assert [rec.k for rec in history.records] == [0, 1, 2]
    for rec in history.records[1:]:
        col = classical.column(rec.k)
        assert trace_error(prepare(SPEC, rec.theta), col) < 5e-3
        assert norm_fidelity(rec.r, float(np.linalg.norm(col))) == pytest.approx(1.0, abs=1e-2)
    field = reconstruct_field(history, SPEC)
    assert field.shape == (4, 3)


def test_time_march_norm_reset_needs_oracle():
    with pytest.raises(UsageError):
        time_march(SubdiffusionProblem(N=4, M=1), SPEC, OptimizerConfig(), MeasurementBackend.exact(),
                   norm_reset=True)


def test_time_march_with_norm_reset_records_measured_norm():
    problem = SubdiffusionProblem(alpha=0.5, N=4, M=1)
    classical = classical_subdiffusion(problem)
    history = time_march(problem, SPEC, OptimizerConfig(gradient_method="parameter_shift"),
                         MeasurementBackend.exact(), encode_restarts=2, classical=classical, norm_reset=True)
    rec = history.get(1)
    assert rec.norm_reset
    assert rec.r_measured is not None
    assert abs(rec.r) == pytest.approx(float(np.linalg.norm(classical.column(1))))


def test_seir_march_runs_all_cohorts():
    problem = SeirProblem(N=4, M=1)
    history = time_march(problem, SPEC, OptimizerConfig(gradient_method="parameter_shift"),
                         MeasurementBackend.exact(), encode_restarts=1)
    assert history.cohorts() == list(SEIR_COHORTS)
    assert all(history.last_k(c) == 1 for c in SEIR_COHORTS)


# {{{ propriedades do mínimo

TIGHT = OptimizerConfig(rel_tol=1e-14, grad_tol=1e-10)


def _contexts(rng):
    backend = MeasurementBackend.exact()
    seir_history = _history(rng, 2, SEIR_COHORTS, scale=10.0)
    return [
        build_context(SubdiffusionProblem(alpha=0.5, N=4, M=4), SPEC, _history(rng, 2), backend, k=2),
        build_context(SeirProblem(N=4, M=4), SPEC, seir_history, backend, k=2, cohort="S"),
        build_context(SeirProblem(N=4, M=4), SPEC, seir_history, backend, k=2, cohort="E"),
    ]


def test_joint_minimum_matches_eliminated_norm(rng):
    for ctx in _contexts(rng):
        theta_star, stats = minimize(lambda t: cost(t, ctx), np.zeros(SPEC.n_params), TIGHT)
        r_star = optimal_norm(theta_star, ctx)
        start = np.concatenate([[r_star], theta_star + 1e-2])
        joint, joint_stats = minimize(lambda x: cost_with_norm(x[0], x[1:], ctx), start, TIGHT)
        assert joint_stats.cost == pytest.approx(stats.cost, rel=1e-6)
        overlap = float(_u(joint[1:]) @ _u(theta_star))
        assert overlap ** 2 > 1.0 - 1e-5
        assert joint[0] * np.sign(overlap) == pytest.approx(r_star, rel=1e-3)


def test_cost_is_bounded_by_classical_solution(rng):
    problem = SubdiffusionProblem(alpha=0.5, N=4, M=4, boundary="periodic")
    history = _history(rng, 2)
    ctx = build_context(problem, SPEC, history, MeasurementBackend.exact(), k=2)
    rhs = history_coefficients(problem.weights(), 2).combine([_stored(history, m) for m in range(2)])
    solution = np.linalg.solve(problem.system_matrix().dense(), rhs)
    bound = -0.5 * float(rhs @ solution)

    fit = encode_initial(solution, SPEC, threshold=1e-6, restarts=4, seed=2)
    assert fit.residual < 1e-5
    at_solution = cost(fit.theta, ctx)
    assert at_solution == pytest.approx(bound, rel=1e-6)
    for _ in range(100):
        value = cost(rng.uniform(-math.pi, math.pi, SPEC.n_params), ctx)
        assert value >= bound - 1e-12 * abs(bound)
        assert at_solution <= value + 1e-8 * abs(bound)


def test_warm_start_needs_fewer_evaluations():
    problem = SubdiffusionProblem(alpha=0.5, T=0.5, N=4, M=4)
    totals = {}
    for warm in (True, False):
        optimizer = OptimizerConfig(gradient_method="parameter_shift", rel_tol=1e-10, seed=3, warm_start=warm)
        history = time_march(problem, SPEC, optimizer, MeasurementBackend.exact(), encode_threshold=1e-6,
                             encode_restarts=2)
        totals[warm] = sum(rec.n_eval for rec in history.records if rec.k >= 1)
    assert totals[True] < totals[False]


def test_spsa_close_to_quasi_newton_on_periodic_step():
    spec = AnsatzSpec(2, 1)
    problem = SubdiffusionProblem(alpha=0.5, T=0.5, N=4, M=2, boundary="periodic")
    enc = encode_initial(problem.initial_values(), spec, restarts=4, seed=0)
    history = SolutionHistory()
    history.append(HistoryRecord(k=0, theta=enc.theta, r=enc.r))
    ctx = build_context(problem, spec, history, MeasurementBackend.exact(), k=1)

    _, qn = minimize(lambda t: cost(t, ctx), enc.theta, OptimizerConfig(rel_tol=1e-12, grad_tol=1e-10))
    start = abs(cost(enc.theta, ctx))
    spsa_config = OptimizerConfig(method="spsa", spsa_iterations=200, spsa_a=1.0 / start, seed=0)
    _, spsa = minimize(lambda t: cost(t, ctx), enc.theta, spsa_config)
    assert spsa.cost <= qn.cost + 0.01 * abs(qn.cost)


def test_parameter_shift_evaluation_count(rng, monkeypatch):
    ctx = _contexts(rng)[0]
    P = SPEC.n_params
    calls = {"numerator": 0, "denominator": 0}
    real_numerator, real_denominator = vqa_core.numerator, vqa_core.denominator

    def counting_numerator(theta, c):
        calls["numerator"] += 1
        return real_numerator(theta, c)

    def counting_denominator(theta, c):
        calls["denominator"] += 1
        return real_denominator(theta, c)

    monkeypatch.setattr(vqa_core, "numerator", counting_numerator)
    monkeypatch.setattr(vqa_core, "denominator", counting_denominator)
    parameter_shift_gradient(rng.uniform(-math.pi, math.pi, P), ctx)
    assert calls == {"numerator": P + 1, "denominator": 2 * P + 1}


def test_step_counts_parameter_shift_gradients(rng, monkeypatch):
    ctx = _contexts(rng)[0]
    calls = {"cost": 0, "gradient": 0}
    real_cost, real_gradient = vqa_core.cost, vqa_core.parameter_shift_gradient

    def counting_cost(theta, c):
        calls["cost"] += 1
        return real_cost(theta, c)

    def counting_gradient(theta, c):
        calls["gradient"] += 1
        return real_gradient(theta, c)

    monkeypatch.setattr(vqa_core, "cost", counting_cost)
    monkeypatch.setattr(vqa_core, "parameter_shift_gradient", counting_gradient)
    optimizer = OptimizerConfig(gradient_method="parameter_shift")
    _, stats, _ = vqa_core._optimize_step(ctx, np.zeros(SPEC.n_params), optimizer)
    assert calls["gradient"] > 0
    assert stats.n_eval == calls["cost"] + (3 * SPEC.n_params + 1) * calls["gradient"]

# }}}


def test_each_step_gets_its_own_optimizer_seed(monkeypatch):
    seeds = []
    real_step = vqa_core._optimize_step

    def recording_step(ctx, theta_init, optimizer):
        seeds.append(optimizer.seed)
        return real_step(ctx, theta_init, optimizer)

    monkeypatch.setattr(vqa_core, "_optimize_step", recording_step)
    problem = SubdiffusionProblem(alpha=0.5, N=4, M=3)
    optimizer = OptimizerConfig(method="spsa", spsa_iterations=5, seed=3)
    for _ in range(2):
        time_march(problem, SPEC, optimizer, MeasurementBackend.exact())
    first, second = seeds[:3], seeds[3:]
    assert first == second
    assert len(set(first)) == 3
    assert 3 not in first

    assert step_optimizer(optimizer, 1, 0).seed != step_optimizer(optimizer, 1, 1).seed
    unseeded = OptimizerConfig()
    assert step_optimizer(unseeded, 2) is unseeded
