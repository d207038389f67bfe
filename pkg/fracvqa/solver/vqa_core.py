"""Marcha temporal variacional.

Cada passo k minimiza um custo quadrático-menos-linear na forma
``C = ½ r² D(θ) − r F(θ)``, com D = ⟨u|A|u⟩ (mais acoplamentos diagonais) e
F = ⟨u, f̃^{k-1}⟩ linear em u. A norma é eliminada analiticamente:
r = F/D e C(θ) = −½ F²/D.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize as scipy_minimize

from fracvqa.core.errors import (
    FracVQAError,
    OptimizationError,
    SingularOperatorError,
    UsageError,
)
from fracvqa.schemas.history import HistoryRecord, SolutionHistory
from fracvqa.schemas.optimizer import OptimizerConfig
from fracvqa.solver.fractional_core import (
    CaputoWeights,
    SystemMatrix,
    build_crank_nicolson,
    history_coefficients,
)
from fracvqa.solver.measurement import MeasurementBackend, ShiftSign
from fracvqa.solver.models import (
    SEIR_COHORTS,
    BurgersProblem,
    SeirProblem,
    SubdiffusionProblem,
)
from fracvqa.solver.noise import norm_reset_policy
from fracvqa.solver.statevector import AnsatzSpec, prepare

logger = logging.getLogger(__name__)


class Scheme(str, Enum):
    IMPLICIT = "implicit"
    CRANK_NICOLSON = "crank_nicolson"


class ProblemKind(str, Enum):
    FRACTIONAL = "fractional"
    BURGERS = "burgers"
    SEIR = "seir"


class GradientMethod(str, Enum):
    CENTRAL_DIFFERENCE = "central_difference"
    PARAMETER_SHIFT = "parameter_shift"


@dataclass
class CostContext:
    kind: ProblemKind
    spec: AnsatzSpec
    matrix: SystemMatrix
    weights: CaputoWeights
    history: SolutionHistory
    backend: MeasurementBackend
    k: int
    scheme: Scheme = Scheme.IMPLICIT
    xi: Optional[int] = None
    cohort: str = "u"
    # g_α para o SEIR (histórico não normalizado), 1 nos demais
    history_scale: float = 1.0
    b_adv: float = 0.0
    cn_B: Optional[SystemMatrix] = None
    seir: Optional[SeirProblem] = None
    _stored: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.kind = ProblemKind(self.kind)
        self.scheme = Scheme(self.scheme)
        if self.matrix.n_points != 2 ** self.spec.n_qubits:
            raise UsageError(
                f"matrix of size {self.matrix.n_points} does not match {self.spec.n_qubits} qubits"
            )
        if self.k < 1:
            raise UsageError(f"cost context needs k >= 1, got {self.k}")
        if self.scheme is Scheme.CRANK_NICOLSON and self.cn_B is None:
            raise UsageError("crank-nicolson context needs the B operator")
        if self.kind is ProblemKind.SEIR and self.seir is None:
            raise UsageError("SEIR context needs the SEIR parameters")
        self._coefficients = history_coefficients(self.weights, self.k, self.xi)

    def stored(self, m: int, cohort: Optional[str] = None) -> tuple[np.ndarray, float]:
        """(θ^m, r^m) do histórico; levanta MissingHistoryError se ausente."""
        cohort = cohort or self.cohort
        key = (m, cohort)
        if key not in self._stored:
            rec = self.history.get(m, cohort)
            self._stored[key] = (np.asarray(rec.theta, dtype=float), float(rec.r))
        return self._stored[key]


# {{{ termos do custo

def source_overlap(theta, ctx: CostContext) -> float:
    """⟨u^k, f̃^{k-1}⟩ = w_k r⁰⟨u^k,u⁰⟩ − Σ Δw_j r^{k-j}⟨u^k,u^{k-j}⟩ (com truncamento)."""
    total = 0.0
    for m, coef in ctx._coefficients.terms:
        theta_m, r_m = ctx.stored(m)
        total += coef * r_m * ctx.backend.overlap(ctx.spec, theta, theta_m)
    return ctx.history_scale * total


def numerator(theta, ctx: CostContext) -> float:
    """Parte linear F(θ) do custo."""
    value = source_overlap(theta, ctx)
    spec, backend, k = ctx.spec, ctx.backend, ctx.k

    if ctx.kind is ProblemKind.BURGERS and ctx.b_adv != 0.0:
        theta_p, r_p = ctx.stored(k - 1)
        plus = backend.nonlinear_overlap(spec, theta, theta_p, r_p, ShiftSign.PLUS)
        minus = backend.nonlinear_overlap(spec, theta, theta_p, r_p, ShiftSign.MINUS)
        value -= ctx.b_adv * (plus - minus)

    if ctx.scheme is Scheme.CRANK_NICOLSON:
        theta_p, r_p = ctx.stored(k - 1)
        value += r_p * backend.matrix_overlap(spec, theta, theta_p, ctx.cn_B)

    if ctx.kind is ProblemKind.SEIR:
        p = ctx.seir
        if ctx.cohort == "S":
            if p.Pi != 0.0:
                value += p.Pi * backend.uniform_overlap(spec, theta)
        elif ctx.cohort == "E":
            if p.beta != 0.0:
                theta_i, r_i = ctx.stored(k - 1, "I")
                theta_s, r_s = ctx.stored(k - 1, "S")
                value += p.beta * backend.triple_overlap(spec, theta, theta_i, theta_s, scale=r_i * r_s)
        elif ctx.cohort == "I":
            theta_e, r_e = ctx.stored(k - 1, "E")
            value += p.sigma * r_e * backend.overlap(spec, theta, theta_e)
        elif ctx.cohort == "R":
            theta_i, r_i = ctx.stored(k - 1, "I")
            value += p.rho * r_i * backend.overlap(spec, theta, theta_i)
        else:
            raise UsageError(f"unknown SEIR cohort '{ctx.cohort}'")
    return value


def denominator(theta, ctx: CostContext) -> float:
    """Parte quadrática D(θ) = ⟨u|A|u⟩ (+ β⟨S|Λ_I|S⟩ para a coorte S)."""
    value = ctx.backend.expect_hamiltonian(ctx.spec, theta, ctx.matrix)
    if ctx.kind is ProblemKind.SEIR and ctx.cohort == "S" and ctx.seir.beta != 0.0:
        theta_i, r_i = ctx.stored(ctx.k - 1, "I")
        value += ctx.seir.beta * ctx.backend.diagonal_expectation(ctx.spec, theta, theta_i, r_i)
    return value


def _eliminated(F: float, D: float) -> float:
    if not D > 0.0:
        raise SingularOperatorError(f"non-positive quadratic term ⟨u|A|u⟩ = {D}")
    return -0.5 * F * F / D


def cost(theta, ctx: CostContext) -> float:
    return _eliminated(numerator(theta, ctx), denominator(theta, ctx))


def cost_with_norm(r: float, theta, ctx: CostContext) -> float:
    """Forma com a norma explícita: ½r²D − rF."""
    return 0.5 * r * r * denominator(theta, ctx) - r * numerator(theta, ctx)


def optimal_norm(theta, ctx: CostContext) -> float:
    """r = F/D (com sinal)."""
    D = denominator(theta, ctx)
    if not D > 0.0:
        raise SingularOperatorError(f"non-positive quadratic term ⟨u|A|u⟩ = {D}")
    return numerator(theta, ctx) / D


def _require(ctx: CostContext, kind: ProblemKind, scheme: Scheme | None = None) -> None:
    if ctx.kind is not kind:
        raise UsageError(f"cost for {kind.value} problems called with a {ctx.kind.value} context")
    if scheme is not None and ctx.scheme is not scheme:
        raise UsageError(f"cost requires scheme {scheme.value}, context has {ctx.scheme.value}")


def cost_fractional(theta, ctx: CostContext) -> float:
    _require(ctx, ProblemKind.FRACTIONAL, Scheme.IMPLICIT)
    return cost(theta, ctx)


def cost_burgers(theta, ctx: CostContext) -> float:
    _require(ctx, ProblemKind.BURGERS)
    return cost(theta, ctx)


def cost_seir(cohort: str, theta, ctx: CostContext) -> float:
    _require(ctx, ProblemKind.SEIR)
    if cohort != ctx.cohort:
        raise UsageError(f"context was built for cohort '{ctx.cohort}', not '{cohort}'")
    return cost(theta, ctx)


def cost_crank_nicolson(theta, ctx: CostContext) -> float:
    _require(ctx, ProblemKind.FRACTIONAL, Scheme.CRANK_NICOLSON)
    return cost(theta, ctx)

# }}}


# {{{ gradientes

def central_difference(fn: Callable[[np.ndarray], float], theta, step: float = 1e-6) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = step
        grad[i] = (fn(theta + e) - fn(theta - e)) / (2.0 * step)
    return grad


def parameter_shift_gradient(theta, ctx: CostContext) -> np.ndarray:
    """∂C a partir de F e D.

    F é linear no estado: ∂F/∂θ_i = ½ F(θ + π e_i).
    D é quadrático: ∂D/∂θ_i = ½ [D(θ + π/2 e_i) − D(θ − π/2 e_i)].
    """
    theta = np.asarray(theta, dtype=float)
    F = numerator(theta, ctx)
    D = denominator(theta, ctx)
    if not D > 0.0:
        raise SingularOperatorError(f"non-positive quadratic term ⟨u|A|u⟩ = {D}")
    grad = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = 1.0
        dF = 0.5 * numerator(theta + math.pi * e, ctx)
        dD = 0.5 * (denominator(theta + 0.5 * math.pi * e, ctx) - denominator(theta - 0.5 * math.pi * e, ctx))
        grad[i] = -F * dF / D + 0.5 * F * F * dD / (D * D)
    return grad


def gradient(theta, ctx: CostContext, method: GradientMethod | str = GradientMethod.PARAMETER_SHIFT, step: float = 1e-6) -> np.ndarray:
    if GradientMethod(method) is GradientMethod.PARAMETER_SHIFT:
        return parameter_shift_gradient(theta, ctx)
    return central_difference(lambda t: cost(t, ctx), theta, step)

# }}}


# {{{ otimizadores

class CountingCost:
    """Envolve o custo, conta cada invocação e guarda o melhor ponto avaliado."""

    def __init__(self, fn: Callable[[np.ndarray], float]):
        self.fn = fn
        self.calls = 0
        self.extra = 0
        self.best_value = math.inf
        self.best_theta: np.ndarray | None = None

    def __call__(self, theta) -> float:
        self.calls += 1
        theta = np.asarray(theta, dtype=float)
        value = float(self.fn(theta))
        if not math.isfinite(value):
            raise OptimizationError(f"cost returned a non-finite value ({value})")
        if value < self.best_value:
            self.best_value = value
            self.best_theta = theta.copy()
        return value

    @property
    def n_eval(self) -> int:
        return self.calls + self.extra


@dataclass
class OptimizeStats:
    n_eval: int
    n_iter: int
    cost: float
    converged: bool
    message: str = ""


def _spsa(counted: CountingCost, theta0: np.ndarray, config: OptimizerConfig) -> tuple[np.ndarray, OptimizeStats]:
    rng = np.random.default_rng(config.seed)
    a, A = config.spsa_gains()
    theta = theta0.copy()
    for it in range(config.spsa_iterations):
        ak = a / (it + 1.0 + A) ** config.spsa_alpha
        ck = config.spsa_c / (it + 1.0) ** config.spsa_gamma
        delta = rng.choice([-1.0, 1.0], size=theta.size)
        y_plus = counted(theta + ck * delta)
        y_minus = counted(theta - ck * delta)
        ghat = (y_plus - y_minus) / (2.0 * ck) / delta
        theta = theta - ak * ghat
    final = counted(theta)
    # orçamento fixo: devolve o melhor ponto avaliado, não o último iterado
    if counted.best_value < final:
        logger.debug("[STEP] SPSA last iterate %.6e, best evaluated %.6e", final, counted.best_value)
    return counted.best_theta, OptimizeStats(
        n_eval=counted.n_eval,
        n_iter=config.spsa_iterations,
        cost=counted.best_value,
        converged=False,
        message=f"budget exhausted after {config.spsa_iterations} iterations; best of {counted.calls} evaluations",
    )


def minimize(
    cost_fn: Callable[[np.ndarray], float],
    theta_init,
    config: OptimizerConfig,
    jac: Callable[[np.ndarray], np.ndarray] | None = None,
    jac_evaluations: int = 0,
) -> tuple[np.ndarray, OptimizeStats]:
    """L-BFGS-B (quase-Newton) ou SPSA.

    Sem ``jac`` o gradiente é diferença central sobre o custo contado. Com
    ``jac`` cada chamada soma ``jac_evaluations`` ao contador de avaliações.
    """
    theta0 = np.asarray(theta_init, dtype=float).ravel().copy()
    counted = CountingCost(cost_fn)
    if config.method == "spsa":
        return _spsa(counted, theta0, config)

    if jac is None:
        def grad_fn(t):
            return central_difference(counted, t, config.fd_step)
    else:
        def grad_fn(t):
            counted.extra += jac_evaluations
            return np.asarray(jac(t), dtype=float)

    res = scipy_minimize(
        counted,
        theta0,
        jac=grad_fn,
        method="L-BFGS-B",
        options={"maxiter": config.max_iterations, "ftol": config.rel_tol, "gtol": config.grad_tol},
    )
    converged = bool(res.success)
    if not converged:
        logger.warning("[STEP] optimizer stopped without convergence: %s", res.message)
    return np.asarray(res.x, dtype=float), OptimizeStats(
        n_eval=counted.n_eval,
        n_iter=int(res.nit),
        cost=float(res.fun),
        converged=converged,
        message=str(res.message),
    )

# }}}


# {{{ codificação inicial

@dataclass
class EncodingResult:
    theta: np.ndarray
    r: float
    residual: float
    n_eval: int
    n_iter: int


def encode_initial(
    target,
    spec: AnsatzSpec,
    optimizer: OptimizerConfig | None = None,
    threshold: float = 1e-3,
    restarts: int = 0,
    seed: int | None = None,
) -> EncodingResult:
    """Ajusta U(θ)|0> ao vetor normalizado partindo de θ = 0.

    O sinal da sobreposição vai para r⁰, de modo que r⁰·u(θ) ≈ target.
    """
    target = np.asarray(target, dtype=float).ravel()
    if target.size != 2 ** spec.n_qubits:
        raise UsageError(f"target of length {target.size} does not match {spec.n_qubits} qubits")
    norm = float(np.linalg.norm(target))
    if norm == 0.0:
        raise UsageError("cannot encode a zero vector")
    t_hat = target / norm
    optimizer = optimizer or OptimizerConfig()

    def overlap(theta) -> float:
        return float(np.dot(t_hat, prepare(spec, theta)))

    def objective(theta) -> float:
        return -overlap(theta) ** 2

    def jac(theta) -> np.ndarray:
        ov = overlap(theta)
        grad = np.empty(theta.size)
        for i in range(theta.size):
            shifted = np.array(theta, dtype=float)
            shifted[i] += math.pi
            grad[i] = -ov * overlap(shifted)
        return grad

    fit_config = optimizer.model_copy(
        update={
            "method": "quasi_newton",
            "max_iterations": max(optimizer.max_iterations, 5000),
            "rel_tol": 1e-15,
            "grad_tol": 1e-12,
        }
    )
    rng = np.random.default_rng(seed)
    starts = [np.zeros(spec.n_params)] + [rng.uniform(-math.pi, math.pi, spec.n_params) for _ in range(restarts)]

    best: EncodingResult | None = None
    n_eval = n_iter = 0
    for start in starts:
        theta, stats = minimize(objective, start, fit_config, jac=jac, jac_evaluations=spec.n_params + 1)
        n_eval += stats.n_eval
        n_iter += stats.n_iter
        ov = overlap(theta)
        residual = math.sqrt(max(0.0, 1.0 - min(1.0, ov * ov)))
        if best is None or residual < best.residual:
            best = EncodingResult(theta=theta, r=math.copysign(norm, ov), residual=residual, n_eval=0, n_iter=0)
        if residual <= threshold:
            break

    best.n_eval, best.n_iter = n_eval, n_iter
    if best.residual > threshold:
        logger.warning(
            "[ENCODE] residual %.3e above threshold %.1e (n=%d, l=%d); consider more layers",
            best.residual, threshold, spec.n_qubits, spec.layers,
        )
    else:
        logger.info("[ENCODE] residual %.3e, r0 = %.6g", best.residual, best.r)
    return best

# }}}


# {{{ marcha no tempo

def build_context(
    problem,
    spec: AnsatzSpec,
    history: SolutionHistory,
    backend: MeasurementBackend,
    k: int,
    scheme: Scheme | str = Scheme.IMPLICIT,
    xi: Optional[int] = None,
    cohort: str = "u",
) -> CostContext:
    scheme = Scheme(scheme)
    if isinstance(problem, SeirProblem):
        if scheme is not Scheme.IMPLICIT:
            raise UsageError("SEIR problems only support the implicit scheme")
        w = problem.weights(cohort)
        return CostContext(
            kind=ProblemKind.SEIR, spec=spec, matrix=problem.system_matrix(cohort), weights=w,
            history=history, backend=backend, k=k, xi=xi, cohort=cohort,
            history_scale=w.g, seir=problem,
        )
    if isinstance(problem, BurgersProblem):
        if scheme is not Scheme.IMPLICIT:
            raise UsageError("Burgers problems only support the implicit scheme")
        return CostContext(
            kind=ProblemKind.BURGERS, spec=spec, matrix=problem.system_matrix(),
            weights=problem.weights(), history=history, backend=backend, k=k, xi=xi,
            b_adv=problem.b_adv,
        )
    if isinstance(problem, SubdiffusionProblem):
        if scheme is Scheme.CRANK_NICOLSON:
            pair = build_crank_nicolson(problem.N, problem.a, problem.boundary)
            return CostContext(
                kind=ProblemKind.FRACTIONAL, spec=spec, matrix=pair.A, weights=problem.weights(),
                history=history, backend=backend, k=k, scheme=scheme, xi=xi, cn_B=pair.B,
            )
        return CostContext(
            kind=ProblemKind.FRACTIONAL, spec=spec, matrix=problem.system_matrix(),
            weights=problem.weights(), history=history, backend=backend, k=k, xi=xi,
        )
    raise UsageError(f"unsupported problem type {type(problem).__name__}")


def _optimize_step(ctx: CostContext, theta_init, optimizer: OptimizerConfig) -> tuple[np.ndarray, OptimizeStats, float]:
    jac = None
    jac_evaluations = 0
    if optimizer.method == "quasi_newton" and optimizer.gradient_method == GradientMethod.PARAMETER_SHIFT.value:
        jac = lambda t: parameter_shift_gradient(t, ctx)  # noqa: E731
        jac_evaluations = 3 * ctx.spec.n_params + 1
    theta, stats = minimize(lambda t: cost(t, ctx), theta_init, optimizer, jac=jac, jac_evaluations=jac_evaluations)
    return theta, stats, optimal_norm(theta, ctx)


def step_optimizer(optimizer: OptimizerConfig, k: int, index: int = 0) -> OptimizerConfig:
    """Cópia com semente própria do passo (k, coorte), filha da semente do otimizador."""
    if optimizer.seed is None:
        return optimizer
    child = np.random.SeedSequence(optimizer.seed, spawn_key=(k, index))
    return optimizer.model_copy(update={"seed": int(child.generate_state(1)[0])})


def _initial_theta(history: SolutionHistory, k: int, cohort: str, spec: AnsatzSpec, optimizer: OptimizerConfig):
    if optimizer.warm_start:
        return history.theta(k - 1, cohort)
    return np.zeros(spec.n_params)


def time_march(
    problem,
    spec: AnsatzSpec,
    optimizer: OptimizerConfig,
    backend: MeasurementBackend,
    scheme: Scheme | str = Scheme.IMPLICIT,
    xi: Optional[int] = None,
    encode_threshold: float = 1e-3,
    encode_restarts: int = 0,
    classical=None,
    norm_reset: bool = False,
    callback: Callable[[HistoryRecord], None] | None = None,
) -> SolutionHistory:
    """Codifica u⁰ e avança k = 1..M guardando (θ^k, r^k) a cada passo.

    SEIR: as quatro coortes avançam em ordem S, E, I, R com acoplamentos em k-1.
    ``norm_reset`` troca r^k pela norma do oráculo ``classical`` após cada passo.
    Falhas viram ``OptimizationError`` com o histórico parcial.
    """
    scheme = Scheme(scheme)
    if problem.N != 2 ** spec.n_qubits:
        raise UsageError(f"N = {problem.N} does not match 2^{spec.n_qubits}")
    if norm_reset and classical is None:
        raise UsageError("norm reset needs the classical reference field")

    cohorts = SEIR_COHORTS if isinstance(problem, SeirProblem) else ("u",)
    history = SolutionHistory()
    k = 0
    try:
        for c in cohorts:
            u0 = problem.initial_values(c) if isinstance(problem, SeirProblem) else problem.initial_values()
            enc = encode_initial(u0, spec, optimizer, encode_threshold, encode_restarts, optimizer.seed)
            rec = HistoryRecord(
                k=0, cohort=c, theta=enc.theta, r=enc.r, n_eval=enc.n_eval, n_iter=enc.n_iter,
                cost=0.0, residual=enc.residual, converged=enc.residual <= encode_threshold,
            )
            history.append(rec)
            if callback is not None:
                callback(rec)

        for k in range(1, problem.M + 1):
            for index, c in enumerate(cohorts):
                ctx = build_context(problem, spec, history, backend, k, scheme, xi, c)
                theta0 = _initial_theta(history, k, c, spec, optimizer)
                theta, stats, r = _optimize_step(ctx, theta0, step_optimizer(optimizer, k, index))
                rec = HistoryRecord(
                    k=k, cohort=c, theta=theta, r=r, n_eval=stats.n_eval, n_iter=stats.n_iter,
                    cost=stats.cost, converged=stats.converged,
                )
                history.append(rec)
                if norm_reset:
                    field_c = classical[c] if isinstance(classical, dict) else classical
                    history = norm_reset_policy(history, field_c.values, cohort=c, k=k)
                    rec = history.get(k, c)
                logger.info(
                    "[STEP] k=%d%s cost=%.6e r=%.6g n_eval=%d n_iter=%d",
                    k, "" if c == "u" else f" cohort={c}", stats.cost, rec.r, stats.n_eval, stats.n_iter,
                )
                if callback is not None:
                    callback(rec)
    except OptimizationError as exc:
        exc.history = history
        exc.step = k
        raise
    except FracVQAError as exc:
        raise OptimizationError(f"step {k}: {exc.detail}", history=history, step=k) from exc
    return history

# }}}


def reconstruct_field(history: SolutionHistory, spec: AnsatzSpec, cohort: str = "u") -> np.ndarray:
    """Grade N×(K+1) com colunas r^k·u(θ^k)."""
    columns = [rec.r * prepare(spec, rec.theta) for rec in history.cohort_records(cohort)]
    if not columns:
        raise UsageError(f"history has no records for cohort '{cohort}'")
    return np.column_stack(columns)
