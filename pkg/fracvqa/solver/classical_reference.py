"""Oráculo clássico de diferenças finitas para todas as famílias de problemas,
mais as métricas de comparação (erro de traço, fidelidade da norma, desvio).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from fracvqa.core.errors import SingularOperatorError, UsageError
from fracvqa.solver.fractional_core import (
    Boundary,
    CaputoWeights,
    SystemMatrix,
    build_crank_nicolson,
    history_coefficients,
)
from fracvqa.solver.models import (
    SEIR_COHORTS,
    BurgersProblem,
    SeirProblem,
    SubdiffusionProblem,
)

logger = logging.getLogger(__name__)


@dataclass
class Field:
    """Grade N×(M+1); a coluna k é u(t_k, ·)."""

    values: np.ndarray
    h: float
    tau: float
    L: float
    T: float
    name: str = "u"

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def M(self) -> int:
        return self.values.shape[1] - 1

    def column(self, k: int) -> np.ndarray:
        return self.values[:, k]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=0)

    def x(self) -> np.ndarray:
        return self.h * np.arange(1, self.N + 1, dtype=float)

    def t(self) -> np.ndarray:
        return self.tau * np.arange(self.M + 1, dtype=float)


# {{{ sistema linear

def _tridiagonal_parts(A: SystemMatrix, extra_diagonal=None) -> tuple[np.ndarray, np.ndarray]:
    N = A.n_points
    diag = np.full(N, A.b, dtype=float)
    diag[0] = diag[-1] = A.c
    if extra_diagonal is not None:
        diag = diag + np.asarray(extra_diagonal, dtype=float)
    off = np.full(N - 1, -A.a, dtype=float)
    return diag, off


def _solve_tridiagonal(diag: np.ndarray, off: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    N = diag.size
    ab = np.zeros((3, N))
    ab[0, 1:] = off
    ab[1, :] = diag
    ab[2, :-1] = off
    try:
        x = solve_banded((1, 1), ab, rhs)
    except (LinAlgError, ValueError) as exc:
        raise SingularOperatorError(f"tridiagonal system is singular: {exc}")
    if not np.all(np.isfinite(x)):
        raise SingularOperatorError("tridiagonal system is singular")
    return x


def solve_linear_system(A, rhs, extra_diagonal=None) -> np.ndarray:
    """Resolve ``A x = rhs``.

    Dirichlet/Neumann: eliminação tridiagonal (banda). Periódico: solução
    tridiagonal com correção de posto 1 (Sherman-Morrison) para os cantos.
    Matrizes densas caem em ``numpy.linalg.solve``.
    """
    rhs = np.asarray(rhs, dtype=float)
    if not isinstance(A, SystemMatrix):
        try:
            return np.linalg.solve(np.asarray(A, dtype=float), rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularOperatorError(f"matrix is singular: {exc}")

    if rhs.shape != (A.n_points,):
        raise UsageError(f"rhs has shape {rhs.shape}, expected ({A.n_points},)")
    diag, off = _tridiagonal_parts(A, extra_diagonal)
    d = A.d
    if d == 0.0:
        return _solve_tridiagonal(diag, off, rhs)

    if A.n_points == 2:
        dense = np.diag(diag)
        dense[0, 1] = dense[1, 0] = off[0] + d
        return solve_linear_system(dense, rhs)

    gamma = -diag[0] if diag[0] != 0.0 else 1.0
    corrected = diag.copy()
    corrected[0] -= gamma
    corrected[-1] -= d * d / gamma
    u = np.zeros_like(rhs)
    u[0], u[-1] = gamma, d
    y = _solve_tridiagonal(corrected, off, rhs)
    z = _solve_tridiagonal(corrected, off, u)
    # v = (1, 0, ..., d/gamma)
    vy = y[0] + d / gamma * y[-1]
    vz = z[0] + d / gamma * z[-1]
    if abs(1.0 + vz) < 1e-14:
        raise SingularOperatorError("periodic system is singular")
    return y - (vy / (1.0 + vz)) * z

# }}}


def march_fractional(
    A: SystemMatrix,
    weights: CaputoWeights,
    u0: np.ndarray,
    M: int,
    xi: int | None = None,
    source: Callable[[int, list[np.ndarray]], np.ndarray] | None = None,
    history_scale: float = 1.0,
    extra_diagonal: Callable[[int, list[np.ndarray]], np.ndarray] | None = None,
) -> list[np.ndarray]:
    """A u^k = history_scale·(w_k u^0 − Σ Δw_j u^{k-j}) + source(k)."""
    states = [np.asarray(u0, dtype=float).copy()]
    for k in range(1, M + 1):
        rhs = history_scale * history_coefficients(weights, k, xi).combine(states)
        if source is not None:
            rhs = rhs + source(k, states)
        diag = extra_diagonal(k, states) if extra_diagonal is not None else None
        states.append(solve_linear_system(A, rhs, extra_diagonal=diag))
    return states


def _as_field(states: list[np.ndarray], problem, name: str = "u") -> Field:
    return Field(
        values=np.column_stack(states),
        h=problem.h,
        tau=problem.tau,
        L=problem.L,
        T=problem.T,
        name=name,
    )


def classical_subdiffusion(problem: SubdiffusionProblem, xi: int | None = None, u0=None) -> Field:
    u0 = problem.initial_values() if u0 is None else np.asarray(u0, dtype=float)
    states = march_fractional(problem.system_matrix(), problem.weights(), u0, problem.M, xi)
    return _as_field(states, problem)


def neighbors_with_ghosts(u: np.ndarray, boundary: Boundary) -> tuple[np.ndarray, np.ndarray]:
    """(u_{n+1}, u_{n-1}) com fantasmas: zero (Dirichlet), espelho (Neumann), ciclo (periódico)."""
    boundary = Boundary(boundary)
    if boundary is Boundary.PERIODIC:
        return np.roll(u, -1), np.roll(u, 1)
    mode = "constant" if boundary is Boundary.DIRICHLET else "edge"
    padded = np.pad(u, 1, mode=mode)
    return padded[2:], padded[:-2]


def advection_source(u_prev: np.ndarray, b_adv: float, boundary: Boundary) -> np.ndarray:
    """−b (u_{n+1} − u_{n-1}) u_n, avaliado no passo anterior."""
    plus, minus = neighbors_with_ghosts(u_prev, boundary)
    return -b_adv * (plus - minus) * u_prev


def classical_burgers(problem: BurgersProblem, xi: int | None = None, u0=None) -> Field:
    u0 = problem.initial_values() if u0 is None else np.asarray(u0, dtype=float)
    b_adv = problem.b_adv

    def source(k: int, states: list[np.ndarray]) -> np.ndarray:
        return advection_source(states[k - 1], b_adv, problem.boundary)

    states = march_fractional(problem.system_matrix(), problem.weights(), u0, problem.M, xi, source=source)
    return _as_field(states, problem)


def classical_crank_nicolson(problem: SubdiffusionProblem, xi: int | None = None, u0=None) -> Field:
    """A u^k = B u^{k-1} + histórico, com A = I − B e B = (a/2)ℒ."""
    u0 = problem.initial_values() if u0 is None else np.asarray(u0, dtype=float)
    pair = build_crank_nicolson(problem.N, problem.a, problem.boundary)

    def source(k: int, states: list[np.ndarray]) -> np.ndarray:
        return pair.B.matvec(states[k - 1])

    states = march_fractional(pair.A, problem.weights(), u0, problem.M, xi, source=source)
    return _as_field(states, problem)


def classical_seir(problem: SeirProblem, xi: int | None = None) -> dict[str, Field]:
    """Marcha semi-implícita das quatro coortes, na ordem S, E, I, R.

    Acoplamentos usam valores do passo k-1; βI^{k-1} entra na diagonal de S.
    """
    states = {c: [problem.initial_values(c)] for c in SEIR_COHORTS}
    matrices = {c: problem.system_matrix(c) for c in SEIR_COHORTS}
    weights = {c: problem.weights(c) for c in SEIR_COHORTS}

    for k in range(1, problem.M + 1):
        prev = {c: states[c][k - 1] for c in SEIR_COHORTS}
        sources = {
            "S": np.full(problem.N, problem.Pi),
            "E": problem.beta * prev["I"] * prev["S"],
            "I": problem.sigma * prev["E"],
            "R": problem.rho * prev["I"],
        }
        for c in SEIR_COHORTS:
            w = weights[c]
            rhs = w.g * history_coefficients(w, k, xi).combine(states[c]) + sources[c]
            extra = problem.beta * prev["I"] if c == "S" else None
            states[c].append(solve_linear_system(matrices[c], rhs, extra_diagonal=extra))
        logger.debug("[STEP] seir k=%d total I=%.6g", k, float(states["I"][-1].sum()))

    return {c: _as_field(states[c], problem, name=c) for c in SEIR_COHORTS}


# {{{ métricas

def trace_error(state, classical_column) -> float:
    """√(1 − |⟨û|u⟩|²) com ambos normalizados."""
    col = np.asarray(classical_column, dtype=float)
    norm_c = np.linalg.norm(col)
    if norm_c == 0.0:
        raise UsageError("classical column has zero norm")
    u = np.asarray(state, dtype=float)
    norm_u = np.linalg.norm(u)
    if norm_u == 0.0:
        raise UsageError("quantum state has zero norm")
    ov = abs(float(np.dot(col / norm_c, u / norm_u)))
    return float(np.sqrt(max(0.0, 1.0 - min(1.0, ov) ** 2)))


def norm_fidelity(r_measured: float, classical_norm: float) -> float:
    if classical_norm <= 0.0:
        raise UsageError("classical norm must be positive")
    return abs(r_measured / classical_norm)


def relative_deviation(field_q, field_c) -> np.ndarray:
    """|u_q − u_c| / max|u_c| elemento a elemento."""
    q = np.asarray(getattr(field_q, "values", field_q), dtype=float)
    c = np.asarray(getattr(field_c, "values", field_c), dtype=float)
    if q.shape != c.shape:
        raise UsageError(f"field shapes differ: {q.shape} vs {c.shape}")
    scale = np.max(np.abs(c))
    if scale == 0.0:
        raise UsageError("classical field is identically zero")
    return np.abs(q - c) / scale


def norm_convergence(coarse: Field, fine: Field, t: float) -> float:
    """Variação relativa ‖u_M(t) − u_2M(t)‖ / ‖u_2M(t)‖ entre duas resoluções temporais."""
    kc = int(round(t / coarse.tau))
    kf = int(round(t / fine.tau))
    if not np.isclose(kc * coarse.tau, t) or not np.isclose(kf * fine.tau, t):
        raise UsageError(f"t = {t} is not a grid time of both fields")
    ref = fine.column(kf)
    denom = np.linalg.norm(ref)
    if denom == 0.0:
        raise UsageError("reference column has zero norm")
    return float(np.linalg.norm(coarse.column(kc) - ref) / denom)


def max_gradient(u: np.ndarray, h: float, boundary: Boundary = Boundary.DIRICHLET) -> float:
    plus, minus = neighbors_with_ghosts(u, boundary)
    return float(np.max(np.abs(plus - minus)) / (2.0 * h))

# }}}


def classical_for(problem, scheme: str = "implicit", xi: Optional[int] = None):
    """Oráculo correspondente ao problema (campo único ou dicionário por coorte)."""
    if isinstance(problem, SeirProblem):
        return classical_seir(problem, xi)
    if isinstance(problem, BurgersProblem):
        return classical_burgers(problem, xi)
    if scheme == "crank_nicolson":
        return classical_crank_nicolson(problem, xi)
    return classical_subdiffusion(problem, xi)
