"""Definições dos problemas: condições iniciais/contorno, parâmetros físicos
e constantes do esquema para as três famílias (sub-difusão, Burgers, SEIR).
"""
from __future__ import annotations

from typing import Callable, Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from fracvqa.core.errors import UsageError
from fracvqa.solver.fractional_core import (
    Boundary,
    CaputoWeights,
    SystemMatrix,
    build_system_matrix,
    compute_weights,
    is_power_of_two,
)

SEIR_COHORTS: tuple[str, ...] = ("S", "E", "I", "R")

Profile = Literal["parabola", "sine", "constant"]


def profile_function(profile: str, L: float = 1.0, value: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    if profile == "parabola":
        return lambda x: x * (L - x)
    if profile == "sine":
        return lambda x: np.sin(2.0 * np.pi * x / L)
    if profile == "constant":
        return lambda x: np.full_like(x, value, dtype=float)
    raise UsageError(f"unknown initial profile '{profile}'")


def grid_points(N: int, L: float) -> np.ndarray:
    """Nós x_i = i·h, i = 1..N (h = L/N)."""
    h = L / N
    return h * np.arange(1, N + 1, dtype=float)


def sample_initial(profile, N: int, L: float = 1.0) -> np.ndarray:
    """Amostra ``profile`` (nome ou função) nos nós x_i = ih, i = 1..N."""
    if not is_power_of_two(N):
        raise UsageError(f"N must be a power of 2, got {N}")
    fn = profile_function(profile, L) if isinstance(profile, str) else profile
    x = grid_points(N, L)
    values = np.asarray(fn(x), dtype=float)
    if values.shape != x.shape:
        values = np.broadcast_to(values, x.shape).astype(float)
    return values


class _Domain(BaseModel):
    L: float = Field(1.0, gt=0)
    T: float = Field(1.0, gt=0)
    N: int = Field(32, ge=2)
    M: int = Field(32, ge=1)

    model_config = ConfigDict(extra="forbid", frozen=True)

    @field_validator("N")
    @classmethod
    def check_power_of_two(cls, v):
        if not is_power_of_two(v):
            raise ValueError(f"N must be a power of 2, got {v}")
        return v

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def tau(self) -> float:
        return self.T / self.M

    @property
    def n_qubits(self) -> int:
        return int(self.N).bit_length() - 1

    def x(self) -> np.ndarray:
        return grid_points(self.N, self.L)

    def t(self) -> np.ndarray:
        return self.tau * np.arange(self.M + 1, dtype=float)


class SubdiffusionProblem(_Domain):
    kind: Literal["subdiffusion"] = "subdiffusion"
    alpha: float = Field(0.5, gt=0, le=1)
    T: float = Field(0.5, gt=0)
    boundary: Boundary = Boundary.DIRICHLET
    initial: Profile = "parabola"

    def weights(self) -> CaputoWeights:
        return compute_weights(self.alpha, self.tau, self.M)

    @property
    def a(self) -> float:
        """a = 1/(g h²)."""
        return 1.0 / (self.weights().g * self.h ** 2)

    def system_matrix(self) -> SystemMatrix:
        return build_system_matrix(self.N, self.a, self.boundary)

    def initial_values(self) -> np.ndarray:
        return sample_initial(self.initial, self.N, self.L)


class BurgersProblem(_Domain):
    kind: Literal["burgers"] = "burgers"
    alpha: float = Field(1.0, gt=0, le=1)
    nu: float = Field(0.02, gt=0)
    boundary: Boundary = Boundary.DIRICHLET
    initial: Profile = "sine"
    # Velocidade característica, só entra nos metadados (Re, Courant)
    u_c: float = Field(1.0, gt=0)

    def weights(self) -> CaputoWeights:
        return compute_weights(self.alpha, self.tau, self.M)

    @property
    def a(self) -> float:
        return self.nu / (self.weights().g * self.h ** 2)

    @property
    def b_adv(self) -> float:
        return 1.0 / (2.0 * self.weights().g * self.h)

    @property
    def reynolds(self) -> float:
        return 2.0 * self.u_c * self.L / self.nu

    @property
    def courant(self) -> float:
        return self.u_c * self.tau ** self.alpha / self.h

    def system_matrix(self) -> SystemMatrix:
        return build_system_matrix(self.N, self.a, self.boundary)

    def initial_values(self) -> np.ndarray:
        return sample_initial(self.initial, self.N, self.L)


class SeirProblem(_Domain):
    kind: Literal["seir"] = "seir"
    T: float = Field(100.0, gt=0)
    N: int = Field(16, ge=2)
    M: int = Field(32, ge=1)
    alphas: Tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    nus: Tuple[float, float, float, float] = (1e-3, 1e-3, 5e-4, 5e-4)
    Pi: float = Field(750.0, ge=0)
    mu: float = Field(0.03325, ge=0)
    beta: float = Field(5.1e-6, ge=0)
    sigma: float = Field(0.17, ge=0)
    rho: float = Field(0.1109, ge=0)
    boundary: Boundary = Boundary.NEUMANN
    S0: float = Field(22500.0, ge=0)
    I0_amplitude: float = Field(20.0, ge=0)
    I0_decay: float = 2.0
    E0: float = Field(1.0, ge=0)
    R0: float = Field(1.0, ge=0)

    @field_validator("alphas")
    @classmethod
    def check_alphas(cls, v):
        for alpha in v:
            if not (0.0 < alpha <= 1.0):
                raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
        return v

    @field_validator("nus")
    @classmethod
    def check_nus(cls, v):
        if any(nu < 0 for nu in v):
            raise ValueError("diffusion coefficients must be non-negative")
        return v

    def _index(self, cohort: str) -> int:
        try:
            return SEIR_COHORTS.index(cohort)
        except ValueError:
            raise UsageError(f"unknown SEIR cohort '{cohort}'")

    def weights(self, cohort: str) -> CaputoWeights:
        return compute_weights(self.alphas[self._index(cohort)], self.tau, self.M)

    def reaction(self, cohort: str) -> float:
        """Termo de perda linear na diagonal (sem o acoplamento βI)."""
        return {
            "S": self.mu,
            "E": self.sigma + self.mu,
            "I": self.rho + self.mu,
            "R": self.mu,
        }[cohort]

    def system_matrix(self, cohort: str) -> SystemMatrix:
        """A_c = (reação + g_c)·I − ν_c/h² ℒ."""
        i = self._index(cohort)
        shift = self.reaction(cohort) + self.weights(cohort).g
        return build_system_matrix(self.N, self.nus[i] / self.h ** 2, self.boundary, shift=shift)

    def initial_values(self, cohort: str) -> np.ndarray:
        x = self.x()
        values = {
            "S": np.full(self.N, self.S0),
            "E": np.full(self.N, self.E0),
            "I": self.I0_amplitude * np.exp(-self.I0_decay * x),
            "R": np.full(self.N, self.R0),
        }[cohort]
        return values.astype(float)

    def reproduction_number(self) -> float:
        return reproduction_number(self)


ProblemConfig = SubdiffusionProblem | BurgersProblem | SeirProblem


def reproduction_number(params: SeirProblem) -> float:
    """ℛ = βσΠ / (μ(μ+σ)(μ+ρ))."""
    denom = params.mu * (params.mu + params.sigma) * (params.mu + params.rho)
    if denom <= 0.0:
        raise UsageError("reproduction number undefined: mu, mu+sigma and mu+rho must be positive")
    return params.beta * params.sigma * params.Pi / denom


def problem_summary(problem: ProblemConfig) -> dict:
    """Constantes derivadas gravadas no manifesto."""
    out: dict = {"kind": problem.kind, "h": problem.h, "tau": problem.tau}
    if isinstance(problem, SubdiffusionProblem):
        out.update(a=problem.a, g=problem.weights().g)
    elif isinstance(problem, BurgersProblem):
        out.update(
            a=problem.a,
            b_adv=problem.b_adv,
            g=problem.weights().g,
            reynolds=problem.reynolds,
            courant=problem.courant,
        )
    else:
        out.update(reproduction_number=reproduction_number(problem))
    return out

