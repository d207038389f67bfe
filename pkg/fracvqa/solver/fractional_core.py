"""Partes determinísticas dos esquemas de diferenças finitas.

Pesos de Caputo (L1), matrizes do sistema para cada condição de contorno,
o par de Crank-Nicolson e os coeficientes de histórico (com truncamento).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.special import gamma

from fracvqa.core.errors import UsageError


class Boundary(str, Enum):
    PERIODIC = "periodic"
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(frozen=True)
class CaputoWeights:
    alpha: float
    tau: float
    M: int
    g: float
    w: np.ndarray   # w[j-1] = w_j, j = 1..M
    dw: np.ndarray  # dw[j-1] = Δw_j, j = 1..M-1

    def weight(self, j: int) -> float:
        """w_j para qualquer j >= 1 (fora da tabela usa a forma fechada)."""
        if j < 1:
            raise UsageError(f"weight index must be >= 1, got {j}")
        if j <= self.M:
            return float(self.w[j - 1])
        return _kernel(j, self.alpha)

    def delta(self, j: int) -> float:
        """Δw_j = w_{j+1} - w_j."""
        if 1 <= j < self.M:
            return float(self.dw[j - 1])
        return self.weight(j + 1) - self.weight(j)


def _kernel(j: int, alpha: float) -> float:
    if j == 1:
        return 1.0
    return float(j ** (1.0 - alpha) - (j - 1) ** (1.0 - alpha))


@lru_cache(maxsize=64)
def _cached_weights(alpha: float, tau: float, M: int) -> CaputoWeights:
    j = np.arange(1, M + 1, dtype=float)
    w = j ** (1.0 - alpha) - (j - 1.0) ** (1.0 - alpha)
    # w_1 = 1 por definição (evita 0**0 em alpha = 1)
    w[0] = 1.0
    dw = np.diff(w)
    w.setflags(write=False)
    dw.setflags(write=False)
    g = tau ** (-alpha) / gamma(2.0 - alpha)
    return CaputoWeights(alpha=alpha, tau=tau, M=M, g=float(g), w=w, dw=dw)


def compute_weights(alpha: float, tau: float, M: int) -> CaputoWeights:
    if not (0.0 < alpha <= 1.0):
        raise UsageError(f"alpha must lie in (0, 1], got {alpha}")
    if tau <= 0.0:
        raise UsageError(f"tau must be positive, got {tau}")
    if M < 1:
        raise UsageError(f"M must be >= 1, got {M}")
    return _cached_weights(float(alpha), float(tau), int(M))


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SystemMatrix:
    """Operador tridiagonal simétrico com cantos definidos pela condição de contorno.

    ``b = shift + 2a`` na diagonal, ``-a`` nas adjacentes. Com ``shift = 1`` é a
    matriz do esquema implícito; ``shift`` genérico cobre as matrizes do SEIR e
    o par de Crank-Nicolson (onde ``a`` pode ser negativo).
    """

    n_points: int
    boundary: Boundary
    a: float
    shift: float = 1.0

    @property
    def n_qubits(self) -> int:
        return int(self.n_points).bit_length() - 1

    @property
    def b(self) -> float:
        return self.shift + 2.0 * self.a

    @property
    def c(self) -> float:
        if self.boundary is Boundary.NEUMANN:
            return self.b - self.a
        return self.b

    @property
    def d(self) -> float:
        if self.boundary is Boundary.PERIODIC:
            return -self.a
        return 0.0

    def dense(self) -> np.ndarray:
        N = self.n_points
        A = np.diag(np.full(N, self.b))
        off = np.full(N - 1, -self.a)
        A += np.diag(off, 1) + np.diag(off, -1)
        A[0, 0] = A[-1, -1] = self.c
        # soma (não substitui) para que N = 2 periódico acumule os dois vizinhos
        A[0, -1] += self.d
        A[-1, 0] += self.d
        return A

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = self.b * x
        y[:-1] -= self.a * x[1:]
        y[1:] -= self.a * x[:-1]
        y[0] += (self.c - self.b) * x[0]
        y[-1] += (self.c - self.b) * x[-1]
        y[0] += self.d * x[-1]
        y[-1] += self.d * x[0]
        return y


def _check_points(N: int) -> None:
    if N < 2:
        raise UsageError(f"N must be >= 2, got {N}")
    if not is_power_of_two(N):
        raise UsageError(f"N must be a power of 2 for qubit encoding, got {N}")


def build_system_matrix(N: int, a: float, boundary: Boundary | str, shift: float = 1.0) -> SystemMatrix:
    _check_points(N)
    if a < 0:
        raise UsageError(f"a must be non-negative, got {a}")
    return SystemMatrix(n_points=N, boundary=Boundary(boundary), a=float(a), shift=float(shift))


@dataclass(frozen=True)
class CrankNicolsonPair:
    A: SystemMatrix
    B: SystemMatrix
    boundary: Boundary


def build_crank_nicolson(N: int, a: float, boundary: Boundary | str) -> CrankNicolsonPair:
    _check_points(N)
    if a < 0:
        raise UsageError(f"a must be non-negative, got {a}")
    bc = Boundary(boundary)
    # B = (a/2)L  <=>  SystemMatrix(a = -a/2, shift = 0); A = I - B
    B = SystemMatrix(n_points=N, boundary=bc, a=-0.5 * a, shift=0.0)
    A = SystemMatrix(n_points=N, boundary=bc, a=0.5 * a, shift=1.0)
    return CrankNicolsonPair(A=A, B=B, boundary=bc)


@dataclass(frozen=True)
class HistoryCoefficients:
    k: int
    terms: tuple[tuple[int, float], ...]  # (índice do estado u^m, coeficiente)
    xi: int | None = None

    def combine(self, states) -> np.ndarray:
        """Σ coef · states[m] para uma sequência indexável de vetores."""
        out = None
        for m, coef in self.terms:
            v = coef * np.asarray(states[m], dtype=float)
            out = v if out is None else out + v
        return out


def history_coefficients(weights: CaputoWeights, k: int, xi: int | None = None) -> HistoryCoefficients:
    """Coeficientes do lado direito de ``A u^k = w_k u^0 - Σ Δw_j u^{k-j}``.

    Com truncamento ``xi < k`` apenas os termos j <= xi permanecem (convenção
    w_{k+1} = 0 para o termo j = k). Termos com coeficiente exatamente zero são
    omitidos, de modo que alpha = 1 degenera para um único termo (Euler implícito).
    """
    if not (1 <= k <= weights.M):
        raise UsageError(f"k must lie in [1, {weights.M}], got {k}")
    if xi is not None and not (1 <= xi <= weights.M):
        raise UsageError(f"xi must lie in [1, {weights.M}], got {xi}")

    limit = k if xi is None else min(k, xi)
    terms: list[tuple[int, float]] = []
    for j in range(1, limit + 1):
        if j == k:
            coef = weights.weight(k)  # -Δw_k com w_{k+1} = 0
        else:
            coef = -weights.delta(j)
        if coef != 0.0:
            terms.append((k - j, coef))
    return HistoryCoefficients(k=k, terms=tuple(terms), xi=xi)


def truncation_error_estimate(weights: CaputoWeights, xi: int, norm_history) -> float:
    """Estimativa g·|Δw_{ξ+1}|·r^{k-(ξ+1)} do erro de truncamento no passo k.

    ``norm_history`` contém r^0..r^{k-1}; k = len(norm_history).
    """
    norms = list(norm_history)
    k = len(norms)
    if xi >= k:
        return 0.0
    if xi < 1:
        raise UsageError(f"xi must be >= 1, got {xi}")
    return weights.g * abs(weights.delta(xi + 1)) * abs(float(norms[k - (xi + 1)]))
