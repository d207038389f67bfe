from pydantic import BaseModel, Field, ConfigDict
from typing import Literal, Optional


class OptimizerConfig(BaseModel):
    method: Literal["quasi_newton", "spsa"] = "quasi_newton"
    max_iterations: int = Field(1000, ge=1)
    rel_tol: float = Field(1e-6, gt=0)
    grad_tol: float = Field(1e-6, gt=0)
    gradient_method: Literal["central_difference", "parameter_shift"] = "central_difference"
    fd_step: float = Field(1e-6, gt=0)

    # SPSA: ganhos a_k = a / (k + 1 + A)^alpha, c_k = c / (k + 1)^gamma
    spsa_iterations: int = Field(200, ge=1)
    spsa_a: Optional[float] = Field(None, gt=0)
    spsa_c: float = Field(0.2, gt=0)
    spsa_A: Optional[float] = Field(None, ge=0)
    spsa_alpha: float = Field(0.602, gt=0)
    spsa_gamma: float = Field(0.101, gt=0)

    seed: Optional[int] = None
    warm_start: bool = True

    model_config = ConfigDict(extra="forbid", frozen=True)

    def spsa_gains(self) -> tuple[float, float]:
        """(a, A) com os padrões usuais quando não informados."""
        A = self.spsa_A if self.spsa_A is not None else 0.1 * self.spsa_iterations
        a = self.spsa_a if self.spsa_a is not None else 0.05 * (A + 1.0) ** self.spsa_alpha
        return a, A
