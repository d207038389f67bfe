from pydantic import BaseModel, Field, ConfigDict, field_validator
from typing import Optional, List

import numpy as np

from fracvqa.core.errors import MissingHistoryError, UsageError


class HistoryRecord(BaseModel):
    """Um passo de tempo armazenado classicamente: parâmetros θ^k e norma r^k."""

    k: int = Field(..., ge=0)
    cohort: str = "u"
    theta: List[float]
    r: float
    n_eval: int = Field(0, ge=0)
    n_iter: int = Field(0, ge=0)
    cost: float = 0.0
    converged: bool = True
    # Resíduo do ajuste da condição inicial (só em k = 0)
    residual: Optional[float] = None
    # Norma substituída pelo valor clássico (política de reset no estudo de ruído)
    norm_reset: bool = False
    # r^k obtido pelo otimizador antes do reset
    r_measured: Optional[float] = None

    model_config = ConfigDict(extra="forbid")

    @field_validator("theta", mode="before")
    @classmethod
    def convert_array_to_list(cls, v):
        if hasattr(v, "tolist"):
            return [float(x) for x in v.tolist()]
        return v


class SolutionHistory(BaseModel):
    records: List[HistoryRecord] = Field(default_factory=list)

    def cohorts(self) -> list[str]:
        seen: list[str] = []
        for rec in self.records:
            if rec.cohort not in seen:
                seen.append(rec.cohort)
        return seen

    def cohort_records(self, cohort: str = "u") -> list[HistoryRecord]:
        return [rec for rec in self.records if rec.cohort == cohort]

    def last_k(self, cohort: str = "u") -> Optional[int]:
        recs = self.cohort_records(cohort)
        return recs[-1].k if recs else None

    def append(self, record: HistoryRecord) -> None:
        last = self.last_k(record.cohort)
        expected = 0 if last is None else last + 1
        if record.k != expected:
            raise UsageError(
                f"history for cohort '{record.cohort}' expects step {expected}, got {record.k}"
            )
        self.records.append(record)

    def get(self, k: int, cohort: str = "u") -> HistoryRecord:
        for rec in self.records:
            if rec.k == k and rec.cohort == cohort:
                return rec
        raise MissingHistoryError(f"no history record for step {k} (cohort '{cohort}')")

    def theta(self, k: int, cohort: str = "u"):
        return np.asarray(self.get(k, cohort).theta, dtype=float)

    def r(self, k: int, cohort: str = "u") -> float:
        return self.get(k, cohort).r

    def norms(self, cohort: str = "u") -> list[float]:
        return [rec.r for rec in self.cohort_records(cohort)]

    def __len__(self) -> int:
        return len(self.records)

    def total_evaluations(self) -> int:
        return sum(rec.n_eval for rec in self.records)

    def total_iterations(self) -> int:
        return sum(rec.n_iter for rec in self.records)
