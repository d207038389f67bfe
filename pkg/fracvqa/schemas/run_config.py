from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from typing import Annotated, Any, List, Literal, Optional, Union
from pathlib import Path
import json

from fracvqa.core.config import settings
from fracvqa.core.errors import ConfigError
from fracvqa.schemas.noise import NOISE_PRESETS, NoiseConfig
from fracvqa.schemas.optimizer import OptimizerConfig
from fracvqa.solver.models import BurgersProblem, SeirProblem, SubdiffusionProblem

PRESET_DIR = Path(__file__).resolve().parent.parent / "presets"

SweepAxis = Literal["alpha", "layers", "M", "nu", "topology", "xi"]


class AnsatzConfig(BaseModel):
    n: int = Field(..., ge=1)
    l: int = Field(..., ge=1)
    topology: Literal["linear", "circular"] = "linear"

    model_config = ConfigDict(extra="forbid", frozen=True)


class BackendConfig(BaseModel):
    mode: Literal["exact", "circuit", "sampled"] = "exact"
    shots: int = Field(10_000, ge=1)
    # Nome de preset ou configuração explícita
    noise: Union[str, NoiseConfig] = "none"

    model_config = ConfigDict(extra="forbid", frozen=True)

    @field_validator("noise")
    @classmethod
    def check_preset(cls, v):
        if isinstance(v, str) and v not in NOISE_PRESETS:
            raise ValueError(f"unknown noise preset '{v}' (available: {', '.join(sorted(NOISE_PRESETS))})")
        return v

    def resolve_noise(self) -> NoiseConfig:
        if isinstance(self.noise, NoiseConfig):
            return self.noise
        return NOISE_PRESETS[self.noise]


class SweepConfig(BaseModel):
    axis: SweepAxis
    values: List[Any] = Field(..., min_length=1)

    model_config = ConfigDict(extra="forbid", frozen=True)


class NoiseStudyConfig(BaseModel):
    instances: int = Field(40, ge=1)
    # Reset da norma para o valor clássico antes de cada passo
    norm_reset: bool = True

    model_config = ConfigDict(extra="forbid", frozen=True)


Problem = Annotated[
    Union[SubdiffusionProblem, BurgersProblem, SeirProblem],
    Field(discriminator="kind"),
]


class RunConfig(BaseModel):
    name: Optional[str] = None
    problem: Problem
    ansatz: AnsatzConfig
    scheme: Literal["implicit", "crank_nicolson"] = "implicit"
    xi: Optional[int] = Field(None, ge=1)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    backend: BackendConfig = Field(default_factory=BackendConfig)
    seed: Optional[int] = Field(None, ge=0)
    output_dir: Optional[str] = None
    norm_reset: bool = False
    encode_threshold: float = Field(1e-3, gt=0)
    encode_restarts: int = Field(2, ge=0)
    sweep: Optional[SweepConfig] = None
    noise_study: Optional[NoiseStudyConfig] = None

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def check_consistency(self):
        if self.problem.N != 2 ** self.ansatz.n:
            raise ValueError(f"problem.N = {self.problem.N} must equal 2^ansatz.n = {2 ** self.ansatz.n}")
        if self.xi is not None and self.xi > self.problem.M:
            raise ValueError(f"xi = {self.xi} exceeds M = {self.problem.M}")
        if self.scheme == "crank_nicolson" and self.problem.kind != "subdiffusion":
            raise ValueError("crank_nicolson scheme is only available for subdiffusion problems")
        if self.ansatz.topology == "circular" and self.ansatz.n <= 2:
            raise ValueError("circular topology requires n > 2")
        return self

    @property
    def resolved_seed(self) -> int:
        return self.seed if self.seed is not None else settings.DEFAULT_SEED


def _field_path(exc: ValidationError) -> str:
    first = exc.errors()[0]
    return ".".join(str(part) for part in first["loc"]) or "<root>"


def parse_run_config(data: dict) -> RunConfig:
    """Valida um dicionário; erros viram ConfigError com o caminho do campo."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(first["msg"], field_path=_field_path(exc)) from exc


def available_presets() -> list[str]:
    return sorted(p.stem for p in PRESET_DIR.glob("*.json"))


def _read_json(path: Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc.msg} (line {exc.lineno})")


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_run_config(
    path: Optional[str] = None,
    preset: Optional[str] = None,
    overrides: Optional[dict] = None,
) -> RunConfig:
    """Preset (opcional) + arquivo JSON (opcional) + sobrescritas da CLI, nessa ordem."""
    data: dict = {}
    if preset is not None:
        preset_path = PRESET_DIR / f"{preset}.json"
        if not preset_path.exists():
            raise ConfigError(
                f"unknown preset '{preset}' (available: {', '.join(available_presets())})",
                field_path="preset",
            )
        data = _read_json(preset_path)
    if path is not None:
        data = _merge(data, _read_json(Path(path)))
    if not data:
        raise ConfigError("no configuration given: pass --config or --preset")
    if overrides:
        data = _merge(data, overrides)
    return parse_run_config(data)
