"""Peças compartilhadas pelos subcomandos: argumentos, backend, métricas por passo."""
import argparse
from typing import Optional

import numpy as np

from fracvqa.schemas.history import SolutionHistory
from fracvqa.schemas.run_config import RunConfig, load_run_config
from fracvqa.solver.classical_reference import Field, norm_fidelity, relative_deviation, trace_error
from fracvqa.solver.measurement import BackendMode, MeasurementBackend
from fracvqa.solver.models import SEIR_COHORTS, SeirProblem
from fracvqa.solver.statevector import AnsatzSpec, prepare
from fracvqa.solver.vqa_core import reconstruct_field

SOLUTION_HEADER = ("k", "t", "i", "x", "u_quantum", "u_classical", "relative_deviation")
METRICS_HEADER = ("k", "trace_error", "norm_fidelity", "n_eval", "n_iter", "cost")


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="run configuration (JSON)")
    parser.add_argument("--preset", help="named preset, e.g. fig1b")
    parser.add_argument("--out", help="output directory (default: OUTPUT_ROOT/<name>)")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--backend", choices=[m.value for m in BackendMode], help="measurement backend")
    parser.add_argument("--shots", type=int, help="shots per circuit (sampled backend)")


def overrides_from_args(args: argparse.Namespace) -> dict:
    overrides: dict = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None):
        overrides["output_dir"] = args.out
    backend: dict = {}
    if getattr(args, "backend", None):
        backend["mode"] = args.backend
    if getattr(args, "shots", None) is not None:
        backend["shots"] = args.shots
    if backend:
        overrides["backend"] = backend
    return overrides


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return load_run_config(args.config, args.preset, overrides_from_args(args))


def run_name(config: RunConfig) -> str:
    return config.name or config.problem.kind


def build_spec(config: RunConfig) -> AnsatzSpec:
    return AnsatzSpec(config.ansatz.n, config.ansatz.l, config.ansatz.topology)


def build_backend(config: RunConfig, seed: Optional[int] = None) -> MeasurementBackend:
    seed = config.resolved_seed if seed is None else seed
    return MeasurementBackend(
        mode=BackendMode(config.backend.mode),
        shots=config.backend.shots,
        seed=seed,
        noise=config.backend.resolve_noise(),
    )


def optimizer_for(config: RunConfig, seed: Optional[int] = None):
    """Otimizador com semente fixada (a do config ou a da execução)."""
    if config.optimizer.seed is not None:
        return config.optimizer
    seed = config.resolved_seed if seed is None else seed
    return config.optimizer.model_copy(update={"seed": seed})


def cohorts_of(config: RunConfig) -> tuple[str, ...]:
    return SEIR_COHORTS if isinstance(config.problem, SeirProblem) else ("u",)


def classical_of(oracle, cohort: str) -> Field:
    return oracle[cohort] if isinstance(oracle, dict) else oracle


def step_metrics(history: SolutionHistory, spec: AnsatzSpec, classical: Field, cohort: str = "u") -> list[dict]:
    """Uma linha por passo k >= 1: erro de traço, fidelidade da norma e contadores."""
    rows = []
    for rec in history.cohort_records(cohort):
        if rec.k == 0:
            continue
        col = classical.column(rec.k)
        r = rec.r_measured if rec.r_measured is not None else rec.r
        rows.append({
            "k": rec.k,
            "trace_error": trace_error(prepare(spec, rec.theta), col),
            "norm_fidelity": norm_fidelity(r, float(np.linalg.norm(col))),
            "n_eval": rec.n_eval,
            "n_iter": rec.n_iter,
            "cost": rec.cost,
        })
    return rows


def solution_rows(history: SolutionHistory, spec: AnsatzSpec, classical: Field, cohort: str = "u") -> list[tuple]:
    quantum = reconstruct_field(history, spec, cohort)
    K = quantum.shape[1]
    reference = classical.values[:, :K]
    deviation = relative_deviation(quantum, reference)
    x = classical.x()
    t = classical.t()
    rows = []
    for k in range(K):
        for i in range(classical.N):
            rows.append((k, float(t[k]), i, float(x[i]), float(quantum[i, k]),
                         float(reference[i, k]), float(deviation[i, k])))
    return rows


def summarize(rows: list[dict]) -> dict:
    if not rows:
        return {"steps": 0}
    te = np.array([row["trace_error"] for row in rows])
    nf = np.array([row["norm_fidelity"] for row in rows])
    return {
        "steps": len(rows),
        "mean_trace_error": float(te.mean()),
        "std_trace_error": float(te.std()),
        "max_trace_error": float(te.max()),
        "mean_norm_fidelity": float(nf.mean()),
        "total_n_eval": int(sum(row["n_eval"] for row in rows)),
        "total_n_iter": int(sum(row["n_iter"] for row in rows)),
    }


def memory_tally(N: int, n_params: int, steps: int) -> dict:
    """Floats guardados: grade clássica (N por passo) vs parâmetros (nl + 1 por passo)."""
    return {
        "classical_floats": N * steps,
        "parameter_floats": (n_params + 1) * steps,
    }
