import argparse
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from fracvqa.commands.common import (
    add_common_arguments,
    build_spec,
    classical_of,
    config_from_args,
    run_name,
)
from fracvqa.core.config import settings
from fracvqa.core.errors import ConfigError, FracVQAError
from fracvqa.core.log import setup_logging
from fracvqa.schemas.run_config import RunConfig, parse_run_config
from fracvqa.solver.classical_reference import classical_for, norm_fidelity, trace_error
from fracvqa.solver.measurement import BackendMode, MeasurementBackend
from fracvqa.solver.models import SeirProblem
from fracvqa.solver.noise import error_budget
from fracvqa.solver.statevector import prepare
from fracvqa.solver.vqa_core import build_context, cost, time_march
from fracvqa.storage.run_dir import RunDirectory, resolve_output_dir

logger = logging.getLogger(__name__)

STUDY_HEADER = (
    "instance", "k", "status", "overlap", "overlap_exact", "hamiltonian", "hamiltonian_exact",
    "cost", "norm_fidelity", "trace_error", "error",
)


def register(subparsers) -> None:
    parser = subparsers.add_parser("noise-study", help="repeat a short sampled run over many seeded instances")
    add_common_arguments(parser)
    parser.add_argument("--instances", type=int, help="number of instances (overrides noise_study.instances)")
    parser.add_argument("--no-norm-reset", action="store_true", help="keep the measured norms between steps")
    parser.add_argument("--workers", type=int, help="job pool size (default: MAX_WORKERS)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    result = cmd_noise_study(
        config,
        instances=args.instances,
        norm_reset=False if args.no_norm_reset else None,
        workers=args.workers,
    )
    print(json.dumps(result["aggregate"], indent=2, sort_keys=True))
    return 0


def _instance(config_data: dict, index: int, seed: int, norm_reset: bool, log_level: Optional[str] = None) -> list[dict]:
    """Uma instância: marcha amostrada e medidas por passo comparadas aos valores exatos."""
    if log_level:
        setup_logging(log_level)
    config = parse_run_config(config_data)
    problem = config.problem
    spec = build_spec(config)
    noise = config.backend.resolve_noise()
    child_seeds = np.random.SeedSequence(seed).generate_state(3)
    backend = MeasurementBackend(
        mode=BackendMode(config.backend.mode), shots=config.backend.shots, seed=int(child_seeds[0]), noise=noise,
    )
    # cada instância tem sua própria semente de SPSA, mesmo com optimizer.seed fixo
    optimizer = config.optimizer.model_copy(update={"seed": int(child_seeds[1])})
    oracle = classical_for(problem, config.scheme, config.xi)
    classical = classical_of(oracle, "u")

    try:
        history = time_march(
            problem, spec, optimizer, backend, scheme=config.scheme, xi=config.xi,
            encode_threshold=config.encode_threshold, encode_restarts=config.encode_restarts,
            classical=oracle, norm_reset=norm_reset,
        )
    except FracVQAError as exc:
        logger.error("[NOISE] instance %d failed: %s", index, exc.detail)
        row = {h: "" for h in STUDY_HEADER}
        row.update(instance=index, status="failed", error=exc.detail)
        return [row]

    exact = MeasurementBackend.exact()
    sampler = MeasurementBackend(
        mode=BackendMode(config.backend.mode), shots=config.backend.shots, seed=int(child_seeds[2]), noise=noise,
    )
    rows = []
    for rec in history.cohort_records("u"):
        if rec.k == 0:
            continue
        theta = np.asarray(rec.theta)
        theta_prev = history.theta(rec.k - 1)
        ctx = build_context(problem, spec, history, exact, rec.k, config.scheme, config.xi)
        A = ctx.matrix
        col = classical.column(rec.k)
        r = rec.r_measured if rec.r_measured is not None else rec.r
        rows.append({
            "instance": index,
            "k": rec.k,
            "status": "ok",
            "overlap": sampler.overlap(spec, theta, theta_prev),
            "overlap_exact": exact.overlap(spec, theta, theta_prev),
            "hamiltonian": sampler.expect_hamiltonian(spec, theta, A),
            "hamiltonian_exact": exact.expect_hamiltonian(spec, theta, A),
            "cost": cost(theta, ctx),
            "norm_fidelity": norm_fidelity(r, float(np.linalg.norm(col))),
            "trace_error": trace_error(prepare(spec, theta), col),
            "error": "",
        })
    return rows


def _relative_error(measured: np.ndarray, exact: np.ndarray) -> float:
    scale = np.where(np.abs(exact) > 0, np.abs(exact), 1.0)
    return float(np.mean(np.abs(measured - exact) / scale))


def aggregate(rows: list[dict]) -> dict:
    ok = [row for row in rows if row["status"] == "ok"]
    out: dict = {"instances_failed": len({row["instance"] for row in rows if row["status"] != "ok"})}
    if not ok:
        return out
    for key in ("overlap", "overlap_exact", "hamiltonian", "hamiltonian_exact", "cost", "norm_fidelity", "trace_error"):
        values = np.array([row[key] for row in ok], dtype=float)
        out[f"{key}_mean"] = float(values.mean())
        out[f"{key}_std"] = float(values.std())
    eta_O = _relative_error(np.array([r["overlap"] for r in ok]), np.array([r["overlap_exact"] for r in ok]))
    eta_H = _relative_error(np.array([r["hamiltonian"] for r in ok]), np.array([r["hamiltonian_exact"] for r in ok]))
    budget = error_budget(eta_O, eta_H)
    out.update(
        eta_O=budget.eta_O,
        eta_H=budget.eta_H,
        eta_C=budget.eta_C,
        overlap_share=budget.overlap_share,
    )
    return out


def cmd_noise_study(
    config: RunConfig,
    instances: Optional[int] = None,
    norm_reset: Optional[bool] = None,
    workers: Optional[int] = None,
    out: Optional[Path] = None,
) -> dict:
    """Registros por instância e passo, agregados média±desvio e o orçamento de erro η_O/η_H."""
    if config.backend.mode != "sampled":
        raise ConfigError("noise study needs the sampled backend", field_path="backend.mode")
    if isinstance(config.problem, SeirProblem):
        raise ConfigError("noise study supports single-field problems", field_path="problem.kind")
    study = config.noise_study
    instances = instances or (study.instances if study else 40)
    if norm_reset is None:
        norm_reset = study.norm_reset if study else True

    root = RunDirectory(out or resolve_output_dir(config.output_dir, f"{run_name(config)}_noise")).create()
    root.write_manifest(config, {"instances": instances, "norm_reset": norm_reset})
    seeds = np.random.SeedSequence(config.resolved_seed).generate_state(instances)
    data = config.model_dump(mode="json")
    jobs = [(data, i, int(seeds[i]), norm_reset) for i in range(instances)]
    workers = workers or settings.MAX_WORKERS
    logger.info("[NOISE] %d instances, noise=%s, %d worker(s)", instances, config.backend.noise, workers)

    if workers <= 1 or instances == 1:
        per_instance = [_instance(*job) for job in jobs]
    else:
        level = logging.getLevelName(logging.getLogger("fracvqa").level)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_instance = list(pool.map(_instance, *zip(*jobs), [level] * len(jobs)))

    rows = [row for block in per_instance for row in block]
    root.write_csv("study.csv", STUDY_HEADER, ([row[h] for h in STUDY_HEADER] for row in rows))
    agg = aggregate(rows)
    with open(root.file("aggregate.json"), "w", encoding="utf-8") as fh:
        json.dump(agg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"run_dir": str(root.path), "rows": rows, "aggregate": agg}
