import argparse
import json
import logging
from pathlib import Path
from typing import Optional

from fracvqa.commands.common import (
    METRICS_HEADER,
    SOLUTION_HEADER,
    add_common_arguments,
    build_backend,
    build_spec,
    classical_of,
    cohorts_of,
    config_from_args,
    memory_tally,
    optimizer_for,
    run_name,
    solution_rows,
    step_metrics,
    summarize,
)
from fracvqa.core.errors import OptimizationError
from fracvqa.schemas.run_config import RunConfig
from fracvqa.solver.classical_reference import classical_for
from fracvqa.solver.models import problem_summary
from fracvqa.solver.vqa_core import time_march
from fracvqa.storage.report import write_metrics_svg
from fracvqa.storage.run_dir import RunDirectory, resolve_output_dir

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("solve", help="march one problem in time and write the run directory")
    add_common_arguments(parser)
    parser.add_argument("--no-plot", action="store_true", help="skip the SVG metrics plot")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    result = cmd_solve(config, plot=not args.no_plot)
    print(json.dumps(result["summary"], indent=2, sort_keys=True))
    return 0


def _suffix(cohort: str) -> str:
    return "" if cohort == "u" else f"_{cohort}"


def _write_outputs(run_dir: RunDirectory, history, spec, oracle, cohorts, plot: bool) -> dict:
    summary: dict = {}
    for c in cohorts:
        field = classical_of(oracle, c)
        if not history.cohort_records(c):
            continue
        rows = step_metrics(history, spec, field, c)
        run_dir.write_csv(f"solution{_suffix(c)}.csv", SOLUTION_HEADER, solution_rows(history, spec, field, c))
        run_dir.write_csv(
            f"metrics{_suffix(c)}.csv", METRICS_HEADER, ([row[h] for h in METRICS_HEADER] for row in rows)
        )
        if plot and rows:
            write_metrics_svg(rows, run_dir.file(f"metrics{_suffix(c)}.svg"), title=f"{c} metrics")
        summary[c] = summarize(rows)
    return summary


def cmd_solve(config: RunConfig, run_path: Optional[Path] = None, plot: bool = True) -> dict:
    """Executa a marcha variacional e grava manifesto, histórico, CSVs e resumo.

    Em caso de falha o histórico parcial e as métricas já calculadas ficam no
    diretório, junto com o marcador FAILED.
    """
    problem = config.problem
    spec = build_spec(config)
    seed = config.resolved_seed
    backend = build_backend(config, seed)
    optimizer = optimizer_for(config, seed)
    cohorts = cohorts_of(config)

    run_dir = RunDirectory(run_path or resolve_output_dir(config.output_dir, run_name(config))).create()
    extra = {"problem_summary": problem_summary(problem)}
    run_dir.write_manifest(config, extra)
    logger.info("[RUN] %s -> %s", run_name(config), run_dir.path)

    oracle = classical_for(problem, config.scheme, config.xi)

    try:
        history = time_march(
            problem,
            spec,
            optimizer,
            backend,
            scheme=config.scheme,
            xi=config.xi,
            encode_threshold=config.encode_threshold,
            encode_restarts=config.encode_restarts,
            classical=oracle,
            norm_reset=config.norm_reset,
            callback=run_dir.append_history,
        )
    except OptimizationError as exc:
        if exc.history is not None and len(exc.history):
            run_dir.write_history(exc.history)
            _write_outputs(run_dir, exc.history, spec, oracle, cohorts, plot=False)
        run_dir.mark_failed(exc.detail, exc.step)
        raise

    run_dir.write_history(history)
    per_cohort = _write_outputs(run_dir, history, spec, oracle, cohorts, plot)
    summary = per_cohort["u"] if cohorts == ("u",) else {"cohorts": per_cohort}
    summary["total_n_eval"] = history.total_evaluations()
    summary["total_n_iter"] = history.total_iterations()
    summary["memory"] = memory_tally(problem.N, spec.n_params, (problem.M + 1) * len(cohorts))
    with open(run_dir.file("summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"run_dir": str(run_dir.path), "summary": summary, "history": history}
