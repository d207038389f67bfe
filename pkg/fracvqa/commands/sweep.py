import argparse
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Optional

from fracvqa.commands.common import add_common_arguments, config_from_args, run_name
from fracvqa.commands.solve import cmd_solve
from fracvqa.core.config import settings
from fracvqa.core.errors import ConfigError, FracVQAError
from fracvqa.core.log import setup_logging
from fracvqa.schemas.run_config import RunConfig, parse_run_config
from fracvqa.storage.run_dir import RunDirectory, resolve_output_dir

logger = logging.getLogger(__name__)

SWEEP_HEADER = (
    "axis", "value", "status", "mean_trace_error", "std_trace_error", "max_trace_error",
    "total_n_eval", "total_n_iter", "error",
)


def register(subparsers) -> None:
    parser = subparsers.add_parser("sweep", help="one solve per value of a sweep axis")
    add_common_arguments(parser)
    parser.add_argument("--axis", choices=["alpha", "layers", "M", "nu", "topology", "xi"],
                        help="overrides sweep.axis from the config")
    parser.add_argument("--values", help="comma separated values, overrides sweep.values")
    parser.add_argument("--workers", type=int, help="job pool size (default: MAX_WORKERS)")
    parser.set_defaults(handler=run)


def _parse_values(raw: str) -> list:
    values: list = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            values.append(int(item))
        except ValueError:
            try:
                values.append(float(item))
            except ValueError:
                values.append(item)
    return values


def run(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    if args.axis or args.values:
        sweep = dict(config.sweep.model_dump()) if config.sweep else {}
        if args.axis:
            sweep["axis"] = args.axis
        if args.values:
            sweep["values"] = _parse_values(args.values)
        data = config.model_dump(mode="json")
        data["sweep"] = sweep
        config = parse_run_config(data)
    rows = cmd_sweep(config, workers=args.workers)
    failed = sum(1 for row in rows if row["status"] != "ok")
    print(f"[SWEEP] {len(rows) - failed}/{len(rows)} points completed")
    return 0


def apply_axis(config: RunConfig, axis: str, value: Any) -> RunConfig:
    """Cópia validada da configuração com ``axis = value``."""
    data = config.model_dump(mode="json")
    data["sweep"] = None
    problem = data["problem"]
    if axis == "alpha":
        if problem["kind"] == "seir":
            problem["alphas"] = [float(value)] * 4
        else:
            problem["alpha"] = float(value)
    elif axis == "nu":
        if problem["kind"] == "burgers":
            problem["nu"] = float(value)
        elif problem["kind"] == "seir":
            problem["nus"] = [float(value)] * 4
        else:
            raise ConfigError("nu sweep needs a burgers or seir problem", field_path="sweep.axis")
    elif axis == "M":
        problem["M"] = int(value)
    elif axis == "layers":
        data["ansatz"]["l"] = int(value)
    elif axis == "topology":
        data["ansatz"]["topology"] = str(value)
    elif axis == "xi":
        data["xi"] = int(value)
    else:
        raise ConfigError(f"unknown sweep axis '{axis}'", field_path="sweep.axis")
    return parse_run_config(data)


def _run_point(config_data: dict, run_path: str, axis: str, value: Any, log_level: Optional[str] = None) -> dict:
    if log_level:
        setup_logging(log_level)
    row = {h: "" for h in SWEEP_HEADER}
    row.update(axis=axis, value=value)
    try:
        config = apply_axis(parse_run_config(config_data), axis, value)
        result = cmd_solve(config, Path(run_path), plot=False)
        summary = result["summary"]
        if "cohorts" in summary:
            per = summary["cohorts"].values()
            summary = {
                "mean_trace_error": max(s["mean_trace_error"] for s in per),
                "std_trace_error": max(s["std_trace_error"] for s in per),
                "max_trace_error": max(s["max_trace_error"] for s in per),
                "total_n_eval": result["summary"]["total_n_eval"],
                "total_n_iter": result["summary"]["total_n_iter"],
            }
        row.update(
            status="ok",
            mean_trace_error=summary["mean_trace_error"],
            std_trace_error=summary["std_trace_error"],
            max_trace_error=summary["max_trace_error"],
            total_n_eval=summary["total_n_eval"],
            total_n_iter=summary["total_n_iter"],
        )
    except FracVQAError as exc:
        logger.error("[SWEEP] %s=%s failed: %s", axis, value, exc.detail)
        row.update(status="failed", error=exc.detail)
    return row


def cmd_sweep(config: RunConfig, workers: Optional[int] = None, out: Optional[Path] = None) -> list[dict]:
    """Uma execução por valor do eixo; falhas pontuais ficam registradas e o resto segue."""
    if config.sweep is None:
        raise ConfigError("sweep configuration missing (axis and values)", field_path="sweep")
    axis, values = config.sweep.axis, list(config.sweep.values)
    root = RunDirectory(out or resolve_output_dir(config.output_dir, f"{run_name(config)}_sweep_{axis}")).create()
    data = config.model_dump(mode="json")
    jobs = [(data, str(root.file(f"{axis}_{value}")), axis, value) for value in values]
    workers = workers or settings.MAX_WORKERS
    logger.info("[SWEEP] axis=%s, %d points, %d worker(s)", axis, len(jobs), workers)

    if workers <= 1 or len(jobs) == 1:
        rows = [_run_point(*job) for job in jobs]
    else:
        level = logging.getLevelName(logging.getLogger("fracvqa").level)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_point, *job, level) for job in jobs]
            rows = [f.result() for f in futures]

    root.write_csv("sweep.csv", SWEEP_HEADER, ([row[h] for h in SWEEP_HEADER] for row in rows))
    with open(root.file("sweep.json"), "w", encoding="utf-8") as fh:
        json.dump({"axis": axis, "values": values, "rows": rows}, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return rows
