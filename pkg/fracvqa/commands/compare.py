import argparse
import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np

from fracvqa.commands.common import build_spec, classical_of, cohorts_of, step_metrics, summarize
from fracvqa.core.errors import DomainMismatchError
from fracvqa.schemas.run_config import RunConfig, parse_run_config
from fracvqa.solver.classical_reference import (
    Field,
    classical_for,
    norm_fidelity,
    relative_deviation,
    trace_error,
)
from fracvqa.solver.vqa_core import reconstruct_field
from fracvqa.storage.report import write_summary_pdf
from fracvqa.storage.run_dir import RunDirectory

logger = logging.getLogger(__name__)

DEVIATION_HEADER = ("cohort", "k", "i", "relative_deviation")
SERIES_HEADER = ("cohort", "k", "trace_error", "norm_fidelity")


def register(subparsers) -> None:
    parser = subparsers.add_parser("compare", help="compare a run against its classical oracle or another run")
    parser.add_argument("run_dir", help="run directory produced by solve")
    parser.add_argument("--reference", default="classical",
                        help="'classical' (default) or the path of another run directory")
    parser.add_argument("--out", help="report directory (default: <run_dir>/compare_<reference>)")
    parser.add_argument("--pdf", action="store_true", help="also write a PDF summary")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    report = cmd_compare(args.run_dir, args.reference, out=args.out, pdf=args.pdf)
    print(json.dumps(report["summary"], indent=2, sort_keys=True))
    return 0


def _load_run(path) -> tuple[RunDirectory, RunConfig]:
    run_dir = RunDirectory(path)
    return run_dir, parse_run_config(run_dir.read_manifest()["config"])


def _check_domains(a: RunConfig, b: RunConfig) -> None:
    pa, pb = a.problem, b.problem
    for attr in ("kind", "N", "M", "L", "T"):
        if getattr(pa, attr) != getattr(pb, attr):
            raise DomainMismatchError(
                f"runs differ in problem.{attr}: {getattr(pa, attr)!r} vs {getattr(pb, attr)!r}"
            )


def _run_field(run_dir: RunDirectory, config: RunConfig, cohort: str) -> Field:
    history = run_dir.load_history()
    values = reconstruct_field(history, build_spec(config), cohort)
    p = config.problem
    return Field(values=values, h=p.h, tau=p.tau, L=p.L, T=p.T, name=cohort)


def cmd_compare(run_path, reference: str = "classical", out: Optional[str] = None, pdf: bool = False) -> dict:
    """Relatório JSON (estatísticas do erro de traço), CSV de desvio e série de fidelidade da norma."""
    run_dir, config = _load_run(run_path)
    history = run_dir.load_history()
    spec = build_spec(config)

    if reference == "classical":
        ref_name = "classical"
        oracle = classical_for(config.problem, config.scheme, config.xi)
        ref_fields = {c: classical_of(oracle, c) for c in cohorts_of(config)}
    else:
        ref_dir, ref_config = _load_run(reference)
        _check_domains(config, ref_config)
        ref_name = Path(reference).name
        ref_fields = {c: _run_field(ref_dir, ref_config, c) for c in cohorts_of(config)}

    report_dir = RunDirectory(Path(out) if out else run_dir.file(f"compare_{ref_name}")).create()
    deviation_rows: list[tuple] = []
    series_rows: list[tuple] = []
    summary: dict = {"reference": ref_name}

    for c, ref in ref_fields.items():
        quantum = reconstruct_field(history, spec, c)
        if reference == "classical":
            rows = step_metrics(history, spec, ref, c)
        else:
            rows = []
            for rec in history.cohort_records(c):
                if rec.k == 0:
                    continue
                col = ref.column(rec.k)
                state = quantum[:, rec.k]
                rows.append({
                    "k": rec.k,
                    "trace_error": trace_error(state, col),
                    "norm_fidelity": norm_fidelity(rec.r, float(np.linalg.norm(col))),
                    "n_eval": rec.n_eval,
                    "n_iter": rec.n_iter,
                    "cost": rec.cost,
                })
        K = quantum.shape[1]
        deviation = relative_deviation(quantum, ref.values[:, :K])
        for k in range(K):
            for i in range(deviation.shape[0]):
                deviation_rows.append((c, k, i, float(deviation[i, k])))
        for row in rows:
            series_rows.append((c, row["k"], row["trace_error"], row["norm_fidelity"]))
        stats = summarize(rows)
        stats["max_relative_deviation"] = float(deviation.max())
        stats["mean_relative_deviation"] = float(deviation[:, 1:].mean()) if K > 1 else 0.0
        summary[c] = stats

    report_dir.write_csv("deviation.csv", DEVIATION_HEADER, deviation_rows)
    report_dir.write_csv("norm_fidelity.csv", SERIES_HEADER, series_rows)
    with open(report_dir.file("report.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if pdf:
        flat = {f"{c}.{key}": value for c, stats in summary.items() if isinstance(stats, dict)
                for key, value in stats.items()}
        write_summary_pdf(report_dir.file("report.pdf"), f"Comparação com {ref_name}", flat,
                          rows=series_rows, header=SERIES_HEADER)
    logger.info("[COMPARE] %s vs %s -> %s", run_dir.path, ref_name, report_dir.path)
    return {"report_dir": str(report_dir.path), "summary": summary}
