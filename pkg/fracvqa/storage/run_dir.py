"""Persistência do diretório de execução.

Layout::

    manifest.json   configuração resolvida, versões, semente, constantes derivadas
    history.jsonl   um registro JSON por passo (floats em repr, restauração exata)
    solution.csv    k, t, i, x, u_quantum, u_classical, relative_deviation
    metrics.csv     k, trace_error, norm_fidelity, n_eval, n_iter, cost
    FAILED          marcador de execução abortada (com o detalhe do erro)
"""
import csv
import json
import logging
from importlib import metadata
from pathlib import Path
from typing import Iterable, Optional, Sequence

from fracvqa.core.config import settings
from fracvqa.core.errors import ConfigError, UsageError
from fracvqa.schemas.history import HistoryRecord, SolutionHistory

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
HISTORY = "history.jsonl"
FAILED = "FAILED"

_VERSIONED = ("numpy", "scipy", "pydantic", "pydantic-settings", "reportlab")


def package_versions() -> dict:
    versions = {}
    for name in _VERSIONED:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


def resolve_output_dir(output_dir: Optional[str], name: str) -> Path:
    """``output_dir`` explícito ou ``OUTPUT_ROOT/<name>``."""
    if output_dir:
        return Path(output_dir)
    return Path(settings.OUTPUT_ROOT) / name


class RunDirectory:
    def __init__(self, path):
        self.path = Path(path)

    def create(self) -> "RunDirectory":
        self.path.mkdir(parents=True, exist_ok=True)
        # resultados de uma execução anterior no mesmo diretório não valem mais
        for stale in (HISTORY, FAILED):
            (self.path / stale).unlink(missing_ok=True)
        return self

    def file(self, name: str) -> Path:
        return self.path / name

    # {{{ manifesto

    def write_manifest(self, config, extra: Optional[dict] = None) -> Path:
        payload = {
            "config": config.model_dump(mode="json"),
            "seed": config.resolved_seed,
            "versions": package_versions(),
        }
        if extra:
            payload.update(extra)
        target = self.file(MANIFEST)
        with open(target, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return target

    def read_manifest(self) -> dict:
        target = self.file(MANIFEST)
        if not target.exists():
            raise ConfigError(f"no manifest in {self.path}")
        with open(target, "r", encoding="utf-8") as fh:
            return json.load(fh)

    # }}}

    # {{{ histórico

    def append_history(self, record: HistoryRecord) -> None:
        with open(self.file(HISTORY), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record.model_dump(mode="json"), sort_keys=True))
            fh.write("\n")

    def write_history(self, history: SolutionHistory) -> Path:
        target = self.file(HISTORY)
        with open(target, "w", encoding="utf-8") as fh:
            for record in history.records:
                fh.write(json.dumps(record.model_dump(mode="json"), sort_keys=True))
                fh.write("\n")
        return target

    def load_history(self) -> SolutionHistory:
        return load_history(self.path)

    # }}}

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        target = self.file(name)
        with open(target, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(list(header))
            for row in rows:
                writer.writerow(list(row))
        return target

    def read_csv(self, name: str) -> list[dict]:
        target = self.file(name)
        if not target.exists():
            raise UsageError(f"missing {name} in {self.path}")
        with open(target, "r", encoding="utf-8", newline="") as fh:
            return list(csv.DictReader(fh))

    def mark_failed(self, detail: str, step: Optional[int] = None) -> Path:
        target = self.file(FAILED)
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(detail.rstrip() + "\n")
            if step is not None:
                fh.write(f"step: {step}\n")
        logger.error("[RUN] marked %s as failed: %s", self.path, detail)
        return target

    @property
    def failed(self) -> bool:
        return self.file(FAILED).exists()


def load_history(run_dir) -> SolutionHistory:
    """Reconstrói o histórico a partir de ``history.jsonl`` sem perda de precisão."""
    target = Path(run_dir) / HISTORY
    if not target.exists():
        raise UsageError(f"no history in {run_dir}")
    history = SolutionHistory()
    with open(target, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                history.append(HistoryRecord.model_validate(json.loads(line)))
    return history
