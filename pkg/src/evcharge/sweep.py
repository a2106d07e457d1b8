"""Run scenarios into output directories, optionally several at once."""

from __future__ import annotations

import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .config import ScenarioConfig, dump_config
from .engine import run
from .errors import ContractError
from .metrics import MetricsRecord, report

log = logging.getLogger(__name__)

METRICS_FILE = "metrics.json"
CONFIG_FILE = "scenario.yaml"


@dataclass
class SweepResult:
    name: str
    out_dir: str
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_to_dir(config: ScenarioConfig, out_dir: str | Path) -> MetricsRecord:
    """Run one scenario and write its config copy, metrics.json and CSV reports."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics = run(config)
    dump_config(config, out / CONFIG_FILE)
    metrics.save(out / METRICS_FILE)
    report(metrics, out)
    return metrics


def _job(args: tuple[ScenarioConfig, str]) -> SweepResult:
    config, out_dir = args
    try:
        run_to_dir(config, out_dir)
    except Exception as exc:  # reported per run, the sweep carries on
        log.error("run %s failed: %s", config.name, exc)
        return SweepResult(config.name, out_dir, f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}")
    return SweepResult(config.name, out_dir)


def sweep(jobs: list[tuple[ScenarioConfig, str | Path]], parallelism: int = 1) -> list[SweepResult]:
    dirs = [str(Path(d).resolve()) for _, d in jobs]
    if len(set(dirs)) != len(dirs):
        raise ContractError("sweep output directories must be distinct")
    if parallelism < 1:
        raise ContractError("parallelism must be >= 1")
    work = [(cfg, str(d)) for (cfg, _), d in zip(jobs, dirs)]
    if parallelism == 1 or len(work) == 1:
        return [_job(w) for w in work]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(_job, work))
