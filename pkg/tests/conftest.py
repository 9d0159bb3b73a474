import time
from dataclasses import dataclass

import pytest

from kerrsim.pipeline import ExperimentConfig, RunReport, run_pipeline


@dataclass
class TimedRun:
    report: RunReport
    seconds: float


@pytest.fixture(scope="session")
def ideal_run(tmp_path_factory) -> TimedRun:
    """Full default pipeline (the three reference amplitudes, ideal parameters)."""
    outdir = tmp_path_factory.mktemp("pipeline_ideal")
    config = ExperimentConfig(outdir=str(outdir))
    start = time.perf_counter()
    report = run_pipeline(config)
    return TimedRun(report, time.perf_counter() - start)


@pytest.fixture(scope="session")
def bestfit_run(tmp_path_factory) -> TimedRun:
    """Best-fit parameter pipeline at the middle amplitude."""
    outdir = tmp_path_factory.mktemp("pipeline_bestfit")
    config = ExperimentConfig(alphas=(0.53,), mode="bestfit", outdir=str(outdir))
    start = time.perf_counter()
    report = run_pipeline(config)
    return TimedRun(report, time.perf_counter() - start)
