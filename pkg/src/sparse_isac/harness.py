"""Seeded Monte-Carlo trials and parameter sweeps of the full pipeline.

One trial draws a channel and a target scene, designs the precoders,
synthesizes the echo with them, estimates the targets and scores both
functions.  Random draws inside a trial depend only on the trial seed, so
every strategy and every sweep value of a given trial sees the same
channel, scene, symbols and noise.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import subprocess
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .beamforming import StopRule, make_sensing_spec, received_snr, solve
from .config import SystemConfig, TargetScene, db_to_linear
from .sensing import default_scales, detect_and_invert, dft_estimate, rmse
from .sparse import cs_estimate, full_mask, make_selection_mask
from .waveform import draw_beta, generate_channel, generate_echo, generate_symbols, sum_rate, transmit

log = logging.getLogger(__name__)

STRATEGIES = ("cs_assisted", "full_subcarrier", "comm_only")
SWEEP_AXES = ("Gamma_0_db", "P_0", "N_t", "K", "N_sel")
RECORD_FIELDS = (
    "strategy", "axis", "value", "trial", "seed", "sum_rate_bits",
    "rmse_theta_rad", "rmse_d_m", "rmse_v_mps", "misses", "min_snr_margin_db",
    "converged", "feasible", "iterations", "status",
)


@dataclass
class MetricRecord:
    strategy: str
    seed: int
    sum_rate_bits: float
    rmse_theta_rad: float | None = None
    rmse_d_m: float | None = None
    rmse_v_mps: float | None = None
    misses: int | None = None
    min_snr_margin_db: float | None = None
    converged: bool = False
    feasible: bool = False
    iterations: int = 0
    runtime_ms: float = 0.0
    axis: str = ""
    value: float | None = None
    trial: int | str = 0
    status: str = "ok"

    def row(self) -> dict[str, Any]:
        """Deterministic CSV row (wall time is kept out of it)."""
        out = {}
        for name in RECORD_FIELDS:
            v = getattr(self, name)
            if v is None or (isinstance(v, float) and math.isnan(v)):
                out[name] = ""
            elif isinstance(v, bool):
                out[name] = int(v)
            elif isinstance(v, float):
                out[name] = repr(v)
            else:
                out[name] = v
        return out


def trial_seed(master: int, trial: int) -> int:
    """64-bit seed of trial ``trial`` under ``master``; independent of other trials."""
    state = np.random.SeedSequence([int(master), int(trial)]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


def _streams(seed: int) -> dict[str, int]:
    names = ("channel", "scene", "symbols", "noise", "mask")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: int(c.generate_state(1, dtype=np.uint64)[0]) for n, c in zip(names, children)}


def random_scene(cfg: SystemConfig, seed: int) -> TargetScene:
    """Targets uniform over the sensed sector, ``[d_ref, d_0]`` and ``[-v_max, v_max]``."""
    rng = np.random.default_rng(seed)
    Q = cfg.n_targets
    theta = rng.uniform(cfg.theta_a, cfg.theta_b, Q)
    d = rng.uniform(cfg.d_ref, cfg.d_0, Q)
    v = rng.uniform(-cfg.v_max, cfg.v_max, Q)
    return TargetScene(theta, d, v, draw_beta(Q, cfg, rng))


def strategy_mask(cfg: SystemConfig, strategy: str, seed: int):
    if strategy == "cs_assisted":
        return make_selection_mask(cfg, seed)
    if strategy == "full_subcarrier":
        return full_mask(cfg)
    if strategy == "comm_only":
        return None
    raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")


def run_trial(
    cfg: SystemConfig,
    strategy: str,
    seed: int,
    stop: StopRule | None = None,
    scene: TargetScene | None = None,
    noiseless: bool = False,
) -> MetricRecord:
    """Beamform, transmit, sense and score one seeded realization."""
    start = time.perf_counter()
    streams = _streams(seed)
    mask = strategy_mask(cfg, strategy, streams["mask"])
    channel = generate_channel(cfg, streams["channel"])
    spec = make_sensing_spec(cfg, mask.N_sel) if mask is not None else None
    result = solve(cfg, channel, spec, mask, stop)
    rate = sum_rate(channel, result.W, cfg.sigma_c_sq)
    record = MetricRecord(strategy, seed, rate, converged=result.converged,
                          feasible=result.feasible, iterations=result.iterations)
    if mask is not None:
        snr = received_snr(result.W, spec.theta_g, spec.d_0, mask, cfg)
        record.min_snr_margin_db = float(10 * np.log10(np.min(snr) / spec.Gamma_0))
        if scene is None:
            scene = random_scene(cfg, streams["scene"])
        S = generate_symbols(cfg, streams["symbols"])
        cube = generate_echo(scene, result.W, S, cfg, streams["noise"], noiseless=noiseless)
        X = transmit(result.W, S)
        processed = cs_estimate(cube, X, mask, cfg) if strategy == "cs_assisted" else dft_estimate(cube, X, cfg)
        found = detect_and_invert(processed, cfg, max_targets=max(scene.Q, 1))
        score = rmse(found, scene, default_scales(cfg))
        record.rmse_theta_rad, record.rmse_d_m, record.rmse_v_mps = score.theta, score.d, score.v
        record.misses = score.misses
    record.runtime_ms = 1e3 * (time.perf_counter() - start)
    return record


# --------------------------------------------------------------------------
# sweeps


@dataclass
class ExperimentPlan:
    base: SystemConfig
    axis: str
    values: list[float]
    trials: int = 20
    strategies: tuple[str, ...] = STRATEGIES
    out: Path | None = None
    master_seed: int = 0
    stop: StopRule = field(default_factory=StopRule)
    workers: int = 1

    def __post_init__(self) -> None:
        if self.axis not in SWEEP_AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}; choose from {SWEEP_AXES}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        unknown = set(self.strategies) - set(STRATEGIES)
        if unknown or not self.strategies:
            raise ValueError(f"unknown strategies {sorted(unknown)}; choose from {STRATEGIES}")
        self.values = [float(v) for v in self.values]
        for v in self.values:
            self.config_at(v)  # validate every point up front

    def config_at(self, value: float) -> SystemConfig:
        if self.axis == "Gamma_0_db":
            return self.base.replace(Gamma_0=db_to_linear(value))
        if self.axis == "P_0":
            return self.base.replace(P_0=float(value))
        if float(value) != int(value):
            raise ValueError(f"{self.axis} values must be integers, got {value}")
        return self.base.replace(**{self.axis: int(value)})

    def jobs(self) -> list[tuple[str, int, int]]:
        """``(strategy, value index, trial)`` in output order."""
        return [(s, j, t) for s in self.strategies for j in range(len(self.values)) for t in range(self.trials)]


def _run_job(plan: ExperimentPlan, job: tuple[str, int, int]) -> MetricRecord:
    strategy, j, t = job
    value = plan.values[j]
    seed = trial_seed(plan.master_seed, t)
    try:
        rec = run_trial(plan.config_at(value), strategy, seed, plan.stop)
    except Exception as exc:  # keep the sweep going; the row records the failure
        log.error("trial failed (%s, %s=%g, trial %d): %s", strategy, plan.axis, value, t, exc)
        rec = MetricRecord(strategy, seed, float("nan"), status=f"error: {type(exc).__name__}: {exc}")
    rec.axis, rec.value, rec.trial = plan.axis, value, t
    return rec


def aggregate(records: list[MetricRecord]) -> list[MetricRecord]:
    """Arithmetic means per ``(strategy, value)`` over successful trials."""
    groups: dict[tuple[str, float], list[MetricRecord]] = {}
    for r in records:
        if r.status == "ok":
            groups.setdefault((r.strategy, r.value), []).append(r)
    out = []
    for (strategy, value), rows in groups.items():
        def mean(name):
            vals = [getattr(r, name) for r in rows if getattr(r, name) is not None]
            vals = [v for v in vals if not math.isnan(v)]
            return float(np.mean(vals)) if vals else None

        out.append(MetricRecord(
            strategy=strategy, seed=0, sum_rate_bits=mean("sum_rate_bits"),
            rmse_theta_rad=mean("rmse_theta_rad"), rmse_d_m=mean("rmse_d_m"), rmse_v_mps=mean("rmse_v_mps"),
            misses=sum(r.misses for r in rows) if rows[0].misses is not None else None,
            min_snr_margin_db=mean("min_snr_margin_db"),
            converged=all(r.converged for r in rows), feasible=all(r.feasible for r in rows),
            iterations=int(round(np.mean([r.iterations for r in rows]))),
            runtime_ms=float(np.mean([r.runtime_ms for r in rows])),
            axis=rows[0].axis, value=value, trial="mean",
        ))
    return out


@dataclass
class SweepResult:
    records: list[MetricRecord]
    means: list[MetricRecord]
    csv_path: Path | None = None

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.records)

    @property
    def failures(self) -> list[MetricRecord]:
        return [r for r in self.records if r.status != "ok"]

    def mean(self, strategy: str, value: float) -> MetricRecord:
        for r in self.means:
            if r.strategy == strategy and r.value == float(value):
                return r
        raise KeyError((strategy, value))


def run_sweep(plan: ExperimentPlan) -> SweepResult:
    """Run every ``strategy x value x trial`` job and write the CSV, timings and manifest."""
    jobs = plan.jobs()
    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            records = list(pool.map(_run_job, [plan] * len(jobs), jobs))
    else:
        records = [_run_job(plan, job) for job in jobs]
    result = SweepResult(records, aggregate(records))
    if plan.out is not None:
        result.csv_path = write_outputs(plan, result)
    return result


def records_to_csv(records: Iterable[MetricRecord]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=RECORD_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in records:
        writer.writerow(r.row())
    return buf.getvalue()


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def git_revision() -> str | None:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).resolve().parent)
    except (OSError, subprocess.SubprocessError):
        return None
    return (out.stdout.strip() or None) if out.returncode == 0 else None


def write_outputs(plan: ExperimentPlan, result: SweepResult) -> Path:
    out = Path(plan.out)
    stem = f"sweep_{plan.axis}"
    csv_path = out / f"{stem}.csv"
    atomic_write(csv_path, records_to_csv(result.records + result.means))
    timing = io.StringIO()
    timing.write("strategy,value,trial,runtime_ms\n")
    for r in result.records:
        timing.write(f"{r.strategy},{r.value!r},{r.trial},{r.runtime_ms:.3f}\n")
    atomic_write(out / f"{stem}.timings.csv", timing.getvalue())
    manifest = {
        "axis": plan.axis,
        "values": plan.values,
        "trials": plan.trials,
        "strategies": list(plan.strategies),
        "master_seed": plan.master_seed,
        "trial_seeds": [trial_seed(plan.master_seed, t) for t in range(plan.trials)],
        "config_hash": plan.base.digest(),
        "config": plan.base.to_dict(),
        "stop": asdict(plan.stop),
        "git_revision": git_revision(),
        "failures": len(result.failures),
        "all_converged": result.all_converged,
    }
    atomic_write(out / f"{stem}.manifest.json", json.dumps(manifest, indent=2, default=float) + "\n")
    return csv_path
