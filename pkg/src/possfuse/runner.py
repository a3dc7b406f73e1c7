"""Monte Carlo experiment drivers and CSV output.

Three experiment shapes share one per-run engine:

* single: every configured sensor feeds its own filter, no fusion;
* independent: two sensors with independent noise and clutter feed two
  filters whose posteriors are fused each step, both by the independent
  product (the centralised reference) and by Chernoff fusion;
* dependent: one sensor's measurement stream feeds two identically
  configured filters, a deliberately fully-correlated setup that shows
  why the independent product double-counts and Chernoff fusion does not.

Fusion here is reporting, not feedback: each local filter keeps recursing
on its own posterior.

Runs are distributed over a process pool whose size comes from the CPU
count, overridable through the POSSFUSE_THREADS environment variable.
Every run is a pure function of (configuration, run index), and results
are folded in run order, so output files are byte-identical no matter how
many workers computed them.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .bernoulli import (
    BernoulliPossState,
    DetectionPossibility,
    MeasurementModel,
    MotionModel,
    ReductionConfig,
    TransitionPossibilityMatrix,
    extract,
    predict,
    probability_interval_to_possibility,
    reduce,
    update,
)
from .config import ConfigError, ExperimentConfig
from .fusion import fuse_chernoff, fuse_independent, parse_omega_strategy, select_omega
from .metrics import AggregateResult, RunRecord, SeriesTrack, aggregate
from .simulate import (
    BirthConfig,
    Scan,
    SensorConfig,
    build_birth_mixture,
    cv_process_noise,
    cv_transition,
    generate_labeled_measurements,
    generate_truth,
    ignorance_mixture,
    position_observation,
)

__all__ = [
    "NumericsError",
    "StateAudit",
    "FilterSetup",
    "build_filter_setup",
    "initial_state",
    "run_once",
    "run_single",
    "run_fusion_independent",
    "run_fusion_dependent",
    "ExperimentResult",
]

# A sensor simulated without clutter still needs a positive clutter rate
# in the filter model, where it only rescales detection weights.
MIN_MODEL_CLUTTER = 1e-6

SERIES_CHERNOFF = "chernoff"
SERIES_CENTRALIZED = "centralized"


class NumericsError(RuntimeError):
    """A run failed numerically; carries the offending run and step."""

    def __init__(self, run: int, step: int, cause: BaseException):
        self.run = run
        self.step = step
        super().__init__(f"numerical failure in run {run} at step {step}: {cause}")


@dataclass(frozen=True)
class StateAudit:
    """Invariant snapshot of one state in the recursion."""

    step: int
    phase: str
    series: str
    q_absent: float
    q_present: float
    max_weight: float
    n_components: int


@dataclass(frozen=True)
class FilterSetup:
    """Everything one filter instance needs, fixed for a whole run."""

    motion: MotionModel
    phi: TransitionPossibilityMatrix
    det: DetectionPossibility
    meas: MeasurementModel
    reduction: ReductionConfig
    birth: BirthConfig


def build_filter_setup(cfg: ExperimentConfig, sensor: SensorConfig) -> FilterSetup:
    scenario = cfg.scenario
    motion = MotionModel(
        cv_transition(scenario.dt), cv_process_noise(scenario.dt, scenario.psd)
    )
    phi = TransitionPossibilityMatrix.from_matrix(cfg.filter.phi)
    det = probability_interval_to_possibility(*cfg.filter.pd_interval)
    clutter = max(sensor.clutter_rate, MIN_MODEL_CLUTTER)
    meas = MeasurementModel(
        observation=position_observation(),
        noise=sensor.noise_var * np.eye(2),
        clutter_rate=clutter,
        region=scenario.region,
    )
    pos_var = cfg.filter.birth.pos_var
    if pos_var is None:
        pos_var = sensor.noise_var + 1.0
    birth = BirthConfig(region=scenario.region, pos_var=pos_var, vel_var=cfg.filter.birth.vel_var)
    return FilterSetup(motion=motion, phi=phi, det=det, meas=meas,
                       reduction=cfg.filter.reduction, birth=birth)


def initial_state(setup: FilterSetup) -> BernoulliPossState:
    """Total ignorance: absence and presence both fully plausible, any
    in-region location possible."""
    return BernoulliPossState(
        q_absent=1.0,
        q_present=1.0,
        spatial=ignorance_mixture(setup.birth.region, setup.birth.vel_var),
    )


def _run_seeds(master_seed: int, run_idx: int, count: int) -> list[int]:
    ss = np.random.SeedSequence(entropy=(int(master_seed), int(run_idx)))
    return [int(w) for w in ss.generate_state(count, dtype=np.uint64)]


@dataclass
class _Track:
    estimates: list = field(default_factory=list)
    q_absent: list = field(default_factory=list)
    q_present: list = field(default_factory=list)
    n_components: list = field(default_factory=list)

    def append_state(self, state: BernoulliPossState) -> None:
        self.estimates.append(extract(state))
        self.q_absent.append(state.q_absent)
        self.q_present.append(state.q_present)
        self.n_components.append(state.spatial.n_components)

    def as_series(self) -> SeriesTrack:
        return SeriesTrack(
            estimates=self.estimates,
            q_absent=self.q_absent,
            q_present=self.q_present,
            n_components=self.n_components,
        )


class _Filter:
    """One recursing filter: current state plus the scan feeding birth."""

    def __init__(self, setup: FilterSetup):
        self.setup = setup
        self.state = initial_state(setup)
        self.prev_scan: Optional[Scan] = None

    def advance(self, scan: Scan, audit: Optional[list], series: str, step: int) -> None:
        birth = build_birth_mixture(self.prev_scan, self.setup.birth)
        pred = predict(self.state, self.setup.motion, self.setup.phi, birth)
        if audit is not None:
            audit.append(_audit_of(pred, step, "predicted", series))
        post = update(pred, scan, self.setup.meas, self.setup.det)
        reduced = reduce(post.spatial, self.setup.reduction)
        self.state = BernoulliPossState(post.q_absent, post.q_present, reduced)
        if audit is not None:
            audit.append(_audit_of(self.state, step, "updated", series))
        self.prev_scan = scan


def _audit_of(state: BernoulliPossState, step: int, phase: str, series: str) -> StateAudit:
    return StateAudit(
        step=step,
        phase=phase,
        series=series,
        q_absent=state.q_absent,
        q_present=state.q_present,
        max_weight=state.spatial.max_weight,
        n_components=state.spatial.n_components,
    )


def _fused_series(mode: str) -> tuple[str, ...]:
    if mode == "chernoff":
        return (SERIES_CHERNOFF,)
    if mode == "independent":
        return (SERIES_CENTRALIZED,)
    return (SERIES_CHERNOFF, SERIES_CENTRALIZED)


def _truth_positions(truth) -> list[Optional[np.ndarray]]:
    H = position_observation()
    return [None if x is None else H @ x for x in truth]


def run_once(
    cfg: ExperimentConfig,
    run_idx: int,
    mode: str,
    audit: Optional[list] = None,
) -> RunRecord:
    """Execute one Monte Carlo run and return its record.

    mode is "single", "independent", or "dependent".  When an audit list
    is supplied, a StateAudit is appended for every predicted, updated,
    and fused state in the run.
    """
    if mode not in ("single", "independent", "dependent"):
        raise ValueError(f"unknown run mode {mode!r}")
    scenario = cfg.scenario
    if mode in ("independent", "dependent") and len(scenario.sensors) != 2:
        raise ValueError(f"{mode} fusion needs exactly 2 sensors, got {len(scenario.sensors)}")

    seeds = _run_seeds(cfg.master_seed, run_idx, 1 + len(scenario.sensors))
    truth = generate_truth(scenario, seeds[0])
    positions = _truth_positions(truth)

    scans_by_sensor = [
        [scan for scan, _ in generate_labeled_measurements(truth, sensor, scenario.region, seeds[1 + i])]
        for i, sensor in enumerate(scenario.sensors)
    ]

    omega_kind, omega_value = parse_omega_strategy(cfg.fusion.omega_strategy)

    if mode == "single":
        names = [f"sensor{i + 1}" for i in range(len(scenario.sensors))]
        filters = [build_filter_setup(cfg, s) for s in scenario.sensors]
        streams = scans_by_sensor
        fused_names: tuple[str, ...] = ()
    elif mode == "independent":
        names = ["sensor1", "sensor2"]
        filters = [build_filter_setup(cfg, s) for s in scenario.sensors]
        streams = scans_by_sensor
        fused_names = _fused_series(cfg.fusion.mode)
    else:
        # Same stream, same sensor model, two filter instances.
        names = ["single", "shadow"]
        setup = build_filter_setup(cfg, scenario.sensors[0])
        filters = [setup, setup]
        streams = [scans_by_sensor[0], scans_by_sensor[0]]
        fused_names = _fused_series(cfg.fusion.mode)

    engines = [_Filter(setup) for setup in filters]
    tracks = {name: _Track() for name in names}
    fused_tracks = {name: _Track() for name in fused_names}

    for step in range(1, scenario.steps + 1):
        try:
            for engine, name, stream in zip(engines, names, streams):
                engine.advance(stream[step - 1], audit, name, step)
                tracks[name].append_state(engine.state)
            if fused_names:
                a, b = engines[0].state, engines[1].state
                if SERIES_CHERNOFF in fused_tracks:
                    if omega_kind == "fixed":
                        omega = float(omega_value)
                    else:
                        omega = select_omega(a, b, "min-trace")
                    fused = fuse_chernoff(a, b, omega, reduction=cfg.filter.reduction).state
                    fused_tracks[SERIES_CHERNOFF].append_state(fused)
                    if audit is not None:
                        audit.append(_audit_of(fused, step, "fused", SERIES_CHERNOFF))
                if SERIES_CENTRALIZED in fused_tracks:
                    fused = fuse_independent(a, b, reduction=cfg.filter.reduction).state
                    fused_tracks[SERIES_CENTRALIZED].append_state(fused)
                    if audit is not None:
                        audit.append(_audit_of(fused, step, "fused", SERIES_CENTRALIZED))
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            raise NumericsError(run_idx, step, exc) from exc

    series: dict[str, SeriesTrack] = {}
    if mode == "dependent":
        # The two local filters are identical; report one of them.
        series["single"] = tracks["single"].as_series()
    else:
        for name in names:
            series[name] = tracks[name].as_series()
    for name in fused_names:
        series[name] = fused_tracks[name].as_series()
    return RunRecord(truth_positions=positions, series=series)


# --- worker pool ------------------------------------------------------------


def _pool_entry(args: tuple) -> RunRecord:
    cfg, run_idx, mode = args
    return run_once(cfg, run_idx, mode)


def _worker_count(runs: int) -> int:
    env = os.environ.get("POSSFUSE_THREADS")
    if env is not None:
        try:
            cap = int(env)
        except ValueError:
            raise ConfigError("POSSFUSE_THREADS", f"must be an integer, got {env!r}") from None
        if cap < 1:
            raise ConfigError("POSSFUSE_THREADS", f"must be at least 1, got {cap}")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(runs, cap))


def _collect_runs(cfg: ExperimentConfig, mode: str) -> list[RunRecord]:
    workers = _worker_count(cfg.runs)
    jobs = [(cfg, i, mode) for i in range(cfg.runs)]
    if workers == 1:
        return [_pool_entry(job) for job in jobs]
    chunk = max(1, cfg.runs // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order, which keeps the fold and every
        # downstream file independent of scheduling.
        return list(pool.map(_pool_entry, jobs, chunksize=chunk))


# --- output files -----------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def _write_lines(path: Path, lines: list[str]) -> None:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_outputs(out_dir: Path, agg: AggregateResult) -> dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    files: dict[str, Path] = {}

    lines = ["step,series,mean_ospa,runs"]
    for k in range(agg.steps):
        for s in agg.series:
            lines.append(f"{k + 1},{s},{_fmt(agg.mean_ospa[s][k])},{agg.runs}")
    files["ospa"] = out_dir / "ospa.csv"
    _write_lines(files["ospa"], lines)

    lines = ["step,series,mean_trace,present_count"]
    for k in range(agg.steps):
        for s in agg.series:
            lines.append(
                f"{k + 1},{s},{_fmt(agg.mean_trace[s][k])},{int(agg.present_count[s][k])}"
            )
    files["trace"] = out_dir / "trace.csv"
    _write_lines(files["trace"], lines)

    lines = ["step,series,mean_q_absent,mean_q_present"]
    for k in range(agg.steps):
        for s in agg.series:
            lines.append(
                f"{k + 1},{s},{_fmt(agg.mean_q_absent[s][k])},{_fmt(agg.mean_q_present[s][k])}"
            )
    files["presence"] = out_dir / "presence.csv"
    _write_lines(files["presence"], lines)
    return files


def _write_scan_dump(out_dir: Path, cfg: ExperimentConfig, mode: str) -> Path:
    """Regenerate every run's scans with labels and dump them.

    Uses the same seed derivation as the runs themselves, so the dump
    matches what the filters saw.
    """
    scenario = cfg.scenario
    sensor_count = len(scenario.sensors) if mode != "dependent" else 1
    lines = ["run,step,sensor,x_km,y_km,is_clutter"]
    for run_idx in range(cfg.runs):
        seeds = _run_seeds(cfg.master_seed, run_idx, 1 + len(scenario.sensors))
        truth = generate_truth(scenario, seeds[0])
        for i in range(sensor_count):
            labeled = generate_labeled_measurements(
                truth, scenario.sensors[i], scenario.region, seeds[1 + i]
            )
            for scan, labels in labeled:
                for p, is_clutter in zip(scan.points, labels):
                    lines.append(
                        f"{run_idx},{scan.time_index},{i + 1},{_fmt(p[0])},{_fmt(p[1])},{int(is_clutter)}"
                    )
    path = out_dir / "scans.csv"
    _write_lines(path, lines)
    return path


@dataclass
class ExperimentResult:
    aggregate: AggregateResult
    output_dir: Path
    files: dict[str, Path]


def _drive(cfg: ExperimentConfig, mode: str, out_dir, dump_scans: bool) -> ExperimentResult:
    records = _collect_runs(cfg, mode)
    agg = aggregate(records, cfg.metrics.ospa_cutoff, cfg.metrics.ospa_order)
    out_path = Path(out_dir) if out_dir is not None else Path(cfg.output_dir)
    files = _write_outputs(out_path, agg)
    if dump_scans:
        files["scans"] = _write_scan_dump(out_path, cfg, mode)
    return ExperimentResult(aggregate=agg, output_dir=out_path, files=files)


def run_single(cfg: ExperimentConfig, out_dir=None, dump_scans: bool = False) -> ExperimentResult:
    """Each sensor filtered on its own; no fusion series."""
    return _drive(cfg, "single", out_dir, dump_scans)


def run_fusion_independent(
    cfg: ExperimentConfig, out_dir=None, dump_scans: bool = False
) -> ExperimentResult:
    """Two sensors with independent errors, fused every step."""
    return _drive(cfg, "independent", out_dir, dump_scans)


def run_fusion_dependent(
    cfg: ExperimentConfig, out_dir=None, dump_scans: bool = False
) -> ExperimentResult:
    """One stream into two identical filters, fused every step."""
    return _drive(cfg, "dependent", out_dir, dump_scans)
