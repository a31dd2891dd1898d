"""Experiment drivers: leak sweeps, drag sweeps and swimming runs."""
from __future__ import annotations

import logging
import time as clock
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from .config import ExperimentConfig
from .errors import BlowUpError, FrameDegeneracyError, IllConditionedSystemError
from .flagellum import PlanarFlagellumState, initial_planar_shape, penalty_forces, step_planar
from .mobility import (
    ForceSolution,
    drag,
    filament_velocity,
    fit_effective_radius,
    mrs_solve_forces,
    slender_body_drag,
    solve_forces,
    velocity_errors,
)
from .model import FilamentMesh, FloatArray
from .output import (
    DRAG_COLUMNS,
    LEAK_COLUMNS,
    TrajectoryRecord,
    TrajectoryWriter,
    write_summary,
    write_table,
    write_trajectory,
)
from .rod import RodState, TurningProcess, initial_rod_state, rod_internal, rod_loads, step_rod

logger = logging.getLogger(__name__)

# Rod segments behave like slender bodies of radius 0.97 eps.
ROD_RADIUS_RATIO = 0.97
# Grid on the wall plane used to monitor the no-slip condition.
_WALL_GRID = 5
MEASURED_BEATS = 3

SwimState = Union[PlanarFlagellumState, RodState]


@dataclass
class ExperimentResult:
    experiment: str
    results: Dict[str, Any]
    files: List[Path] = field(default_factory=list)


def mrs_leak_fit(ratio: np.ndarray) -> np.ndarray:
    """Empirical leak of the point-force method as a function of eps/h."""
    return 0.9 * 10.0 ** (-2.3 * np.asarray(ratio))


def segment_leak_fit(ratio: np.ndarray) -> np.ndarray:
    """Empirical ``h^-1/2`` scaled leak of the segment method as a function of eps/h."""
    ratio = np.asarray(ratio)
    return 0.25 * (10.0 ** (-ratio) + 0.63 * 10.0 ** (-0.46 * ratio))


def _solve(method: str, mesh: FilamentMesh, velocity: np.ndarray, eps: float, config: ExperimentConfig) -> ForceSolution:
    if method == "segments":
        return solve_forces(
            mesh,
            velocity,
            eps,
            config.mu,
            condition_warning=config.condition_warning,
            workers=config.effective_workers,
        )
    return mrs_solve_forces(mesh, velocity, eps, config.mu, condition_warning=config.condition_warning)


def _summary(config: ExperimentConfig, results: Dict[str, Any], started: float) -> Dict[str, Any]:
    from . import __version__

    return {
        "experiment": config.experiment,
        "package_version": __version__,
        "parameters": config.to_document(),
        "results": results,
        "elapsed_seconds": clock.perf_counter() - started,
    }


def leak_rows(config: ExperimentConfig) -> List[Dict[str, Any]]:
    """One row per (method, node count, eps/h) for a filament translating with U = (0, 1, 0)."""
    velocity = np.array([0.0, 1.0, 0.0])
    rows = []
    for method in ("segments", "mrs"):
        for n_nodes in config.node_counts:
            mesh = FilamentMesh.straight(n_nodes, config.model.length)
            h = mesh.total_length / (n_nodes - 1)
            for ratio in config.eps_over_h_grid:
                eps = ratio * h
                row: Dict[str, Any] = {"method": method, "nodes": n_nodes, "eps": eps, "eps_over_h": ratio}
                row["empirical_fit"] = float(segment_leak_fit(ratio) if method == "segments" else mrs_leak_fit(ratio))
                try:
                    solution = _solve(method, mesh, velocity, eps, config)
                except IllConditionedSystemError as exc:
                    logger.warning("Skipping %s N=%d eps/h=%.3g: %s", method, n_nodes, ratio, exc)
                    row.update(
                        leak=np.nan, scaled_leak=np.nan, endpoint_error=np.nan,
                        midpoint_error=np.nan, condition=exc.condition or np.inf,
                    )
                    rows.append(row)
                    continue
                errors = velocity_errors(
                    mesh, solution.forces, velocity, eps, config.mu, config.check_points,
                    method=method, workers=config.effective_workers,
                )
                value = float(np.sqrt(np.mean(errors ** 2)))
                row.update(
                    leak=value,
                    scaled_leak=value / np.sqrt(h),
                    endpoint_error=float(max(errors[0], errors[-1])),
                    midpoint_error=float(errors[errors.size // 2]),
                    condition=solution.condition,
                )
                logger.info("leak %s N=%d eps/h=%.3g: %.4e", method, n_nodes, ratio, value)
                rows.append(row)
    return rows


def _mrs_decay(rows: List[Dict[str, Any]]) -> Tuple[Optional[float], Optional[float]]:
    """Fit ``log10 leak = log10 c - a eps/h`` over eps/h in [0.2, 1]; returns ``(a, c)``."""
    picked = [
        (r["eps_over_h"], r["leak"])
        for r in rows
        if r["method"] == "mrs" and 0.2 <= r["eps_over_h"] <= 1.0 and np.isfinite(r["leak"]) and r["leak"] > 0.0
    ]
    if len({ratio for ratio, _ in picked}) < 2:
        return None, None
    ratio, value = np.array(picked).T
    slope, intercept = np.polyfit(ratio, np.log10(value), 1)
    return float(-slope), float(10.0 ** intercept)


def _scaled_spread(rows: List[Dict[str, Any]]) -> Optional[float]:
    """Largest relative spread of the segment method's scaled leak across node counts."""
    by_ratio: Dict[float, List[float]] = {}
    for r in rows:
        if r["method"] == "segments" and np.isfinite(r["scaled_leak"]):
            by_ratio.setdefault(r["eps_over_h"], []).append(r["scaled_leak"])
    spreads = [(max(v) - min(v)) / min(v) for v in by_ratio.values() if len(v) > 1 and min(v) > 0.0]
    return float(max(spreads)) if spreads else None


def run_leak(config: ExperimentConfig) -> ExperimentResult:
    started = clock.perf_counter()
    logger.info("Leak sweep over N in %s and eps/h in %s", config.node_counts, config.eps_over_h_grid)
    rows = leak_rows(config)
    exponent, prefactor = _mrs_decay(rows)
    results = {
        "rows": len(rows),
        "mrs_decay_exponent": exponent,
        "mrs_prefactor": prefactor,
        "segment_scaled_leak_spread": _scaled_spread(rows),
    }
    table = write_table(config.out / "leak_curve.csv", LEAK_COLUMNS, rows)
    summary = write_summary(config.out / "summary.json", _summary(config, results, started))
    return ExperimentResult(config.experiment, results, [table, summary])


def drag_rows(config: ExperimentConfig) -> List[Dict[str, Any]]:
    """Drag on a straight filament moving with unit speed, one row per eps."""
    mesh = FilamentMesh.straight(config.nodes, config.model.length)
    direction = np.array([0.0, 1.0, 0.0]) if config.direction == "transverse" else np.array([1.0, 0.0, 0.0])
    rows = []
    for eps in config.eps_grid:
        solution = _solve(config.method, mesh, direction, eps, config)
        value = float(drag(mesh, solution.forces) @ direction)
        rows.append({"eps": eps, "drag": value, "condition": solution.condition})
        logger.info("drag eps=%.4g: %.6e", eps, value)
    return rows


def run_drag(config: ExperimentConfig) -> ExperimentResult:
    """Drag sweep; transverse runs are fitted to the slender-body law for ``r_e / eps``."""
    started = clock.perf_counter()
    rows = drag_rows(config)
    ratio = None
    if config.direction == "transverse":
        eps = np.array([r["eps"] for r in rows])
        values = np.array([r["drag"] for r in rows])
        ratio = fit_effective_radius(eps, values, config.model.length, config.mu)
        theory = slender_body_drag(config.model.length, ratio * eps, config.mu)
        for row, predicted in zip(rows, theory):
            row["slender_body_drag"] = float(predicted)
            row["relative_error"] = abs(row["drag"] - predicted) / predicted
        logger.info("Fitted effective radius r_e = %.4f eps", ratio)
    else:
        for row in rows:
            row["slender_body_drag"] = np.nan
            row["relative_error"] = np.nan
    results = {"rows": len(rows), "direction": config.direction, "effective_radius_ratio": ratio}
    table = write_table(config.out / "drag_curve.csv", DRAG_COLUMNS, rows)
    summary = write_summary(config.out / "summary.json", _summary(config, results, started))
    return ExperimentResult(config.experiment, results, [table, summary])


def _heading(nodes: FloatArray) -> float:
    """Angle in the x-y plane of the body axis pointing from the last node to the first."""
    axis = nodes[0] - nodes[-1]
    return float(np.arctan2(axis[1], axis[0]))


def wall_plane_grid(nodes: FloatArray, margin: float = 0.25, n: int = _WALL_GRID) -> FloatArray:
    """``n x n`` points on z = 0 covering the filament's footprint plus ``margin``."""
    lo = nodes[:, :2].min(axis=0) - margin
    hi = nodes[:, :2].max(axis=0) + margin
    gx, gy = np.meshgrid(np.linspace(lo[0], hi[0], n), np.linspace(lo[1], hi[1], n))
    return np.stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)], axis=-1)


@dataclass
class SwimMetrics:
    """Running measurements collected at snapshots and at whole beats."""

    initial_nodes: FloatArray
    beat_centroids: List[FloatArray] = field(default_factory=list)
    beat_headings: List[float] = field(default_factory=list)
    max_link_strain: float = 0.0
    max_wall_velocity: float = 0.0
    out_of_plane: float = 0.0
    max_frame_drift: float = 0.0

    def observe(self, nodes: FloatArray, spacing: float) -> None:
        strain = np.linalg.norm(np.diff(nodes, axis=0), axis=1) / spacing - 1.0
        self.max_link_strain = max(self.max_link_strain, float(np.max(np.abs(strain))))
        excursion = np.max(np.abs(nodes[:, 2] - self.initial_nodes[:, 2]))
        self.out_of_plane = max(self.out_of_plane, float(excursion))

    def mark_beat(self, nodes: FloatArray) -> None:
        self.beat_centroids.append(nodes.mean(axis=0))
        self.beat_headings.append(_heading(nodes))

    def summarize(self, length: float, final_nodes: FloatArray, final_beats: float) -> Dict[str, Any]:
        """Displacement per beat over the last (up to three) whole beats, and heading drift per beat."""
        beats_done = len(self.beat_centroids) - 1
        if beats_done >= 1:
            start = max(0, beats_done - MEASURED_BEATS)
            displacement = self.beat_centroids[-1] - self.beat_centroids[start]
            beats = float(beats_done - start)
            axis = self.axis_at_beat(start)
        else:
            start = 0
            displacement = final_nodes.mean(axis=0) - self.initial_nodes.mean(axis=0)
            beats = final_beats
            axis = self.initial_nodes[0] - self.initial_nodes[-1]
        planar = displacement[:2]
        per_beat = float(np.linalg.norm(planar) / beats) if beats > 0.0 else 0.0
        alignment = None
        if np.linalg.norm(planar) > 0.0 and np.linalg.norm(axis[:2]) > 0.0:
            alignment = float(planar @ axis[:2] / (np.linalg.norm(planar) * np.linalg.norm(axis[:2])))
        increments = np.diff(np.unwrap(self.beat_headings)) if len(self.beat_headings) > 1 else np.zeros(0)
        measured = increments[start:] if increments.size > start else increments
        return {
            "beats_measured": beats,
            "displacement_per_beat": per_beat,
            "beats_per_body_length": length / per_beat if per_beat > 0.0 else None,
            "swim_alignment": alignment,
            "turning_rate": float(np.mean(measured)) if measured.size else 0.0,
            "heading_increments": [float(v) for v in increments],
            "max_link_strain": self.max_link_strain,
        }

    def axis_at_beat(self, beat: int) -> FloatArray:
        angle = self.beat_headings[beat]
        return np.array([np.cos(angle), np.sin(angle), 0.0])


class _SwimRun:
    """Shared stepping loop; subclasses supply the model-specific step and snapshot."""

    def __init__(self, config: ExperimentConfig, state: SwimState, period: float, length: float) -> None:
        self.config = config
        self.state = state
        self.period = period
        self.length = length
        self.metrics = SwimMetrics(initial_nodes=state.nodes.copy())

    def step(self, state: SwimState) -> SwimState:
        raise NotImplementedError

    def record(self, step: int, state: SwimState) -> TrajectoryRecord:
        raise NotImplementedError

    def observe(self, state: SwimState) -> None:
        self.metrics.observe(state.nodes, state.spacing)

    def extra_results(self) -> Dict[str, Any]:
        return {}

    def run(self, writer: TrajectoryWriter) -> Dict[str, Any]:
        config = self.config
        n_steps = max(1, int(round(config.t_final * self.period / config.dt)))
        stride = max(1, int(round(config.snapshot_stride * self.period / config.dt)))
        beat = max(1, int(round(self.period / config.dt)))
        logger.info("Running %d steps of dt=%.3g, snapshot every %d steps", n_steps, config.dt, stride)

        state = self.state
        writer.write(self.record(0, state))
        self.observe(state)
        self.metrics.mark_beat(state.nodes)
        for step in range(1, n_steps + 1):
            try:
                state = self.step(state)
            except (BlowUpError, FrameDegeneracyError):
                dump = write_trajectory(config.out / "final_state.csv", [self.record(step - 1, state)])
                logger.error("Run aborted at step %d; last good state written to %s", step, dump)
                raise
            if step % stride == 0 or step == n_steps:
                writer.write(self.record(step, state))
                self.observe(state)
                logger.debug("t = %.6g beats, step %d of %d", state.time / self.period, step, n_steps)
            if step % beat == 0:
                self.metrics.mark_beat(state.nodes)
        self.state = state

        results = {"steps": n_steps, "final_time": state.time}
        results.update(self.metrics.summarize(self.length, state.nodes, state.time / self.period))
        results.update(self.extra_results())
        return results


class _PlanarRun(_SwimRun):
    def __init__(self, config: ExperimentConfig) -> None:
        self.wall = config.experiment == "swim-wall"
        height = config.wall_height if self.wall else 0.0
        state = initial_planar_shape(config.nodes, config.model, height)
        super().__init__(config, state, config.model.curvature.period, config.model.length)

    def step(self, state: PlanarFlagellumState) -> PlanarFlagellumState:
        config = self.config
        return step_planar(
            state,
            config.dt,
            config.eps,
            config.mu,
            method=config.integrator,
            wall=self.wall,
            speed_limit=config.speed_limit,
            workers=config.effective_workers,
        )

    def record(self, step: int, state: PlanarFlagellumState) -> TrajectoryRecord:
        return TrajectoryRecord(step, state.time, state.nodes.copy(), penalty_forces(state))

    def observe(self, state: PlanarFlagellumState) -> None:
        super().observe(state)
        if self.wall:
            forces = penalty_forces(state)
            grid = wall_plane_grid(state.nodes)
            u = filament_velocity(
                state.nodes, forces, grid, self.config.eps, self.config.mu,
                wall=True, workers=self.config.effective_workers,
            )
            speed = float(np.max(np.linalg.norm(u, axis=-1)))
            self.metrics.max_wall_velocity = max(self.metrics.max_wall_velocity, speed)

    def extra_results(self) -> Dict[str, Any]:
        return {"max_wall_velocity": self.metrics.max_wall_velocity} if self.wall else {}


class _RodRun(_SwimRun):
    def __init__(self, config: ExperimentConfig) -> None:
        model = config.rod.nondimensional()
        self.turning = (
            TurningProcess(model.turning_amplitude, model.turning_interval, seed=config.seed)
            if config.turning
            else None
        )
        state = initial_rod_state(config.nodes, model)
        super().__init__(config, state, model.curvature.period, 1.0)

    def step(self, state: RodState) -> RodState:
        config = self.config
        return step_rod(
            state,
            config.dt,
            config.eps,
            config.mu,
            self.turning,
            method=config.integrator,
            speed_limit=config.speed_limit,
            workers=config.effective_workers,
        )

    def record(self, step: int, state: RodState) -> TrajectoryRecord:
        turning = self.turning.values(state.time) if self.turning is not None else (0.0, 0.0)
        force, _ = rod_loads(state, rod_internal(state, turning))
        return TrajectoryRecord(step, state.time, state.nodes.copy(), force, state.frames.copy())

    def observe(self, state: RodState) -> None:
        super().observe(state)
        self.metrics.max_frame_drift = max(self.metrics.max_frame_drift, state.frame_drift())

    def extra_results(self) -> Dict[str, Any]:
        radius = ROD_RADIUS_RATIO * self.config.eps
        return {
            "out_of_plane_excursion": self.metrics.out_of_plane,
            "max_frame_drift": self.metrics.max_frame_drift,
            "effective_radius": radius,
            "length_to_radius": self.length / radius,
        }


def run_swim(config: ExperimentConfig) -> ExperimentResult:
    """Integrate a swimmer, streaming snapshots to ``trajectory.csv``.

    ``t_final`` and ``snapshot_stride`` are measured in beat periods.
    """
    started = clock.perf_counter()
    runner: _SwimRun = _RodRun(config) if config.experiment == "swim-rod" else _PlanarRun(config)
    logger.info("Starting %s with %d nodes, eps=%.4g", config.experiment, config.nodes, config.eps)
    trajectory = config.out / "trajectory.csv"
    with TrajectoryWriter(trajectory) as writer:
        results = runner.run(writer)
    logger.info(
        "Finished %s: %.4g body lengths per beat", config.experiment, results["displacement_per_beat"]
    )
    summary = write_summary(config.out / "summary.json", _summary(config, results, started))
    return ExperimentResult(config.experiment, results, [trajectory, summary])


RUNNERS: Dict[str, Callable[[ExperimentConfig], ExperimentResult]] = {
    "leak": run_leak,
    "drag": run_drag,
    "swim-planar": run_swim,
    "swim-wall": run_swim,
    "swim-rod": run_swim,
}


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[config.experiment](config)
