from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from stokeslet_segments.config import load_config
from stokeslet_segments.errors import BlowUpError
from stokeslet_segments.experiments import (
    SwimMetrics,
    mrs_leak_fit,
    run_experiment,
    segment_leak_fit,
    wall_plane_grid,
)
from stokeslet_segments.output import read_summary, read_table, read_trajectory


def configure(experiment: str, out: Path, **overrides):
    return load_config(overrides={"out": str(out), **overrides}, experiment=experiment)


def test_empirical_leak_fits() -> None:
    assert mrs_leak_fit(0.0) == pytest.approx(0.9)
    assert mrs_leak_fit(1.0) == pytest.approx(0.9 * 10.0 ** -2.3)
    assert segment_leak_fit(1.0) == pytest.approx(0.25 * (0.1 + 0.63 * 10.0 ** -0.46))
    np.testing.assert_allclose(segment_leak_fit([0.0, 0.0]), 0.25 * 1.63)


def test_drag_sweep_writes_curve_and_summary(tmp_path: Path) -> None:
    config = configure("drag", tmp_path, nodes=24, eps_grid=[0.01, 0.02])
    result = run_experiment(config)
    assert [p.name for p in result.files] == ["drag_curve.csv", "summary.json"]
    rows = read_table(tmp_path / "drag_curve.csv")
    assert [float(r["eps"]) for r in rows] == [0.01, 0.02]
    drags = [float(r["drag"]) for r in rows]
    assert drags[0] < drags[1]
    summary = read_summary(tmp_path / "summary.json")
    assert summary["experiment"] == "drag"
    assert summary["parameters"]["nodes"] == 24
    assert 0.5 < summary["results"]["effective_radius_ratio"] < 1.5
    assert all(float(r["relative_error"]) < 0.05 for r in rows)


def test_axial_drag_is_not_fitted(tmp_path: Path) -> None:
    config = configure("drag", tmp_path, nodes=16, eps_grid=[0.02], direction="axial")
    result = run_experiment(config)
    assert result.results["effective_radius_ratio"] is None
    (row,) = read_table(tmp_path / "drag_curve.csv")
    assert row["slender_body_drag"] == "nan"
    assert float(row["drag"]) > 0.0
    assert read_summary(tmp_path / "summary.json")["results"]["direction"] == "axial"


def test_leak_sweep_covers_both_methods(tmp_path: Path) -> None:
    config = configure("leak", tmp_path, node_counts=[12, 16], eps_over_h_grid=[0.5, 1.0], check_points=101)
    result = run_experiment(config)
    rows = read_table(tmp_path / "leak_curve.csv")
    assert len(rows) == 8 == result.results["rows"]
    assert {r["method"] for r in rows} == {"segments", "mrs"}
    for method in ("segments", "mrs"):
        for n_nodes in ("12", "16"):
            leaks = [float(r["leak"]) for r in rows if r["method"] == method and r["nodes"] == n_nodes]
            assert len(leaks) == 2 and all(value > 0.0 for value in leaks)
    mrs = {float(r["eps_over_h"]): float(r["leak"]) for r in rows if r["method"] == "mrs" and r["nodes"] == "16"}
    assert mrs[1.0] < mrs[0.5]
    assert result.results["mrs_decay_exponent"] > 0.0
    assert result.results["segment_scaled_leak_spread"] is not None


def test_planar_swim_streams_snapshots(tmp_path: Path, fixtures_dir: Path) -> None:
    config = load_config(fixtures_dir / "swim_short.yaml", {"out": str(tmp_path)})
    result = run_experiment(config)
    records = read_trajectory(tmp_path / "trajectory.csv")
    assert [r.step for r in records] == [0, 10, 20]
    assert records[-1].time == pytest.approx(0.002)
    assert all(r.forces is not None and r.frames is None for r in records)
    assert result.results["steps"] == 20
    assert result.results["max_link_strain"] < 5e-2
    summary = read_summary(tmp_path / "summary.json")
    assert summary["results"]["heading_increments"] == []
    assert summary["results"]["turning_rate"] == 0.0


def test_deterministic_runs_are_byte_identical(tmp_path: Path, fixtures_dir: Path) -> None:
    path = fixtures_dir / "swim_short.yaml"
    run_experiment(load_config(path, {"out": str(tmp_path / "a")}))
    run_experiment(load_config(path, {"out": str(tmp_path / "b")}))
    first = (tmp_path / "a" / "trajectory.csv").read_bytes()
    assert first == (tmp_path / "b" / "trajectory.csv").read_bytes()


def test_wall_swimmer_keeps_the_plane_at_rest(tmp_path: Path) -> None:
    config = configure("swim-wall", tmp_path, nodes=8, eps=0.02, dt=1e-4, t_final=0.002, snapshot_stride=0.001)
    result = run_experiment(config)
    assert result.results["max_wall_velocity"] < 1e-10
    records = read_trajectory(tmp_path / "trajectory.csv")
    assert np.all(records[-1].nodes[:, 2] > 0.0)


def test_rod_swim_records_frames(tmp_path: Path) -> None:
    config = configure("swim-rod", tmp_path, nodes=8, eps=0.005, dt=1e-5, t_final=1e-4)
    result = run_experiment(config)
    records = read_trajectory(tmp_path / "trajectory.csv")
    assert [r.step for r in records] == [0, 10]
    assert records[-1].frames is not None
    frames = records[-1].frames
    np.testing.assert_allclose(frames @ np.swapaxes(frames, 1, 2), np.eye(3)[None], atol=1e-12)
    assert result.results["length_to_radius"] == pytest.approx(206.19, rel=1e-4)
    assert result.results["max_frame_drift"] < 1e-12


def test_blow_up_dumps_the_last_good_state(tmp_path: Path, fixtures_dir: Path) -> None:
    config = load_config(fixtures_dir / "blow_up.yaml", {"out": str(tmp_path)})
    with pytest.raises(BlowUpError):
        run_experiment(config)
    (record,) = read_trajectory(tmp_path / "final_state.csv")
    assert record.step == 0
    assert not (tmp_path / "summary.json").exists()


def test_wall_grid_covers_the_footprint() -> None:
    nodes = np.array([[0.0, 0.0, 0.1], [1.0, 0.5, 0.1]])
    grid = wall_plane_grid(nodes)
    assert grid.shape == (25, 3)
    np.testing.assert_allclose(grid[:, 2], 0.0)
    np.testing.assert_allclose(grid[:, :2].min(axis=0), [-0.25, -0.25])
    np.testing.assert_allclose(grid[:, :2].max(axis=0), [1.25, 0.75])


def test_swim_metrics_use_the_last_three_beats() -> None:
    body = np.array([[0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
    metrics = SwimMetrics(initial_nodes=body)
    for beat in range(6):
        metrics.mark_beat(body + [0.1 * beat, 0.0, 0.0])
    summary = metrics.summarize(1.0, body + [0.5, 0.0, 0.0], 5.0)
    assert summary["beats_measured"] == 3.0
    assert summary["displacement_per_beat"] == pytest.approx(0.1)
    assert summary["beats_per_body_length"] == pytest.approx(10.0)
    assert summary["swim_alignment"] == pytest.approx(1.0)
    assert summary["turning_rate"] == 0.0
    assert summary["heading_increments"] == [0.0] * 5


@pytest.mark.slow
def test_planar_swimmer_speed(tmp_path: Path) -> None:
    speeds = {}
    for nodes in (24, 12):
        config = configure(
            "swim-planar", tmp_path / str(nodes), nodes=nodes, dt=1e-4, t_final=5.0, integrator="rk2"
        )
        speeds[nodes] = run_experiment(config).results
    assert 17.6 <= speeds[24]["beats_per_body_length"] <= 26.4
    assert speeds[24]["swim_alignment"] > 0.0
    coarse = speeds[12]["displacement_per_beat"]
    fine = speeds[24]["displacement_per_beat"]
    assert abs(coarse - fine) / fine < 0.05


@pytest.mark.slow
def test_curvature_offset_makes_the_swimmer_turn(tmp_path: Path) -> None:
    config = configure(
        "swim-planar",
        tmp_path,
        nodes=12,
        dt=1e-4,
        t_final=4.0,
        integrator="rk2",
        model={"offset": 1.4989},
    )
    increments = np.array(run_experiment(config).results["heading_increments"])
    assert increments.size == 4
    assert np.all(np.abs(increments) > 0.0)
    assert np.all(np.sign(increments) == np.sign(increments[0]))


@pytest.mark.slow
def test_rod_turning_leaves_the_plane(tmp_path: Path) -> None:
    config = configure("swim-rod", tmp_path, nodes=12, t_final=0.2)
    result = run_experiment(config)
    assert result.results["out_of_plane_excursion"] > 1e-6
    assert result.results["max_frame_drift"] < 1e-10


@pytest.mark.slow
def test_leak_curves_follow_the_empirical_fits(tmp_path: Path) -> None:
    result = run_experiment(configure("leak", tmp_path))
    assert result.results["mrs_decay_exponent"] == pytest.approx(2.3, rel=0.15)
    assert result.results["segment_scaled_leak_spread"] < 0.2
    for row in read_table(tmp_path / "leak_curve.csv"):
        if row["method"] == "segments" and float(row["eps_over_h"]) in (0.5, 1.0, 2.0):
            ratio = float(row["scaled_leak"]) / float(row["empirical_fit"])
            assert 1.0 / 1.5 < ratio < 1.5
