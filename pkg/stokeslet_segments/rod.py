"""Kirchhoff rod with director frames, swimming through a Stokes fluid.

Frames are stored as ``(N, 3, 3)`` arrays whose row ``i`` is ``D_{i+1}``.
Everything here is dimensionless: lengths in units of the rod length,
time in beat periods and forces in ``mu l^2 / T0``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import FrameDegeneracyError
from .flagellum import DEFAULT_SPEED_LIMIT, TargetCurvature, check_speed, planar_curve, target_curvature
from .mobility import filament_rotation, filament_velocity
from .model import FloatArray, as_vectors

logger = logging.getLogger(__name__)

FRAME_DRIFT_LIMIT = 1e-4


@dataclass(frozen=True)
class RodParams:
    """Dimensional rod parameters (micrometres, seconds, milligrams)."""

    bending: Tuple[float, float, float] = (4.9587, 4.9587, 4.9587)
    shear: Tuple[float, float, float] = (0.8264, 0.8264, 0.8264)
    amplitude: float = 3.5
    wavenumber: float = 9.0 * np.pi / 160.0
    frequency: float = 550.0
    length: float = 40.0
    viscosity: float = 1e-6
    turning_fraction: float = 0.4
    turning_interval: float = 15.0

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.frequency

    @property
    def reference_force(self) -> float:
        return self.viscosity * self.length ** 2 / self.period

    def nondimensional(self) -> "RodModel":
        """Scale by the rod length, the beat period and ``mu l^2 / T0``."""
        force = self.reference_force
        curvature = TargetCurvature(
            amplitude=self.amplitude / self.length,
            wavenumber=self.wavenumber * self.length,
            frequency=2.0 * np.pi,
        )
        return RodModel(
            bending=np.asarray(self.bending) / (force * self.length ** 2),
            shear=np.asarray(self.shear) / force,
            curvature=curvature,
            turning_amplitude=curvature.turning_offset(self.turning_fraction),
            turning_interval=self.turning_interval,
        )


@dataclass(frozen=True, eq=False)
class RodModel:
    """Dimensionless stiffnesses and waveform used by the rod dynamics."""

    bending: FloatArray
    shear: FloatArray
    curvature: TargetCurvature
    turning_amplitude: float
    turning_interval: float = 15.0
    twist: float = 0.0


@dataclass(frozen=True)
class TurningProcess:
    """Piecewise-constant random curvatures ``(W1, W2)`` redrawn every ``interval`` beats.

    Interval ``i`` draws from a Philox stream advanced by ``i`` jumps, so
    values depend only on the seed and the interval index.
    """

    amplitude: float
    interval: float = 15.0
    seed: int = 0
    fixed: Optional[Tuple[float, float]] = None

    @classmethod
    def constant(cls, w1: float, w2: float) -> "TurningProcess":
        return cls(amplitude=max(abs(w1), abs(w2)), fixed=(w1, w2))

    def values(self, t: float) -> Tuple[float, float]:
        if self.fixed is not None:
            return self.fixed
        if self.amplitude == 0.0:
            return 0.0, 0.0
        index = int(np.floor(t / self.interval))
        rng = np.random.Generator(np.random.Philox(self.seed).jumped(index))
        w1, w2 = rng.uniform(-self.amplitude, self.amplitude, size=2)
        return float(w1), float(w2)


@dataclass(frozen=True, eq=False)
class RodState:
    nodes: FloatArray
    frames: FloatArray
    time: float
    model: RodModel

    def __post_init__(self) -> None:
        nodes = as_vectors(self.nodes, "nodes")
        frames = np.asarray(self.frames, dtype=np.float64)
        if nodes.ndim != 2 or nodes.shape[0] < 3:
            raise ValueError("a rod needs at least three nodes")
        if frames.shape != (nodes.shape[0], 3, 3):
            raise ValueError(f"frames must have shape {(nodes.shape[0], 3, 3)}, got {frames.shape}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "frames", frames)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def spacing(self) -> float:
        return 1.0 / (self.n_nodes - 1)

    def frame_drift(self) -> float:
        return orthonormality_drift(self.frames)


@dataclass(frozen=True, eq=False)
class RodInternal:
    """Internal force ``F`` and couple ``T`` at the half points, with their frame components."""

    force: FloatArray
    couple: FloatArray
    force_components: FloatArray
    couple_components: FloatArray
    half_frames: FloatArray


def orthonormality_drift(frames: FloatArray) -> float:
    gram = frames @ np.swapaxes(frames, -1, -2)
    return float(np.max(np.abs(gram - np.eye(3)))) if frames.size else 0.0


def orthonormalize(frames: FloatArray) -> FloatArray:
    """Modified Gram-Schmidt in the order D3, D1, then ``D2 = D3 x D1``."""
    d3 = frames[..., 2, :]
    d3 = d3 / np.linalg.norm(d3, axis=-1, keepdims=True)
    d1 = frames[..., 0, :]
    d1 = d1 - np.einsum("...i,...i->...", d1, d3)[..., None] * d3
    d1 = d1 / np.linalg.norm(d1, axis=-1, keepdims=True)
    d2 = np.cross(d3, d1)
    return np.stack([d1, d2, d3], axis=-2)


def _dot(a: FloatArray, b: FloatArray) -> FloatArray:
    return np.einsum("...i,...i->...", a, b)


def rod_internal(state: RodState, turning: Tuple[float, float] = (0.0, 0.0)) -> RodInternal:
    """Constitutive forces and couples on the staggered grid."""
    model = state.model
    h = state.spacing
    D = state.frames
    half = orthonormalize(0.5 * (D[1:] + D[:-1]))
    dD = (D[1:] - D[:-1]) / h
    dX = (state.nodes[1:] - state.nodes[:-1]) / h

    s_half = (np.arange(state.n_nodes - 1) + 0.5) * h
    w1, w2 = turning
    omega = np.stack(
        [
            np.full_like(s_half, w1),
            target_curvature(s_half, state.time, replace(model.curvature, offset=0.0)) + w2,
            np.full_like(s_half, model.twist),
        ],
        axis=-1,
    )
    curvature = np.stack(
        [_dot(dD[:, 1], half[:, 2]), _dot(dD[:, 2], half[:, 0]), _dot(dD[:, 0], half[:, 1])], axis=-1
    )
    couple_components = model.bending * (curvature - omega)
    stretch = np.einsum("ki,kji->kj", dX, half) - np.array([0.0, 0.0, 1.0])
    force_components = model.shear * stretch
    return RodInternal(
        force=np.einsum("kj,kji->ki", force_components, half),
        couple=np.einsum("kj,kji->ki", couple_components, half),
        force_components=force_components,
        couple_components=couple_components,
        half_frames=half,
    )


def _pad(values: FloatArray) -> FloatArray:
    zero = np.zeros((1, 3))
    return np.concatenate([zero, values, zero], axis=0)


def rod_loads(state: RodState, internal: Optional[RodInternal] = None) -> Tuple[FloatArray, FloatArray]:
    """Force and torque densities the fluid exerts on the rod at every node.

    Internal loads vanish beyond the free ends; end densities are doubled
    so trapezoid-weighted totals of force and torque are zero.
    """
    internal = internal or rod_internal(state)
    h = state.spacing
    F = _pad(internal.force)
    T = _pad(internal.couple)
    dX = (state.nodes[1:] - state.nodes[:-1]) / h
    lever = _pad(np.cross(dX, internal.force))
    force = -(F[1:] - F[:-1]) / h
    torque = -(T[1:] - T[:-1]) / h - 0.5 * (lever[1:] + lever[:-1])
    for density in (force, torque):
        density[0] *= 2.0
        density[-1] *= 2.0
    return force, torque


def initial_rod_state(n_nodes: int, model: RodModel, height: float = 0.0) -> RodState:
    """Planar rod in z = height bent to the symmetric target curvature at t = 0.

    ``D2`` is the plane normal, ``D3`` the tangent and ``D1 = D2 x D3``.
    """
    wave = replace(model.curvature, offset=0.0)
    nodes, theta = planar_curve(n_nodes, 1.0, lambda s: target_curvature(s, 0.0, wave), height)
    d3 = np.stack([np.cos(theta), np.sin(theta), np.zeros_like(theta)], axis=-1)
    d2 = np.tile([0.0, 0.0, 1.0], (n_nodes, 1))
    d1 = np.cross(d2, d3)
    return RodState(nodes, np.stack([d1, d2, d3], axis=-2), 0.0, model)


def rod_velocities(
    state: RodState, eps: float, mu: float = 1.0, turning: Tuple[float, float] = (0.0, 0.0), *, workers: int = 1
) -> Tuple[FloatArray, FloatArray]:
    """Linear and angular node velocities; the fluid is driven by minus the rod loads."""
    force, torque = rod_loads(state, rod_internal(state, turning))
    u = filament_velocity(state.nodes, -force, state.nodes, eps, mu, torque_density=-torque, workers=workers)
    omega = filament_rotation(state.nodes, -force, -torque, state.nodes, eps, mu, workers=workers)
    return u, omega


def _advance(state: RodState, u: FloatArray, omega: FloatArray, dt: float, time: float) -> RodState:
    rotation = Rotation.from_rotvec(omega * dt).as_matrix()
    frames = state.frames @ np.swapaxes(rotation, -1, -2)
    drift = orthonormality_drift(frames)
    if drift > FRAME_DRIFT_LIMIT:
        logger.error("Frame drift %.3e at t = %.6g.", drift, time)
        raise FrameDegeneracyError(f"frame orthonormality drift {drift:.3e} exceeds {FRAME_DRIFT_LIMIT:.0e}")
    return replace(state, nodes=state.nodes + dt * u, frames=orthonormalize(frames), time=time)


def step_rod(
    state: RodState,
    dt: float,
    eps: float,
    mu: float = 1.0,
    turning: Optional[TurningProcess] = None,
    *,
    method: str = "euler",
    speed_limit: float = DEFAULT_SPEED_LIMIT,
    workers: int = 1,
) -> RodState:
    """Advance nodes and frames by one step of forward Euler or Heun's method."""
    if not dt > 0.0:
        raise ValueError(f"time step must be positive, got {dt!r}")
    turning = turning or TurningProcess(amplitude=0.0)
    u1, w1 = rod_velocities(state, eps, mu, turning.values(state.time), workers=workers)
    check_speed(u1, state.time, speed_limit)
    if method == "euler":
        return _advance(state, u1, w1, dt, state.time + dt)
    if method != "rk2":
        raise ValueError(f"Unknown integrator '{method}'. Expected 'euler' or 'rk2'.")
    trial = _advance(state, u1, w1, dt, state.time + dt)
    u2, w2 = rod_velocities(trial, eps, mu, turning.values(trial.time), workers=workers)
    check_speed(u2, trial.time, speed_limit)
    return _advance(state, 0.5 * (u1 + u2), 0.5 * (w1 + w2), dt, state.time + dt)
