"""Planar elastic flagellum driven by a travelling-wave target curvature."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike
from scipy.integrate import cumulative_trapezoid

from .errors import BlowUpError, CurvatureDomainError
from .mobility import filament_velocity
from .model import FloatArray, as_vectors

logger = logging.getLogger(__name__)

# Fine-grid refinement per link when integrating the initial shape.
_SHAPE_REFINEMENT = 64
DEFAULT_SPEED_LIMIT = 1e3


@dataclass(frozen=True)
class TargetCurvature:
    """Travelling-wave curvature ``A k^2 sin(ks - sigma t) / sqrt(1 - A^2 k^2 cos^2(ks - sigma t)) + offset``."""

    amplitude: float = 0.075
    wavenumber: float = 9.0 * np.pi / 4.0
    frequency: float = 2.0 * np.pi
    offset: float = 0.0

    def __post_init__(self) -> None:
        ak = self.amplitude * self.wavenumber
        if ak * ak >= 1.0:
            raise CurvatureDomainError(
                f"A^2 k^2 = {ak * ak:.6g} must stay below 1 for the target curvature to be real"
            )

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.frequency

    def turning_offset(self, fraction: float = 0.4) -> float:
        """``fraction * A k^2``, the asymmetry offset that makes the swimmer circle."""
        return fraction * self.amplitude * self.wavenumber ** 2

    def __call__(self, s: ArrayLike, t: float) -> FloatArray:
        return target_curvature(s, t, self)


def target_curvature(s: ArrayLike, t: float, params: TargetCurvature) -> FloatArray:
    A, k = params.amplitude, params.wavenumber
    phase = k * np.asarray(s, dtype=np.float64) - params.frequency * t
    wave = A * k * k * np.sin(phase) / np.sqrt(1.0 - (A * k * np.cos(phase)) ** 2)
    return wave + params.offset


@dataclass(frozen=True)
class PlanarParams:
    """Stiffnesses and waveform of the planar model (dimensionless)."""

    curvature: TargetCurvature = field(default_factory=TargetCurvature)
    length: float = 1.0
    tension_stiffness: float = 2.950
    bending_stiffness: float = 0.0221


@dataclass(frozen=True, eq=False)
class PlanarFlagellumState:
    nodes: FloatArray
    time: float
    params: PlanarParams

    def __post_init__(self) -> None:
        nodes = as_vectors(self.nodes, "nodes")
        if nodes.ndim != 2 or nodes.shape[0] < 3:
            raise ValueError("a planar flagellum needs at least three nodes")
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def spacing(self) -> float:
        return self.params.length / (self.n_nodes - 1)

    def link_strain(self) -> FloatArray:
        """``|D+ x_j| - 1`` for every link."""
        return np.linalg.norm(np.diff(self.nodes, axis=0), axis=1) / self.spacing - 1.0

    def with_nodes(self, nodes: FloatArray, time: float) -> "PlanarFlagellumState":
        return replace(self, nodes=nodes, time=time)


def _cross2(p: FloatArray, q: FloatArray) -> FloatArray:
    return p[..., 0] * q[..., 1] - p[..., 1] * q[..., 0]


def _bending_terms(state: PlanarFlagellumState) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Centered first and second differences and the curvature residual at interior nodes."""
    x = state.nodes[:, :2]
    h = state.spacing
    d0 = (x[2:] - x[:-2]) / (2.0 * h)
    d2 = (x[2:] - 2.0 * x[1:-1] + x[:-2]) / (h * h)
    s = np.arange(1, state.n_nodes - 1) * h
    residual = _cross2(d0, d2) - target_curvature(s, state.time, state.params.curvature)
    return d0, d2, residual


def elastic_energy(state: PlanarFlagellumState) -> float:
    """Discrete tension plus bending energy."""
    h = state.spacing
    params = state.params
    stretch = state.link_strain()
    _, _, residual = _bending_terms(state)
    tension = 0.5 * params.tension_stiffness * np.sum(stretch ** 2) * h
    bending = 0.5 * params.bending_stiffness * np.sum(residual ** 2) * h
    return float(tension + bending)


def penalty_forces(state: PlanarFlagellumState) -> FloatArray:
    """Force densities ``-dE/dx_k / h``, doubled at both ends."""
    h = state.spacing
    params = state.params
    grad = np.zeros_like(state.nodes)

    links = np.diff(state.nodes, axis=0)
    lengths = np.linalg.norm(links, axis=1)
    pull = (params.tension_stiffness * (lengths / h - 1.0) / lengths)[:, None] * links
    grad[1:] += pull
    grad[:-1] -= pull

    d0, d2, residual = _bending_terms(state)
    weight = (params.bending_stiffness * h * residual)[:, None]
    d_dd0 = np.stack([d2[:, 1], -d2[:, 0]], axis=-1) * weight
    d_dd2 = np.stack([-d0[:, 1], d0[:, 0]], axis=-1) * weight
    grad[2:, :2] += d_dd0 / (2.0 * h) + d_dd2 / (h * h)
    grad[1:-1, :2] -= 2.0 * d_dd2 / (h * h)
    grad[:-2, :2] += -d_dd0 / (2.0 * h) + d_dd2 / (h * h)

    density = -grad / h
    density[0] *= 2.0
    density[-1] *= 2.0
    return density


def planar_curve(
    n_nodes: int, length: float, curvature: Callable[[FloatArray], FloatArray], height: float = 0.0
) -> tuple[FloatArray, FloatArray]:
    """Nodes and tangent angles of an arclength-parametrised curve in the plane z = height."""
    s_fine = np.linspace(0.0, length, (n_nodes - 1) * _SHAPE_REFINEMENT + 1)
    theta = cumulative_trapezoid(curvature(s_fine), s_fine, initial=0.0)
    x = cumulative_trapezoid(np.cos(theta), s_fine, initial=0.0)
    y = cumulative_trapezoid(np.sin(theta), s_fine, initial=0.0)
    pick = slice(None, None, _SHAPE_REFINEMENT)
    nodes = np.stack([x[pick], y[pick], np.full(n_nodes, height)], axis=-1)
    return nodes, theta[pick]


def initial_planar_shape(n_nodes: int, params: PlanarParams, height: float = 0.0) -> PlanarFlagellumState:
    """Flagellum at t = 0 bent to the symmetric (offset-free) target curvature."""
    wave = replace(params.curvature, offset=0.0)
    nodes, _ = planar_curve(n_nodes, params.length, lambda s: target_curvature(s, 0.0, wave), height)
    return PlanarFlagellumState(nodes, 0.0, params)


def check_speed(velocity: FloatArray, time: float, speed_limit: float) -> None:
    speed = float(np.max(np.linalg.norm(velocity, axis=-1))) if velocity.size else 0.0
    if not np.isfinite(speed) or speed > speed_limit:
        logger.error("Node speed %.3e exceeds limit %.3e at t = %.6g.", speed, speed_limit, time)
        raise BlowUpError(
            f"node speed {speed:.3e} exceeds the limit {speed_limit:.3e} at t = {time:.6g}",
            time=time,
            max_speed=speed,
        )


def planar_velocity(
    state: PlanarFlagellumState, eps: float, mu: float = 1.0, *, wall: bool = False, workers: int = 1
) -> FloatArray:
    """Node velocities produced by the current penalty forces."""
    forces = penalty_forces(state)
    return filament_velocity(state.nodes, forces, state.nodes, eps, mu, wall=wall, workers=workers)


def step_planar(
    state: PlanarFlagellumState,
    dt: float,
    eps: float,
    mu: float = 1.0,
    *,
    method: str = "euler",
    wall: bool = False,
    speed_limit: float = DEFAULT_SPEED_LIMIT,
    workers: int = 1,
) -> PlanarFlagellumState:
    """Advance the flagellum by one step of forward Euler or Heun's method."""
    if not dt > 0.0:
        raise ValueError(f"time step must be positive, got {dt!r}")
    k1 = planar_velocity(state, eps, mu, wall=wall, workers=workers)
    check_speed(k1, state.time, speed_limit)
    if method == "euler":
        return state.with_nodes(state.nodes + dt * k1, state.time + dt)
    if method != "rk2":
        raise ValueError(f"Unknown integrator '{method}'. Expected 'euler' or 'rk2'.")
    trial = state.with_nodes(state.nodes + dt * k1, state.time + dt)
    k2 = planar_velocity(trial, eps, mu, wall=wall, workers=workers)
    check_speed(k2, trial.time, speed_limit)
    return state.with_nodes(state.nodes + 0.5 * dt * (k1 + k2), state.time + dt)
