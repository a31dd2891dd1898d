"""Mobility matrices for piecewise-linear filaments and the point-force baseline.

Nodal force densities ``f_k`` are linearly interpolated along each
segment, so ``8 pi mu u(xhat) = sum_k M1_k f_k + M2_k f_{k+1}`` with
``M2 = L K_b`` and ``M1 = L (K_a - K_b)``, where ``K_a`` and ``K_b`` are the
zeroth and first alpha-moments of the regularized Stokeslet tensor.
"""
from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg as la
from numpy.typing import ArrayLike
from scipy.optimize import least_squares

from .errors import IllConditionedSystemError
from .integrals import STOKESLET_SET, build_table
from .kernels import EIGHT_PI, point_stokeslet, validate_parameters
from .model import FilamentMesh, FloatArray, SegmentLoad, as_vectors
from .segments import (
    curl_segment,
    dipole_segment,
    rotlet_segment,
    stokeslet_segment,
    wall_stokeslet_segment,
)

logger = logging.getLogger(__name__)

CHUNK_SIZE = 128
CONDITION_WARNING = 1e10
CONDITION_LIMIT = 1e14
RESIDUAL_TOLERANCE = 1e-10
DEFAULT_CHECK_POINTS = 1505

_IDENTITY = np.eye(3)


def _evaluate_in_chunks(
    evaluate: Callable[[FloatArray], FloatArray], points: FloatArray, workers: int = 1
) -> FloatArray:
    """Apply ``evaluate`` to row blocks of ``points``; results keep the input order."""
    if points.shape[0] <= CHUNK_SIZE:
        return evaluate(points)
    chunks = [points[i : i + CHUNK_SIZE] for i in range(0, points.shape[0], CHUNK_SIZE)]
    if workers <= 1:
        parts = [evaluate(chunk) for chunk in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(evaluate, chunks))
    return np.concatenate(parts, axis=0)


@dataclass(frozen=True, eq=False)
class MobilityMatrix:
    """Dense map with ``8 pi mu u = matrix @ f`` for stacked nodal force densities."""

    matrix: FloatArray
    mu: float = 1.0

    @property
    def n_eval(self) -> int:
        return self.matrix.shape[0] // 3

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[1] // 3

    def apply(self, force_density: ArrayLike) -> FloatArray:
        """Velocities (n_eval x 3) produced by nodal force densities (n_nodes x 3)."""
        f = np.asarray(force_density, dtype=np.float64).reshape(-1)
        return (self.matrix @ f).reshape(-1, 3) / (EIGHT_PI * self.mu)


def _outer(a: FloatArray, b: FloatArray) -> FloatArray:
    return a[..., :, None] * b[..., None, :]


def _segment_blocks(points: FloatArray, mesh: FilamentMesh, eps: float) -> FloatArray:
    """(P, N, 3, 3) blocks of ``8 pi mu`` times the mobility for one row chunk."""
    segs = mesh.segments
    table = build_table(points[:, None, :], segs, eps, STOKESLET_SET)
    geom = table.geometry
    x0, v = geom.x0, geom.v
    x0x0 = _outer(x0, x0)
    mixed = _outer(x0, v) + _outer(v, x0)
    vv = _outer(v, v)
    e2 = eps * eps

    def moment(n: int) -> FloatArray:
        iso = table[(n, -1)] + e2 * table[(n, -3)]
        return (
            iso[..., None, None] * _IDENTITY
            + table[(n, -3)][..., None, None] * x0x0
            + table[(n + 1, -3)][..., None, None] * mixed
            + table[(n + 2, -3)][..., None, None] * vv
        )

    L = geom.L[..., None, None]
    Ka = moment(0)
    Kb = moment(1)
    blocks = np.zeros((points.shape[0], mesh.n_nodes, 3, 3))
    blocks[:, :-1] += L * (Ka - Kb)
    blocks[:, 1:] += L * Kb
    return blocks


def _stack_blocks(blocks: FloatArray) -> FloatArray:
    P, N = blocks.shape[:2]
    return blocks.transpose(0, 2, 1, 3).reshape(3 * P, 3 * N)


def assemble(
    mesh: FilamentMesh, eval_points: ArrayLike, eps: float, mu: float = 1.0, *, workers: int = 1
) -> MobilityMatrix:
    """Mobility of ``mesh`` evaluated at ``eval_points`` (P x 3)."""
    validate_parameters(eps, mu)
    points = as_vectors(eval_points, "eval_points").reshape(-1, 3)
    blocks = _evaluate_in_chunks(lambda chunk: _segment_blocks(chunk, mesh, eps), points, workers)
    return MobilityMatrix(_stack_blocks(blocks), mu)


def _point_blocks(targets: FloatArray, sources: FloatArray, eps: float) -> FloatArray:
    """(P, N, 3, 3) blocks of ``8 pi mu`` times the regularized Stokeslet tensor."""
    x = targets[:, None, :] - sources[None, :, :]
    R2 = np.einsum("...i,...i->...", x, x) + eps * eps
    R = np.sqrt(R2)
    R3 = R2 * R
    iso = 1.0 / R + eps * eps / R3
    return iso[..., None, None] * _IDENTITY + _outer(x, x) / R3[..., None, None]


@dataclass(frozen=True)
class ForceSolution:
    """Nodal force densities from a velocity-constraint solve."""

    forces: FloatArray
    condition: float
    residual: float


def _solve_dense(
    matrix: FloatArray, rhs: FloatArray, condition_warning: float = CONDITION_WARNING
) -> tuple[FloatArray, float, float]:
    anorm = np.linalg.norm(matrix, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", la.LinAlgWarning)
        lu, piv = la.lu_factor(matrix, check_finite=True)
    rcond, info = la.lapack.dgecon(lu, anorm, norm="1")
    condition = np.inf if rcond <= 0.0 or info != 0 else 1.0 / rcond
    if condition > CONDITION_LIMIT:
        raise IllConditionedSystemError("mobility system is numerically singular", condition=condition)
    if condition > condition_warning:
        logger.warning("Mobility system is poorly conditioned (condition estimate %.3e).", condition)
    solution = la.lu_solve((lu, piv), rhs, check_finite=False)
    scale = np.linalg.norm(rhs)
    residual = float(np.linalg.norm(matrix @ solution - rhs) / scale) if scale > 0.0 else 0.0
    if residual > RESIDUAL_TOLERANCE:
        raise IllConditionedSystemError(
            f"mobility solve residual {residual:.3e} exceeds {RESIDUAL_TOLERANCE:.0e}", condition=condition
        )
    logger.debug("Solved %d unknowns; condition %.3e, residual %.3e.", rhs.size, condition, residual)
    return solution, float(condition), residual


def _prescribed(velocity: ArrayLike, n_nodes: int) -> FloatArray:
    return np.broadcast_to(as_vectors(velocity, "velocity"), (n_nodes, 3)).astype(np.float64)


def solve_forces(
    mesh: FilamentMesh,
    velocity: ArrayLike,
    eps: float,
    mu: float = 1.0,
    *,
    condition_warning: float = CONDITION_WARNING,
    workers: int = 1,
) -> ForceSolution:
    """Force densities at the nodes that make every node move with ``velocity``."""
    target = _prescribed(velocity, mesh.n_nodes)
    mobility = assemble(mesh, mesh.nodes, eps, mu, workers=workers)
    rhs = EIGHT_PI * mu * target.reshape(-1)
    forces, condition, residual = _solve_dense(mobility.matrix, rhs, condition_warning)
    return ForceSolution(forces.reshape(-1, 3), condition, residual)


def mrs_baseline_velocity(
    sources: ArrayLike,
    point_forces: ArrayLike,
    eval_points: ArrayLike,
    eps: float,
    mu: float = 1.0,
    *,
    workers: int = 1,
) -> FloatArray:
    """Superposition of regularized Stokeslets with point forces at ``sources``."""
    validate_parameters(eps, mu)
    sources = as_vectors(sources, "sources").reshape(-1, 3)
    forces = as_vectors(point_forces, "point_forces").reshape(-1, 3)
    points = as_vectors(eval_points, "eval_points").reshape(-1, 3)

    def evaluate(chunk: FloatArray) -> FloatArray:
        return point_stokeslet(chunk[:, None, :], sources[None], forces[None], eps, mu).sum(axis=1)

    return _evaluate_in_chunks(evaluate, points, workers)


def mrs_solve_forces(
    mesh: FilamentMesh,
    velocity: ArrayLike,
    eps: float,
    mu: float = 1.0,
    *,
    condition_warning: float = CONDITION_WARNING,
) -> ForceSolution:
    """Point-force baseline: solve for point forces, report them as trapezoid densities."""
    validate_parameters(eps, mu)
    target = _prescribed(velocity, mesh.n_nodes)
    matrix = _stack_blocks(_point_blocks(mesh.nodes, mesh.nodes, eps))
    rhs = EIGHT_PI * mu * target.reshape(-1)
    point_forces, condition, residual = _solve_dense(matrix, rhs, condition_warning)
    densities = point_forces.reshape(-1, 3) / mesh.trapezoid_weights()[:, None]
    return ForceSolution(densities, condition, residual)


def check_points(mesh: FilamentMesh, n_points: int = DEFAULT_CHECK_POINTS) -> FloatArray:
    """``n_points`` positions evenly spaced in arclength along the filament."""
    if n_points < 2:
        raise ValueError("at least two check points are needed")
    arclength = np.concatenate([[0.0], np.cumsum(mesh.lengths)])
    s = np.linspace(0.0, arclength[-1], n_points)
    return np.stack([np.interp(s, arclength, mesh.nodes[:, i]) for i in range(3)], axis=-1)


def filament_velocity(
    nodes: ArrayLike,
    force_density: ArrayLike,
    points: ArrayLike,
    eps: float,
    mu: float = 1.0,
    *,
    torque_density: Optional[ArrayLike] = None,
    wall: bool = False,
    workers: int = 1,
) -> FloatArray:
    """Velocity at ``points`` induced by a filament carrying nodal force (and torque) densities.

    With ``wall=True`` each force segment is paired with its plane-wall
    image; torque densities are only supported in free space.
    """
    mesh = FilamentMesh(nodes)
    segs = mesh.segments
    force = as_vectors(force_density, "force_density")
    forces = SegmentLoad.from_endpoints("force", force[:-1], force[1:])
    torques = None
    if torque_density is not None:
        if wall:
            raise ValueError("torque densities are not supported with the wall image system")
        torque = as_vectors(torque_density, "torque_density")
        torques = SegmentLoad.from_endpoints("torque", torque[:-1], torque[1:])
    kernel = wall_stokeslet_segment if wall else stokeslet_segment

    def evaluate(chunk: FloatArray) -> FloatArray:
        u = kernel(chunk[:, None, :], segs, forces, eps, mu).sum(axis=1)
        if torques is not None:
            u = u + rotlet_segment(chunk[:, None, :], segs, torques, eps, mu).sum(axis=1)
        return u

    return _evaluate_in_chunks(evaluate, as_vectors(points, "points").reshape(-1, 3), workers)


def filament_rotation(
    nodes: ArrayLike,
    force_density: ArrayLike,
    torque_density: ArrayLike,
    points: ArrayLike,
    eps: float,
    mu: float = 1.0,
    *,
    workers: int = 1,
) -> FloatArray:
    """Angular velocity ``0.5 curl u`` at ``points``; torques enter through Kirchhoff dipoles."""
    mesh = FilamentMesh(nodes)
    segs = mesh.segments
    force = as_vectors(force_density, "force_density")
    torque = as_vectors(torque_density, "torque_density")
    forces = SegmentLoad.from_endpoints("force", force[:-1], force[1:])
    torques = SegmentLoad.from_endpoints("torque", torque[:-1], torque[1:])

    def evaluate(chunk: FloatArray) -> FloatArray:
        xhat = chunk[:, None, :]
        curl = curl_segment(xhat, segs, forces, eps, mu) + dipole_segment(
            xhat, segs, torques, eps, mu, variant="kirchhoff"
        )
        return 0.5 * curl.sum(axis=1)

    return _evaluate_in_chunks(evaluate, as_vectors(points, "points").reshape(-1, 3), workers)


def velocity_errors(
    mesh: FilamentMesh,
    forces: ArrayLike,
    velocity: ArrayLike,
    eps: float,
    mu: float = 1.0,
    n_points: int = DEFAULT_CHECK_POINTS,
    *,
    method: str = "segments",
    workers: int = 1,
) -> FloatArray:
    """``|u - velocity|`` at :func:`check_points`, ordered from the first node to the last."""
    points = check_points(mesh, n_points)
    forces = as_vectors(forces, "forces")
    if method == "segments":
        u = filament_velocity(mesh.nodes, forces, points, eps, mu, workers=workers)
    elif method == "mrs":
        point_forces = forces * mesh.trapezoid_weights()[:, None]
        u = mrs_baseline_velocity(mesh.nodes, point_forces, points, eps, mu, workers=workers)
    else:
        raise ValueError(f"Unknown method '{method}'. Expected 'segments' or 'mrs'.")
    return np.linalg.norm(u - as_vectors(velocity, "velocity"), axis=-1)


def leak(
    mesh: FilamentMesh,
    forces: ArrayLike,
    velocity: ArrayLike,
    eps: float,
    mu: float = 1.0,
    n_points: int = DEFAULT_CHECK_POINTS,
    *,
    method: str = "segments",
    workers: int = 1,
) -> float:
    """RMS deviation from ``velocity`` over evenly spaced points on the filament."""
    errors = velocity_errors(mesh, forces, velocity, eps, mu, n_points, method=method, workers=workers)
    return float(np.sqrt(np.mean(errors ** 2)))


def drag(mesh: FilamentMesh, forces: ArrayLike) -> FloatArray:
    """Net force ``sum_k (L_k/2)(f_k + f_{k+1})`` exerted by the filament on the fluid."""
    return mesh.trapezoid_weights() @ as_vectors(forces, "forces")


def slender_body_drag(length: float, effective_radius: ArrayLike, mu: float = 1.0, speed: float = 1.0):
    """Transverse drag ``8 pi mu l U / (2 log(l / r_e) + 1)`` on a slender filament."""
    r_e = np.asarray(effective_radius, dtype=np.float64)
    return EIGHT_PI * mu * length * speed / (2.0 * np.log(length / r_e) + 1.0)


def fit_effective_radius(
    eps: ArrayLike, drag_values: ArrayLike, length: float = 1.0, mu: float = 1.0, speed: float = 1.0
) -> float:
    """Least-squares ratio ``c`` such that ``r_e = c eps`` best reproduces ``drag_values``."""
    eps = np.asarray(eps, dtype=np.float64)
    drag_values = np.asarray(drag_values, dtype=np.float64)
    if eps.shape != drag_values.shape or eps.size == 0:
        raise ValueError("eps and drag values must be non-empty and of equal length")

    def residuals(params: FloatArray) -> FloatArray:
        return slender_body_drag(length, params[0] * eps, mu, speed) - drag_values

    result = least_squares(residuals, x0=[1.0], bounds=([1e-6], [np.inf]))
    return float(result.x[0])
