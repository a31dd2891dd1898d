from __future__ import annotations

import numpy as np
import pytest

from stokeslet_segments.errors import WallViolationError
from stokeslet_segments.kernels import (
    point_dipole,
    point_image_system,
    point_pressure,
    point_rotlet,
    point_stokeslet,
    singular_stokeslet,
    validate_parameters,
)

STEP = 1e-5


def jacobian(field, x: np.ndarray, step: float = STEP) -> np.ndarray:
    """J[i, j] = d field_i / d x_j by central differences."""
    columns = []
    for j in range(3):
        dx = np.zeros(3)
        dx[j] = step
        columns.append((field(x + dx) - field(x - dx)) / (2.0 * step))
    return np.stack(columns, axis=-1)


def curl(field, x: np.ndarray) -> np.ndarray:
    J = jacobian(field, x)
    return np.array([J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]])


def laplacian(field, x: np.ndarray, step: float = 1e-3) -> np.ndarray:
    total = -6.0 * field(x)
    for j in range(3):
        dx = np.zeros(3)
        dx[j] = step
        total = total + field(x + dx) + field(x - dx)
    return total / step ** 2


def test_stokeslet_matches_singular_far_away() -> None:
    y0 = np.array([0.1, -0.2, 0.3])
    xhat = np.array([1.7, 0.4, -0.9])
    f = np.array([0.3, -1.2, 0.8])
    regular = point_stokeslet(xhat, y0, f, eps=1e-7, mu=2.0)
    singular = singular_stokeslet(xhat, y0, f, mu=2.0)
    np.testing.assert_allclose(regular, singular, rtol=1e-10)


def test_stokeslet_is_divergence_free() -> None:
    y0 = np.zeros(3)
    f = np.array([1.0, 0.5, -0.25])
    J = jacobian(lambda x: point_stokeslet(x, y0, f, eps=0.3), np.array([0.2, -0.4, 0.1]))
    assert abs(np.trace(J)) < 1e-8


def test_stokeslet_and_pressure_solve_forced_stokes() -> None:
    eps, mu = 0.5, 1.3
    y0 = np.zeros(3)
    f = np.array([0.7, -0.2, 0.4])
    x = np.array([0.4, 0.3, -0.5])
    grad_p = jacobian(lambda z: np.atleast_1d(point_pressure(z, y0, f, eps)), x)[0]
    lap_u = laplacian(lambda z: point_stokeslet(z, y0, f, eps, mu), x)
    R = np.sqrt(x @ x + eps ** 2)
    blob = 15.0 * eps ** 4 / (8.0 * np.pi * R ** 7)
    np.testing.assert_allclose(grad_p - mu * lap_u, blob * f, rtol=1e-5, atol=1e-9)


def test_curl_of_stokeslet_is_rotlet() -> None:
    eps = 0.2
    y0 = np.array([0.0, 0.1, 0.0])
    f = np.array([0.3, 1.0, -0.6])
    x = np.array([0.5, -0.3, 0.2])
    numeric = curl(lambda z: point_stokeslet(z, y0, f, eps), x)
    np.testing.assert_allclose(numeric, point_rotlet(x, y0, f, eps), rtol=1e-7, atol=1e-10)


def test_curl_of_rotlet_is_kirchhoff_dipole() -> None:
    eps = 0.2
    y0 = np.zeros(3)
    tau = np.array([-0.4, 0.9, 0.3])
    x = np.array([0.3, 0.25, -0.45])
    numeric = curl(lambda z: point_rotlet(z, y0, tau, eps), x)
    expected = point_dipole(x, y0, tau, eps, variant="kirchhoff")
    np.testing.assert_allclose(numeric, expected, rtol=1e-6, atol=1e-9)


def test_dipoles_agree_far_from_the_blob() -> None:
    y0 = np.zeros(3)
    g = np.array([0.2, -0.5, 1.0])
    x = np.array([3.0, -2.0, 4.0])
    standard = point_dipole(x, y0, g, eps=1e-4)
    kirchhoff = point_dipole(x, y0, g, eps=1e-4, variant="kirchhoff")
    np.testing.assert_allclose(standard, kirchhoff, rtol=1e-7)


def test_unknown_dipole_variant_is_rejected() -> None:
    with pytest.raises(ValueError, match="Unknown dipole variant"):
        point_dipole(np.ones(3), np.zeros(3), np.ones(3), 0.1, variant="odd")  # type: ignore[arg-type]


def test_rotlet_pressure_vanishes_and_singular_pressure_is_allowed() -> None:
    x = np.array([0.5, 0.2, -0.1])
    f = np.array([1.0, 0.0, 0.0])
    assert point_pressure(x, np.zeros(3), f, 0.1, kind="rotlet") == 0.0
    singular = point_pressure(x, np.zeros(3), f, 0.0)
    r = np.linalg.norm(x)
    assert singular == pytest.approx(2.0 * (f @ x) / (8.0 * np.pi * r ** 3))


def test_kernels_broadcast_over_point_and_source_axes(rng) -> None:
    points = rng.normal(size=(5, 1, 3))
    sources = rng.normal(size=(1, 4, 3))
    forces = rng.normal(size=(1, 4, 3))
    batched = point_stokeslet(points, sources, forces, 0.1)
    assert batched.shape == (5, 4, 3)
    np.testing.assert_allclose(batched[2, 3], point_stokeslet(points[2, 0], sources[0, 3], forces[0, 3], 0.1))


def test_image_system_cancels_on_the_wall(rng) -> None:
    eps = 0.05
    ystar = np.array([0.2, -0.1, 0.3])
    f = np.array([0.4, -0.7, 0.9])
    wall = np.concatenate([rng.uniform(-1.0, 1.0, size=(50, 2)), np.zeros((50, 1))], axis=1)
    free = point_stokeslet(wall, ystar, f, eps)
    total = free + point_image_system(wall, ystar, f, eps)
    assert np.max(np.abs(total)) < 1e-12 * np.max(np.abs(free))


def test_image_system_requires_source_above_wall() -> None:
    with pytest.raises(WallViolationError):
        point_image_system(np.ones(3), np.array([0.0, 0.0, 0.0]), np.ones(3), 0.1)


@pytest.mark.parametrize("eps, mu", [(0.0, 1.0), (-0.1, 1.0), (0.1, 0.0), (float("nan"), 1.0)])
def test_validate_parameters_rejects_non_positive(eps: float, mu: float) -> None:
    with pytest.raises(ValueError):
        validate_parameters(eps, mu)


VELOCITY_KERNELS = [
    point_stokeslet,
    point_rotlet,
    point_dipole,
    lambda x, y, w, eps: point_dipole(x, y, w, eps, variant="kirchhoff"),
]


@pytest.mark.parametrize("kernel", VELOCITY_KERNELS + [point_pressure])
def test_kernels_are_linear_in_the_strength(rng, kernel) -> None:
    x, y0 = rng.normal(size=(2, 3))
    f, g = rng.normal(size=(2, 3))
    a, b = rng.normal(size=2)
    combined = np.atleast_1d(kernel(x, y0, a * f + b * g, 0.1))
    separate = np.atleast_1d(a * kernel(x, y0, f, 0.1) + b * kernel(x, y0, g, 0.1))
    np.testing.assert_allclose(combined, separate, rtol=1e-13, atol=1e-13 * np.max(np.abs(separate)))


@pytest.mark.parametrize("kernel", VELOCITY_KERNELS)
def test_velocity_kernels_are_divergence_free(rng, kernel) -> None:
    y0 = np.zeros(3)
    for _ in range(100):
        x = rng.normal(size=3)
        w = rng.normal(size=3)
        eps = rng.uniform(0.01, 1.0)
        J = jacobian(lambda z: kernel(z, y0, w, eps), x, step=1e-5 * np.linalg.norm(x))
        assert abs(np.trace(J)) < 1e-6 * np.linalg.norm(J)
