"""Regularized point kernels for Stokes flow.

Every kernel is built on the blob ``15 eps^4 / (8 pi R^7)`` with
``R^2 = |x|^2 + eps^2`` and ``x = xhat - y0``. All of them broadcast over
leading array dimensions, so ``xhat`` of shape ``(P, 1, 3)`` against
sources of shape ``(1, S, 3)`` evaluates every pair in one call. The
``1/(8 pi mu)`` factor is applied here, never by callers.
"""
from __future__ import annotations

from typing import Literal

import numpy as np
from numpy.typing import ArrayLike

from .errors import WallViolationError
from .model import FloatArray

EIGHT_PI = 8.0 * np.pi
DipoleVariant = Literal["standard", "kirchhoff"]
PressureKind = Literal["stokeslet", "rotlet", "dipole"]

_WALL_REFLECTION = np.array([-1.0, -1.0, 1.0])


def validate_parameters(eps: float, mu: float = 1.0) -> None:
    if not (np.isfinite(eps) and eps > 0.0):
        raise ValueError(f"regularization eps must be positive, got {eps!r}")
    if not (np.isfinite(mu) and mu > 0.0):
        raise ValueError(f"viscosity mu must be positive, got {mu!r}")


def _dot(a: FloatArray, b: FloatArray) -> FloatArray:
    return np.einsum("...i,...i->...", a, b)


def _separation(xhat: ArrayLike, y0: ArrayLike, eps: float) -> tuple[FloatArray, FloatArray]:
    x = np.asarray(xhat, dtype=np.float64) - np.asarray(y0, dtype=np.float64)
    return x, np.sqrt(_dot(x, x) + eps * eps)


def point_stokeslet(xhat: ArrayLike, y0: ArrayLike, f: ArrayLike, eps: float, mu: float = 1.0) -> FloatArray:
    """Velocity of a regularized point force ``f`` at ``y0``."""
    x, R = _separation(xhat, y0, eps)
    f = np.asarray(f, dtype=np.float64)
    R3 = R ** 3
    isotropic = 1.0 / R + eps * eps / R3
    u = isotropic[..., None] * f + (_dot(f, x) / R3)[..., None] * x
    return u / (EIGHT_PI * mu)


def singular_stokeslet(xhat: ArrayLike, y0: ArrayLike, f: ArrayLike, mu: float = 1.0) -> FloatArray:
    """Unregularized Stokeslet; singular at ``xhat = y0``."""
    x = np.asarray(xhat, dtype=np.float64) - np.asarray(y0, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    r = np.sqrt(_dot(x, x))
    u = (1.0 / r)[..., None] * f + (_dot(f, x) / r ** 3)[..., None] * x
    return u / (EIGHT_PI * mu)


def point_rotlet(xhat: ArrayLike, y0: ArrayLike, tau: ArrayLike, eps: float, mu: float = 1.0) -> FloatArray:
    """Velocity of a regularized point torque; the curl of :func:`point_stokeslet` with ``f = tau``."""
    x, R = _separation(xhat, y0, eps)
    tau = np.asarray(tau, dtype=np.float64)
    R2 = R * R
    scale = (2.0 + 3.0 * eps * eps / R2) / (R2 * R)
    return scale[..., None] * np.cross(tau, x) / (EIGHT_PI * mu)


def point_dipole(
    xhat: ArrayLike,
    y0: ArrayLike,
    g: ArrayLike,
    eps: float,
    mu: float = 1.0,
    variant: DipoleVariant = "standard",
) -> FloatArray:
    """Velocity of a regularized potential dipole of strength ``g``.

    ``standard`` is the dipole derived from the Stokeslet blob;
    ``kirchhoff`` is the regularization used by the elastic rod model,
    which is exactly the curl of :func:`point_rotlet`.
    """
    x, R = _separation(xhat, y0, eps)
    g = np.asarray(g, dtype=np.float64)
    e2 = eps * eps
    R2 = R * R
    R3 = R2 * R
    R5 = R3 * R2
    if variant == "standard":
        iso = -(2.0 / R3 - 6.0 * e2 / R5)
        aniso = 6.0 / R5
    elif variant == "kirchhoff":
        R7 = R5 * R2
        iso = -(2.0 / R3 + 3.0 * e2 / R5 - 15.0 * e2 * e2 / R7)
        aniso = 6.0 / R5 + 15.0 * e2 / R7
    else:
        raise ValueError(f"Unknown dipole variant '{variant}'.")
    u = iso[..., None] * g + (aniso * _dot(g, x))[..., None] * x
    return u / (EIGHT_PI * mu)


def point_pressure(
    xhat: ArrayLike,
    y0: ArrayLike,
    f: ArrayLike,
    eps: float,
    kind: PressureKind = "stokeslet",
) -> FloatArray:
    """Pressure of a regularized Stokeslet, rotlet or potential dipole.

    ``eps = 0`` is accepted and gives the singular pressure.
    """
    x, R = _separation(xhat, y0, eps)
    fx = _dot(np.asarray(f, dtype=np.float64), x)
    e2 = eps * eps
    if kind == "stokeslet":
        return fx * (2.0 * R * R + 3.0 * e2) / (EIGHT_PI * R ** 5)
    if kind == "rotlet":
        return np.zeros_like(fx)
    if kind == "dipole":
        return -fx * 105.0 * e2 * e2 / (EIGHT_PI * R ** 9)
    raise ValueError(f"Unknown pressure kind '{kind}'.")


def point_image_system(
    xhat: ArrayLike,
    ystar: ArrayLike,
    f: ArrayLike,
    eps: float,
    mu: float = 1.0,
) -> FloatArray:
    """Image flow cancelling a regularized Stokeslet at ``ystar`` on the wall z = 0.

    Returns only the image part; adding :func:`point_stokeslet` at
    ``ystar`` gives a field that vanishes on the wall.
    """
    ystar = np.asarray(ystar, dtype=np.float64)
    H = ystar[..., 2]
    if np.any(H <= 0.0):
        raise WallViolationError("image sources must lie strictly above the wall z = 0")
    image = ystar.copy()
    image[..., 2] = -H
    x, R = _separation(xhat, image, eps)
    f = np.asarray(f, dtype=np.float64)
    q = f * _WALL_REFLECTION
    e2 = eps * eps
    R2 = R * R
    R3 = R2 * R
    R5 = R3 * R2
    x3 = x[..., 2]
    fx = _dot(f, x)
    qx = _dot(q, x)
    e3 = np.array([0.0, 0.0, 1.0])

    stokeslet = (1.0 / R + e2 / R3)[..., None] * f + (fx / R3)[..., None] * x
    doublet = (
        (x * q[..., 2:3] + x3[..., None] * q - qx[..., None] * e3) / R3[..., None]
        - (3.0 * qx / R5)[..., None] * (e2 * e3 + x * x3[..., None])
    )
    dipole = -(2.0 / R3 - 6.0 * e2 / R5)[..., None] * q + (6.0 * qx / R5)[..., None] * x
    lateral = f[..., 0] * x[..., 0] + f[..., 1] * x[..., 1]
    rotlets = (3.0 * e2 / R5)[..., None] * np.stack(
        np.broadcast_arrays(x3 * f[..., 0], x3 * f[..., 1], -lateral), axis=-1
    )
    Hc = H[..., None]
    u = -stokeslet + 2.0 * Hc * doublet + Hc * Hc * dipole + 2.0 * Hc * rotlets
    return u / (EIGHT_PI * mu)
