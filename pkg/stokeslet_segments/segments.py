"""Velocity and pressure of straight segments carrying linear densities.

Along a segment every kernel is a sum of polynomial-in-alpha vectors times
powers of R(alpha), so each integral reduces to ``sum_n c_n T_{n,q}``.
Polynomials are plain lists of coefficient arrays (lowest degree first);
scalar coefficients keep a trailing axis of length one so they broadcast
against vectors.
"""
from __future__ import annotations

from typing import List, Sequence

import numpy as np
from numpy.typing import ArrayLike

from .errors import WallViolationError
from .integrals import (
    DIPOLE_SET,
    KIRCHHOFF_SET,
    ROTLET_SET,
    STOKESLET_SET,
    TnqTable,
    build_table,
)
from .kernels import EIGHT_PI, DipoleVariant, validate_parameters
from .model import FloatArray, LoadKind, Segment, SegmentLoad

Poly = List[FloatArray]

_E3 = np.array([0.0, 0.0, 1.0])
_WALL_REFLECTION = np.array([-1.0, -1.0, 1.0])
_MIRROR = np.array([1.0, 1.0, -1.0])

IMAGE_SET = frozenset(
    [(n, -1) for n in range(2)] + [(n, -3) for n in range(4)] + [(n, -5) for n in range(6)]
)
FORCE_PRESSURE_SET = frozenset([(n, -3) for n in range(3)] + [(n, -5) for n in range(3)])
DIPOLE_PRESSURE_SET = frozenset((n, -9) for n in range(3))


def _mul(p: Sequence[FloatArray], q: Sequence[FloatArray]) -> Poly:
    out: Poly = [None] * (len(p) + len(q) - 1)  # type: ignore[list-item]
    for i, pi in enumerate(p):
        for j, qj in enumerate(q):
            term = pi * qj
            out[i + j] = term if out[i + j] is None else out[i + j] + term
    return out


def _dot(p: Sequence[FloatArray], q: Sequence[FloatArray]) -> Poly:
    out: Poly = [None] * (len(p) + len(q) - 1)  # type: ignore[list-item]
    for i, pi in enumerate(p):
        for j, qj in enumerate(q):
            term = np.einsum("...i,...i->...", pi, qj)[..., None]
            out[i + j] = term if out[i + j] is None else out[i + j] + term
    return out


def _cross(p: Sequence[FloatArray], q: Sequence[FloatArray]) -> Poly:
    out: Poly = [None] * (len(p) + len(q) - 1)  # type: ignore[list-item]
    for i, pi in enumerate(p):
        for j, qj in enumerate(q):
            term = np.cross(pi, qj)
            out[i + j] = term if out[i + j] is None else out[i + j] + term
    return out


def _add(p: Sequence[FloatArray], q: Sequence[FloatArray], sign: float = 1.0) -> Poly:
    size = max(len(p), len(q))
    p = list(p) + [0.0] * (size - len(p))
    q = list(q) + [0.0] * (size - len(q))
    return [a + sign * b for a, b in zip(p, q)]


def _scale(p: Sequence[FloatArray], factor) -> Poly:
    return [c * factor for c in p]


def _component(p: Sequence[FloatArray], axis: int) -> Poly:
    return [c[..., axis : axis + 1] for c in p]


def _integrate(p: Sequence[FloatArray], table: TnqTable, q: int) -> FloatArray:
    total = p[0] * table[(0, q)][..., None]
    for n in range(1, len(p)):
        total = total + p[n] * table[(n, q)][..., None]
    return total


def _require_kind(load: SegmentLoad, *kinds: LoadKind) -> None:
    if load.kind not in kinds:
        raise ValueError(f"load of kind '{load.kind}' is not accepted here; expected {kinds}")


def _frame(table: TnqTable) -> tuple[Poly, FloatArray]:
    geom = table.geometry
    return [geom.x0, geom.v], geom.L[..., None]


def stokeslet_segment(
    xhat: ArrayLike, seg: Segment, load: SegmentLoad, eps: float, mu: float = 1.0
) -> FloatArray:
    """Velocity at ``xhat`` of a segment of regularized Stokeslets with density ``a + alpha b``."""
    _require_kind(load, "force")
    validate_parameters(eps, mu)
    table = build_table(xhat, seg, eps, STOKESLET_SET)
    x, L = _frame(table)
    f = [load.a, load.b]
    e2 = eps * eps
    u = (
        _integrate(f, table, -1)
        + e2 * _integrate(f, table, -3)
        + _integrate(_mul(_dot(f, x), x), table, -3)
    )
    return u * L / (EIGHT_PI * mu)


def dipole_segment(
    xhat: ArrayLike,
    seg: Segment,
    load: SegmentLoad,
    eps: float,
    mu: float = 1.0,
    variant: DipoleVariant = "standard",
) -> FloatArray:
    """Velocity of a segment of potential dipoles; ``variant`` picks the blob regularization."""
    _require_kind(load, "dipole", "torque")
    validate_parameters(eps, mu)
    if variant not in ("standard", "kirchhoff"):
        raise ValueError(f"Unknown dipole variant '{variant}'.")
    need = DIPOLE_SET if variant == "standard" else KIRCHHOFF_SET
    table = build_table(xhat, seg, eps, need)
    x, L = _frame(table)
    g = [load.a, load.b]
    gxx = _mul(_dot(g, x), x)
    e2 = eps * eps
    if variant == "standard":
        u = (
            -2.0 * _integrate(g, table, -3)
            + 6.0 * e2 * _integrate(g, table, -5)
            + 6.0 * _integrate(gxx, table, -5)
        )
    else:
        u = (
            -2.0 * _integrate(g, table, -3)
            - 3.0 * e2 * _integrate(g, table, -5)
            + 15.0 * e2 * e2 * _integrate(g, table, -7)
            + 6.0 * _integrate(gxx, table, -5)
            + 15.0 * e2 * _integrate(gxx, table, -7)
        )
    return u * L / (EIGHT_PI * mu)


def rotlet_segment(
    xhat: ArrayLike, seg: Segment, load: SegmentLoad, eps: float, mu: float = 1.0
) -> FloatArray:
    """Velocity of a segment of regularized rotlets (torque density ``a + alpha b``)."""
    _require_kind(load, "torque", "force")
    validate_parameters(eps, mu)
    table = build_table(xhat, seg, eps, ROTLET_SET)
    x, L = _frame(table)
    tau_x = _cross([load.a, load.b], x)
    u = 2.0 * _integrate(tau_x, table, -3) + 3.0 * eps * eps * _integrate(tau_x, table, -5)
    return u * L / (EIGHT_PI * mu)


def curl_segment(
    xhat: ArrayLike, seg: Segment, load: SegmentLoad, eps: float, mu: float = 1.0
) -> FloatArray:
    """Curl of the velocity of a force or torque segment.

    The curl of the regularized Stokeslet is the rotlet with the same
    strength, and the curl of the rotlet is the Kirchhoff dipole.
    """
    _require_kind(load, "force", "torque")
    if load.kind == "force":
        return rotlet_segment(xhat, seg, load, eps, mu)
    return dipole_segment(xhat, seg, load, eps, mu, variant="kirchhoff")


def _check_above_wall(seg: Segment) -> None:
    if np.any(seg.y0[..., 2] <= 0.0) or np.any(seg.y1[..., 2] <= 0.0):
        raise WallViolationError("segment endpoints must lie strictly above the wall z = 0")


def image_system_segment(
    xhat: ArrayLike, seg: Segment, load: SegmentLoad, eps: float, mu: float = 1.0
) -> FloatArray:
    """Image contribution of a force segment above the plane wall z = 0.

    The image segment is the mirror of ``seg``; heights ``H(alpha)`` are
    those of the original segment and the image forcing is
    ``(-f1, -f2, f3)``.
    """
    _require_kind(load, "force")
    validate_parameters(eps, mu)
    _check_above_wall(seg)
    image = Segment(seg.y0 * _MIRROR, seg.y1 * _MIRROR)
    table = build_table(xhat, image, eps, IMAGE_SET)
    x, L = _frame(table)
    e2 = eps * eps
    f = [load.a, load.b]
    q = _scale(f, _WALL_REFLECTION)
    H = [seg.y0[..., 2:3], -seg.v[..., 2:3]]
    x3 = _component(x, 2)
    xq = _dot(x, q)

    stokeslet = (
        _integrate(f, table, -1)
        + e2 * _integrate(f, table, -3)
        + _integrate(_mul(_dot(f, x), x), table, -3)
    )

    doublet_near = _add(_add(_mul(x, _component(q, 2)), _mul(x3, q)), _mul(xq, [_E3]), sign=-1.0)
    doublet_far = _add(_mul(xq, [e2 * _E3]), _mul(_mul(xq, x), x3))
    doublet = 2.0 * (
        _integrate(_mul(H, doublet_near), table, -3)
        - 3.0 * _integrate(_mul(H, doublet_far), table, -5)
    )

    H2 = _mul(H, H)
    dipole = (
        -2.0 * _integrate(_mul(H2, q), table, -3)
        + 6.0 * e2 * _integrate(_mul(H2, q), table, -5)
        + 6.0 * _integrate(_mul(H2, _mul(xq, x)), table, -5)
    )

    fx_lateral = _mul(_component(f, 0), _component(x, 0))
    fy_lateral = _mul(_component(f, 1), _component(x, 1))
    rot_x = _mul(x3, _component(f, 0))
    rot_y = _mul(x3, _component(f, 1))
    rot_z = _scale(_add(fx_lateral, fy_lateral), -1.0)
    rot = [np.concatenate(np.broadcast_arrays(a, b, c), axis=-1) for a, b, c in zip(rot_x, rot_y, rot_z)]
    rotlets = 6.0 * e2 * _integrate(_mul(H, rot), table, -5)

    u = -stokeslet + doublet + dipole + rotlets
    return u * L / (EIGHT_PI * mu)


def wall_stokeslet_segment(
    xhat: ArrayLike, seg: Segment, load: SegmentLoad, eps: float, mu: float = 1.0
) -> FloatArray:
    """Stokeslet segment plus its image; vanishes on z = 0."""
    return stokeslet_segment(xhat, seg, load, eps, mu) + image_system_segment(xhat, seg, load, eps, mu)


def pressure_segment(xhat: ArrayLike, seg: Segment, load: SegmentLoad, eps: float) -> FloatArray:
    """Pressure at ``xhat`` of a force, torque or dipole segment."""
    if not eps > 0.0:
        raise ValueError(f"regularization eps must be positive, got {eps!r}")
    xhat = np.asarray(xhat, dtype=np.float64)
    if load.kind == "torque":
        shape = np.broadcast_shapes(xhat.shape, seg.y0.shape, load.a.shape)[:-1]
        return np.zeros(shape)
    need = FORCE_PRESSURE_SET if load.kind == "force" else DIPOLE_PRESSURE_SET
    table = build_table(xhat, seg, eps, need)
    x, L = _frame(table)
    s = _dot([load.a, load.b], x)
    if load.kind == "force":
        p = 2.0 * _integrate(s, table, -3) + 3.0 * eps * eps * _integrate(s, table, -5)
    else:
        p = -105.0 * eps ** 4 * _integrate(s, table, -9)
    return (p * L / EIGHT_PI)[..., 0]
