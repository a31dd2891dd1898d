from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import quad

from stokeslet_segments.errors import DegenerateSegmentError, UnsupportedIndexError
from stokeslet_segments.integrals import (
    SMOOTH_ELLIPSE,
    SegmentGeometry,
    build_table,
    downshift_q,
    t0_minus3,
    upshift_q,
)
from stokeslet_segments.model import Segment

ALL_INDICES = [(n, q) for n in range(6) for q in (1, -1, -3, -5, -7)]


def reference(geom: SegmentGeometry, n: int, q: int) -> float:
    """Adaptive quadrature of alpha^n R(alpha)^q on [0, 1] for a single pair."""
    closest = float(np.clip(-geom.x0v / geom.L2, 0.0, 1.0))
    points = [closest] if 0.0 < closest < 1.0 else None
    value, _ = quad(
        lambda a: a ** n * float(geom.R(a)) ** q,
        0.0,
        1.0,
        epsabs=0.0,
        epsrel=1e-13,
        limit=400,
        points=points,
    )
    return value


def random_case(rng):
    y0 = rng.uniform(-0.5, 0.5, size=3)
    direction = rng.normal(size=3)
    y1 = y0 + rng.uniform(0.3, 1.0) * direction / np.linalg.norm(direction)
    xhat = y0 + rng.uniform(-0.6, 0.6, size=3)
    eps = rng.uniform(0.05, 0.2)
    return xhat, Segment(y0, y1), eps


def oracle_case(rng, kind: str):
    """Segment, point and eps spanning eps/L in [1e-3, 10] and near-axis distances down to 1e-3 L."""
    y0 = rng.uniform(-0.5, 0.5, size=3)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    length = rng.uniform(0.3, 1.0)
    seg = Segment(y0, y0 + length * direction)
    eps = length * 10.0 ** rng.uniform(-3.0, 1.0)
    normal = np.cross(direction, rng.normal(size=3))
    normal /= np.linalg.norm(normal)
    if kind == "generic":
        xhat = y0 + rng.uniform(-1.0, 1.0, size=3) * length
    elif kind == "near-axis":
        along = rng.uniform(-0.2, 1.2)
        xhat = y0 + length * (along * direction + 10.0 ** rng.uniform(-3.0, -1.0) * normal)
    else:
        along = -10.0 ** rng.uniform(-3.0, 0.0)
        xhat = y0 + length * (along * direction + 10.0 ** rng.uniform(-3.0, -1.0) * normal)
    return xhat, seg, eps


@pytest.mark.parametrize("kind", ["generic", "near-axis", "behind"])
def test_table_matches_quadrature(rng, kind: str) -> None:
    for _ in range(60):
        xhat, seg, eps = oracle_case(rng, kind)
        table = build_table(xhat, seg, eps, ALL_INDICES)
        for n, q in ALL_INDICES:
            expected = reference(table.geometry, n, q)
            assert table[(n, q)] == pytest.approx(expected, rel=1e-9), (kind, n, q)


@pytest.mark.parametrize(
    "xhat",
    [
        [-0.5, 1e-3, 0.0],  # on the axis, behind the start
        [1.6, 0.0, 2e-3],  # on the axis, beyond the end
        [0.5, 1e-4, 0.0],  # next to the middle
    ],
)
def test_stabilized_logarithm_near_the_axis(xhat) -> None:
    seg = Segment(np.array([0.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]))
    need = [(n, q) for n in range(4) for q in (-1, -3)]
    table = build_table(np.array(xhat), seg, 0.01, need, smooth_quadrature=False)
    for n, q in need:
        assert table[(n, q)] == pytest.approx(reference(table.geometry, n, q), rel=1e-9), (n, q)


def test_far_pairs_use_gauss_legendre_and_stay_accurate() -> None:
    seg = Segment(np.array([0.0, 0.0, 0.0]), np.array([0.1, 0.0, 0.0]))
    xhat = np.array([3.0, 2.0, -1.0])
    geom = SegmentGeometry.from_segment(xhat, seg, 0.01)
    assert geom.ellipse_parameter() >= SMOOTH_ELLIPSE
    need = [(n, q) for n in range(6) for q in (-1, -3, -5)]
    table = build_table(xhat, seg, 0.01, need)
    for n, q in need:
        assert table[(n, q)] == pytest.approx(reference(geom, n, q), rel=1e-12), (n, q)


def test_ellipse_parameter_separates_near_and_far_points() -> None:
    seg = Segment(np.array([0.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]))
    on_segment = SegmentGeometry.from_segment(np.array([0.5, 1e-3, 0.0]), seg, 1e-3)
    far = SegmentGeometry.from_segment(np.array([4.0, 3.0, 0.0]), seg, 1e-3)
    assert on_segment.ellipse_parameter() < SMOOTH_ELLIPSE
    assert far.ellipse_parameter() > SMOOTH_ELLIPSE


def test_table_broadcasts_over_points_and_segments(rng) -> None:
    y0 = rng.uniform(-1.0, 1.0, size=(4, 3))
    seg = Segment(y0, y0 + np.array([0.3, 0.1, 0.0]))
    points = rng.uniform(-1.0, 1.0, size=(6, 1, 3))
    table = build_table(points, seg, 0.1, [(2, -3)])
    assert table[(2, -3)].shape == (6, 4)
    single = build_table(points[5, 0], Segment(y0[1], y0[1] + np.array([0.3, 0.1, 0.0])), 0.1, [(2, -3)])
    assert table[(2, -3)][5, 1] == pytest.approx(float(single[(2, -3)]), rel=1e-12)


def test_upshift_inverts_downshift(rng) -> None:
    xhat, seg, eps = random_case(rng)
    geom = SegmentGeometry.from_segment(xhat, seg, eps)
    t3 = t0_minus3(geom)
    t5 = downshift_q(t3, geom, -3)
    assert upshift_q(t5, geom, -5) == pytest.approx(t3, rel=1e-12)


@pytest.mark.parametrize("index", [(6, -3), (0, -2), (0, 3), (-1, -1), (2, -11)])
def test_unsupported_indices_are_rejected(index) -> None:
    seg = Segment(np.zeros(3), np.array([1.0, 0.0, 0.0]))
    with pytest.raises(UnsupportedIndexError):
        build_table(np.array([0.0, 1.0, 0.0]), seg, 0.1, [index])


def test_missing_entries_raise_lookup_error() -> None:
    seg = Segment(np.zeros(3), np.array([1.0, 0.0, 0.0]))
    table = build_table(np.array([0.0, 1.0, 0.0]), seg, 0.1, [(0, -1)])
    with pytest.raises(LookupError, match="T_"):
        table[(4, -7)]


def test_degenerate_segment_is_rejected() -> None:
    with pytest.raises(DegenerateSegmentError):
        Segment(np.ones(3), np.ones(3))


def test_eps_must_be_positive() -> None:
    seg = Segment(np.zeros(3), np.array([1.0, 0.0, 0.0]))
    with pytest.raises(ValueError, match="eps"):
        build_table(np.array([0.0, 1.0, 0.0]), seg, 0.0, [(0, -1)])


@pytest.mark.parametrize("kind", ["generic", "near-axis", "behind"])
def test_transverse_distance_is_constant_along_the_segment(rng, kind: str) -> None:
    for _ in range(20):
        geom = SegmentGeometry.from_segment(*oracle_case(rng, kind))
        for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
            gap = geom.L2 * geom.R(alpha) ** 2 - geom.xv(alpha) ** 2 - geom.L2 * geom.c2
            assert abs(gap) < 1e-12 * geom.L2 * geom.R0 ** 2


def test_uniform_rescaling_scales_by_lambda_to_the_q(rng) -> None:
    scale = 3.7
    for _ in range(10):
        xhat, seg, eps = random_case(rng)
        table = build_table(xhat, seg, eps, ALL_INDICES)
        scaled = build_table(scale * xhat, Segment(scale * seg.y0, scale * seg.y1), scale * eps, ALL_INDICES)
        for n, q in ALL_INDICES:
            assert scaled[(n, q)] == pytest.approx(scale ** q * table[(n, q)], rel=1e-12), (n, q)
