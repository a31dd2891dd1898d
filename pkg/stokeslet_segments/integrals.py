"""Line integrals T_{n,q} = int_0^1 alpha^n R(alpha)^q d alpha over a segment.

With ``x(alpha) = x0 + alpha v`` and ``R(alpha)^2 = |x(alpha)|^2 + eps^2``
the family follows from three closed-form base cases, the downshift
relation in q (derived from d/d alpha (x.v R^q)) and the recursion in n

    T_{n,q} = [alpha^{n-1} R^{q+2}]_0^1 / ((q+2) L^2)
              - (n-1)/((q+2) L^2) T_{n-2,q+2} - (x0.v)/L^2 T_{n-1,q}.

Pairs whose integrand is analytic in a wide neighbourhood of [0, 1]
(measured by the Bernstein ellipse through the complex zeros of R^2)
are evaluated with a fixed Gauss-Legendre rule instead, because the
forward recursion amplifies rounding there.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, Iterator, Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import roots_legendre

from .errors import DegenerateSegmentError, UnsupportedIndexError
from .model import FloatArray, Segment

Index = Tuple[int, int]

MAX_N = 5
SUPPORTED_Q = (1, -1, -3, -5, -7, -9)
# Internal dependencies of T_{n,1} reach T_{0,5}.
_MAX_INTERNAL_Q = 5

GAUSS_ORDER = 64
SMOOTH_ELLIPSE = 1.5

STOKESLET_SET = frozenset({(0, -1), (1, -1), (0, -3), (1, -3), (2, -3), (3, -3)})
DIPOLE_SET = STOKESLET_SET | frozenset({(0, -5), (1, -5), (2, -5), (3, -5)})
ROTLET_SET = frozenset({(0, -1), (1, -1), (0, -3), (1, -3), (2, -3), (0, -5), (1, -5), (2, -5)})
KIRCHHOFF_SET = DIPOLE_SET | frozenset({(0, -7), (1, -7), (2, -7), (3, -7)})


def _dot(a: FloatArray, b: FloatArray) -> FloatArray:
    return np.einsum("...i,...i->...", a, b)


@dataclass(frozen=True, eq=False)
class SegmentGeometry:
    """Scalars shared by every T_{n,q} of one (point, segment, eps) triple.

    ``c2 = R0^2 - (x0.v)^2 / L^2`` is formed from the cross product so it
    never drops below ``eps^2`` through cancellation.
    """

    x0: FloatArray
    x1: FloatArray
    v: FloatArray
    L: FloatArray
    L2: FloatArray
    R0: FloatArray
    R1: FloatArray
    x0v: FloatArray
    x1v: FloatArray
    c2: FloatArray
    eps: float

    @classmethod
    def from_segment(cls, xhat: ArrayLike, seg: Segment, eps: float) -> "SegmentGeometry":
        if not eps > 0.0:
            raise ValueError(f"regularization eps must be positive, got {eps!r}")
        xhat = np.asarray(xhat, dtype=np.float64)
        x0 = xhat - seg.y0
        x1 = xhat - seg.y1
        v = np.broadcast_to(seg.v, x0.shape)
        L2 = _dot(v, v)
        if np.any(L2 <= 0.0):
            raise DegenerateSegmentError("segment endpoints coincide (L = 0)")
        e2 = eps * eps
        x0v = _dot(x0, v)
        cross = np.cross(x0, v)
        return cls(
            x0=x0,
            x1=x1,
            v=v,
            L=np.sqrt(L2),
            L2=L2,
            R0=np.sqrt(_dot(x0, x0) + e2),
            R1=np.sqrt(_dot(x1, x1) + e2),
            x0v=x0v,
            x1v=x0v + L2,
            c2=_dot(cross, cross) / L2 + e2,
            eps=float(eps),
        )

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.L2.shape

    def R(self, alpha: ArrayLike) -> FloatArray:
        alpha = np.asarray(alpha, dtype=np.float64)
        return np.sqrt(self.R0 ** 2 + 2.0 * alpha * self.x0v + alpha * alpha * self.L2)

    def xv(self, alpha: ArrayLike) -> FloatArray:
        return self.x0v + np.asarray(alpha, dtype=np.float64) * self.L2

    def ellipse_parameter(self) -> FloatArray:
        """Bernstein ellipse parameter of the zeros of R(alpha)^2 relative to [0, 1]."""
        centre = -self.x0v / self.L2
        half_width = np.sqrt(self.c2 / self.L2)
        w = 2.0 * (centre + 1j * half_width) - 1.0
        root = np.sqrt(w - 1.0) * np.sqrt(w + 1.0)
        return np.maximum(np.abs(w + root), np.abs(w - root))


@dataclass(eq=False)
class TnqTable:
    """Values T_{n,q} for one geometry, filled in dependency order."""

    geometry: SegmentGeometry
    values: Dict[Index, FloatArray] = field(default_factory=dict)

    def __getitem__(self, index: Index) -> FloatArray:
        try:
            return self.values[index]
        except KeyError:
            n, q = index
            raise LookupError(f"T_{{{n},{q}}} has not been computed yet") from None

    def __setitem__(self, index: Index, value: FloatArray) -> None:
        self.values[index] = np.asarray(value, dtype=np.float64)

    def __contains__(self, index: object) -> bool:
        return index in self.values

    def __iter__(self) -> Iterator[Index]:
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)


def _signs(xv: FloatArray) -> FloatArray:
    return np.where(xv >= 0.0, 1.0, -1.0)


def _log_lr_plus_xv(geom: SegmentGeometry, R: FloatArray, xv: FloatArray) -> FloatArray:
    """log(L R + x.v), rewritten as log(L^2 c2) - log(L R - x.v) behind the segment."""
    direct = np.log(geom.L * R + np.abs(xv))
    return np.where(xv >= 0.0, direct, np.log(geom.L2 * geom.c2) - direct)


def _t0m3_antiderivative(geom: SegmentGeometry, R: FloatArray, xv: FloatArray) -> FloatArray:
    """-1/(R (L R + x.v)) up to an additive constant, free of cancellation for either sign."""
    s = _signs(xv)
    return s / (geom.L * geom.c2) - s / (R * (np.abs(xv) + geom.L * R))


def t0_minus1(geom: SegmentGeometry) -> FloatArray:
    ends = _log_lr_plus_xv(geom, geom.R1, geom.x1v) - _log_lr_plus_xv(geom, geom.R0, geom.x0v)
    return ends / geom.L


def t0_minus3(geom: SegmentGeometry) -> FloatArray:
    return _t0m3_antiderivative(geom, geom.R1, geom.x1v) - _t0m3_antiderivative(geom, geom.R0, geom.x0v)


def t0_plus1(geom: SegmentGeometry, t0m1: FloatArray) -> FloatArray:
    ends = geom.R1 * geom.x1v - geom.R0 * geom.x0v
    return ends / (2.0 * geom.L2) + 0.5 * geom.c2 * t0m1


def base_cases(geom: SegmentGeometry) -> TnqTable:
    """T_{0,1}, T_{0,-1}, T_{0,-3}, T_{1,-1} and T_{1,-3} for ``geom``."""
    table = TnqTable(geom)
    table[(0, -1)] = t0_minus1(geom)
    table[(0, -3)] = t0_minus3(geom)
    table[(0, 1)] = t0_plus1(geom, table[(0, -1)])
    table[(1, -1)] = recurse(table, geom, 1, -1)
    table[(1, -3)] = recurse(table, geom, 1, -3)
    return table


def downshift_q(t0q: FloatArray, geom: SegmentGeometry, q: int) -> FloatArray:
    """T_{0,q-2} from T_{0,q}."""
    if q == 0:
        raise UnsupportedIndexError("downshift is undefined for q = 0")
    ends = geom.x1v * geom.R1 ** q - geom.x0v * geom.R0 ** q
    return (geom.L2 * (1.0 + q) * t0q - ends) / (q * geom.L2 * geom.c2)


def upshift_q(t0q: FloatArray, geom: SegmentGeometry, q: int) -> FloatArray:
    """T_{0,q+2} from T_{0,q}; the inverse of :func:`downshift_q`."""
    up = q + 2
    if up == -1:
        raise UnsupportedIndexError("upshift to q = -1 is undefined; T_{0,-1} is a base case")
    ends = geom.x1v * geom.R1 ** up - geom.x0v * geom.R0 ** up
    return (up * geom.L2 * geom.c2 * t0q + ends) / (geom.L2 * (1.0 + up))


def recurse(table: TnqTable, geom: SegmentGeometry, n: int, q: int) -> FloatArray:
    """T_{n,q} for n >= 1 from T_{n-1,q} and T_{n-2,q+2}."""
    if q == -2:
        raise UnsupportedIndexError("the recursion excludes q = -2")
    if n < 1:
        raise UnsupportedIndexError("the recursion starts at n = 1")
    p = q + 2
    scale = 1.0 / (p * geom.L2)
    ends = geom.R1 ** p if n > 1 else geom.R1 ** p - geom.R0 ** p
    value = scale * ends - (geom.x0v / geom.L2) * table[(n - 1, q)]
    if n > 1:
        value = value - (n - 1) * scale * table[(n - 2, p)]
    return value


def _validate_request(index: Index) -> None:
    n, q = index
    if q == -2:
        raise UnsupportedIndexError("T_{n,-2} is excluded by the recursion")
    if not 0 <= n <= MAX_N:
        raise UnsupportedIndexError(f"n = {n} outside the supported range 0..{MAX_N}")
    if q not in SUPPORTED_Q:
        raise UnsupportedIndexError(f"q = {q} is not one of {SUPPORTED_Q}")


def _ensure(table: TnqTable, geom: SegmentGeometry, n: int, q: int) -> None:
    if (n, q) in table:
        return
    if q > _MAX_INTERNAL_Q:
        raise UnsupportedIndexError(f"T_{{{n},{q}}} would need q above {_MAX_INTERNAL_Q}")
    if n == 0:
        if q == -1:
            table[(0, -1)] = t0_minus1(geom)
        elif q == -3:
            table[(0, -3)] = t0_minus3(geom)
        elif q == 1:
            _ensure(table, geom, 0, -1)
            table[(0, 1)] = t0_plus1(geom, table[(0, -1)])
        elif q < -3:
            _ensure(table, geom, 0, q + 2)
            table[(0, q)] = downshift_q(table[(0, q + 2)], geom, q + 2)
        else:
            _ensure(table, geom, 0, q - 2)
            table[(0, q)] = upshift_q(table[(0, q - 2)], geom, q - 2)
        return
    _ensure(table, geom, n - 1, q)
    if n > 1:
        _ensure(table, geom, n - 2, q + 2)
    table[(n, q)] = recurse(table, geom, n, q)


@lru_cache(maxsize=None)
def gauss_rule(order: int = GAUSS_ORDER) -> Tuple[FloatArray, FloatArray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    nodes, weights = roots_legendre(order)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def _replace_smooth_pairs(table: TnqTable, geom: SegmentGeometry) -> None:
    smooth = (geom.ellipse_parameter() >= SMOOTH_ELLIPSE).reshape(-1)
    if not smooth.any():
        return
    alpha, weights = gauss_rule()
    R0 = np.broadcast_to(geom.R0, geom.shape).reshape(-1)[smooth]
    x0v = np.broadcast_to(geom.x0v, geom.shape).reshape(-1)[smooth]
    L2 = np.broadcast_to(geom.L2, geom.shape).reshape(-1)[smooth]
    R = np.sqrt(R0[:, None] ** 2 + 2.0 * alpha * x0v[:, None] + alpha * alpha * L2[:, None])
    for (n, q), current in table.values.items():
        flat = np.array(np.broadcast_to(current, geom.shape), dtype=np.float64).reshape(-1)
        flat[smooth] = (R ** q * (alpha ** n * weights)).sum(axis=-1)
        table.values[(n, q)] = flat.reshape(geom.shape)


def build_table(
    xhat: ArrayLike,
    seg: Segment,
    eps: float,
    need: Iterable[Index],
    *,
    smooth_quadrature: bool = True,
) -> TnqTable:
    """Populate the requested T_{n,q} (plus their dependencies).

    ``smooth_quadrature=False`` forces the analytic recursion for every
    pair, which is what the recursion tests exercise.
    """
    need = list(need)
    for index in need:
        _validate_request(index)
    geom = SegmentGeometry.from_segment(xhat, seg, eps)
    table = TnqTable(geom)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for n, q in sorted(need):
            _ensure(table, geom, n, q)
    if smooth_quadrature:
        _replace_smooth_pairs(table, geom)
    return table
