"""Domain objects: segments, linear loads and piecewise-linear filaments."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateSegmentError

FloatArray = NDArray[np.float64]
LoadKind = Literal["force", "torque", "dipole"]
LOAD_KINDS = ("force", "torque", "dipole")


def as_vectors(value: ArrayLike, name: str) -> FloatArray:
    """Return ``value`` as a float array whose last axis has length 3."""
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape[-1:] != (3,):
        raise ValueError(f"{name} must have a trailing dimension of 3, got shape {arr.shape}.")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values.")
    return arr


@dataclass(frozen=True, eq=False)
class Segment:
    """Oriented straight segment y(alpha) = y0 - alpha v, v = y0 - y1.

    ``y0`` and ``y1`` may carry leading batch dimensions; every quantity
    derived from them broadcasts the same way.
    """

    y0: FloatArray
    y1: FloatArray
    v: FloatArray = field(init=False)
    length: FloatArray = field(init=False)

    def __post_init__(self) -> None:
        y0 = as_vectors(self.y0, "y0")
        y1 = as_vectors(self.y1, "y1")
        v = y0 - y1
        length = np.sqrt(np.einsum("...i,...i->...", v, v))
        if np.any(length <= 0.0):
            raise DegenerateSegmentError("segment endpoints coincide (L = 0)")
        object.__setattr__(self, "y0", y0)
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "length", length)

    def point(self, alpha: ArrayLike) -> FloatArray:
        alpha = np.asarray(alpha, dtype=np.float64)
        return self.y0 - alpha[..., None] * self.v

    def reversed(self) -> "Segment":
        return Segment(self.y1, self.y0)


@dataclass(frozen=True, eq=False)
class SegmentLoad:
    """Linear density ``a + alpha b`` carried by a segment."""

    kind: LoadKind
    a: FloatArray
    b: FloatArray

    def __post_init__(self) -> None:
        if self.kind not in LOAD_KINDS:
            raise ValueError(f"Unknown load kind '{self.kind}'. Expected one of {LOAD_KINDS}.")
        object.__setattr__(self, "a", as_vectors(self.a, "a"))
        object.__setattr__(self, "b", as_vectors(self.b, "b"))

    @classmethod
    def from_endpoints(cls, kind: LoadKind, w0: ArrayLike, w1: ArrayLike) -> "SegmentLoad":
        w0 = as_vectors(w0, "w0")
        w1 = as_vectors(w1, "w1")
        return cls(kind, w0, w1 - w0)

    def at(self, alpha: ArrayLike) -> FloatArray:
        alpha = np.asarray(alpha, dtype=np.float64)
        return self.a + alpha[..., None] * self.b

    def as_kind(self, kind: LoadKind) -> "SegmentLoad":
        return SegmentLoad(kind, self.a, self.b)


@dataclass(frozen=True, eq=False)
class FilamentMesh:
    """Piecewise-linear curve through ``nodes`` (N_n x 3)."""

    nodes: FloatArray

    def __post_init__(self) -> None:
        nodes = as_vectors(self.nodes, "nodes")
        if nodes.ndim != 2 or nodes.shape[0] < 2:
            raise DegenerateSegmentError("a filament mesh needs at least two nodes")
        steps = np.linalg.norm(np.diff(nodes, axis=0), axis=1)
        if np.any(steps <= 0.0):
            raise DegenerateSegmentError("consecutive filament nodes coincide")
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def straight(cls, n_nodes: int, length: float = 1.0) -> "FilamentMesh":
        """Filament along the x axis from 0 to ``length``."""
        nodes = np.zeros((n_nodes, 3))
        nodes[:, 0] = np.linspace(0.0, length, n_nodes)
        return cls(nodes)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def segments(self) -> Segment:
        return Segment(self.nodes[:-1], self.nodes[1:])

    @property
    def lengths(self) -> FloatArray:
        return np.linalg.norm(np.diff(self.nodes, axis=0), axis=1)

    @property
    def total_length(self) -> float:
        return float(self.lengths.sum())

    def trapezoid_weights(self) -> FloatArray:
        """Weights w_k such that sum_k w_k f_k integrates a linear density exactly."""
        lengths = self.lengths
        weights = np.zeros(self.n_nodes)
        weights[:-1] += 0.5 * lengths
        weights[1:] += 0.5 * lengths
        return weights
