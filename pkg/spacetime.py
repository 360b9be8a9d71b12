"""
Parabolic Spacetime Geometry

Points X=(x,t) of R^{N,1}, the parabolic metric in which time scales like
distance squared, parabolic ball volumes, and the spines W_X attached to
self-similar models (time slices, half-cylinders and full cylinders).
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from errors import InvalidInputError


@dataclass(frozen=True)
class SpacetimePoint:
    """A point X=(x,t); x has length units, t has length-squared units"""

    x: Tuple[float, ...]
    t: float

    def __post_init__(self):
        coords = tuple(float(c) for c in self.x)
        if len(coords) < 2:
            raise InvalidInputError(f"ambient dimension must be at least 2, got {len(coords)}")
        if not all(math.isfinite(c) for c in coords) or not math.isfinite(float(self.t)):
            raise InvalidInputError("spacetime point components must be finite")
        object.__setattr__(self, "x", coords)
        object.__setattr__(self, "t", float(self.t))

    @property
    def N(self) -> int:
        return len(self.x)

    @property
    def position(self) -> np.ndarray:
        return np.asarray(self.x, dtype=float)

    def as_array(self) -> np.ndarray:
        """Row vector (x_1, ..., x_N, t)"""
        return np.append(self.position, self.t)

    @classmethod
    def from_array(cls, row: Sequence[float]) -> "SpacetimePoint":
        values = [float(v) for v in row]
        return cls(tuple(values[:-1]), values[-1])

    @classmethod
    def origin(cls, N: int) -> "SpacetimePoint":
        return cls(tuple([0.0] * N), 0.0)


def parabolic_distance(X: SpacetimePoint, Y: SpacetimePoint) -> float:
    """d(X,Y) = max(|x-y|, |t-s|^{1/2})"""
    if X.N != Y.N:
        raise InvalidInputError(f"dimension mismatch: {X.N} vs {Y.N}")
    spatial = float(np.linalg.norm(X.position - Y.position))
    temporal = math.sqrt(abs(X.t - Y.t))
    return max(spatial, temporal)


def parabolic_distances(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    """Vectorized parabolic distance from rows (x..., t) of ``points`` to ``center``"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    center = np.asarray(center, dtype=float)
    spatial = np.linalg.norm(points[:, :-1] - center[:-1], axis=1)
    temporal = np.sqrt(np.abs(points[:, -1] - center[-1]))
    return np.maximum(spatial, temporal)


def unit_ball_volume(N: int) -> float:
    """Lebesgue volume of the unit ball in R^N"""
    return math.pi ** (N / 2.0) / math.gamma(N / 2.0 + 1.0)


def unit_sphere_area(n: int) -> float:
    """n-dimensional area of the unit sphere S^n in R^{n+1}"""
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


def ball_volume(r: float, N: int) -> float:
    """Vol(B_r(X)) = w_N r^{N+2} with w_N = 2 * unit_ball_volume(N)"""
    if r <= 0:
        raise InvalidInputError(f"radius must be positive, got {r}")
    return 2.0 * unit_ball_volume(N) * r ** (N + 2)


def orthonormal_basis(vectors: Iterable[Sequence[float]], N: int, tol: float = 1e-10) -> np.ndarray:
    """Gram-Schmidt basis (N x l) of the span of ``vectors``; degenerate vectors are skipped"""
    basis = []
    for v in vectors:
        w = np.asarray(v, dtype=float).reshape(N)
        for b in basis:
            w = w - np.dot(w, b) * b
        norm = np.linalg.norm(w)
        if norm > tol:
            basis.append(w / norm)
    if not basis:
        return np.zeros((N, 0))
    return np.column_stack(basis)


class SpineKind(Enum):
    TIME_SLICE = "time_slice"
    HALF_CYLINDER = "half_cylinder"
    FULL_CYLINDER = "full_cylinder"


@dataclass(frozen=True, eq=False)
class Spine:
    """Spine W_X: (x+V) x {t}, (x+V) x (-inf, T] or (x+V) x R"""

    kind: SpineKind
    base: Tuple[float, ...]
    plane: np.ndarray = field(repr=False)
    time: Optional[float] = None

    def __post_init__(self):
        base = tuple(float(c) for c in self.base)
        plane = np.asarray(self.plane, dtype=float).reshape(len(base), -1)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "plane", plane)
        if self.kind is not SpineKind.FULL_CYLINDER and self.time is None:
            raise InvalidInputError(f"{self.kind.value} spine needs a time parameter")

    @property
    def N(self) -> int:
        return len(self.base)

    @property
    def dim(self) -> int:
        """Dimension l of the spatial plane V"""
        return self.plane.shape[1]

    def distance_to_plane(self, y: Sequence[float]) -> float:
        """Euclidean distance from y to x+V"""
        rel = np.asarray(y, dtype=float) - np.asarray(self.base)
        if self.dim:
            rel = rel - self.plane @ (self.plane.T @ rel)
        return float(np.linalg.norm(rel))

    def distance(self, Y: SpacetimePoint) -> float:
        """Parabolic distance from Y to the spine"""
        d_space = self.distance_to_plane(Y.x)
        if self.kind is SpineKind.TIME_SLICE:
            d_time = math.sqrt(abs(Y.t - self.time))
        elif self.kind is SpineKind.HALF_CYLINDER:
            d_time = math.sqrt(max(Y.t - self.time, 0.0))
        else:
            d_time = 0.0
        return max(d_space, d_time)

    def spans(self, vector: Sequence[float], tol: float = 1e-8) -> bool:
        """Whether ``vector`` lies in V"""
        v = np.asarray(vector, dtype=float)
        if self.dim:
            v = v - self.plane @ (self.plane.T @ v)
        return bool(np.linalg.norm(v) <= tol)

    def same_plane(self, other: "Spine", tol: float = 1e-8) -> bool:
        if self.dim != other.dim:
            return False
        return all(self.spans(other.plane[:, i], tol) for i in range(other.dim))
