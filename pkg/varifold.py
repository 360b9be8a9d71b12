"""
Discrete Varifolds and Flow Tracks

A VarifoldSlice is one time slice M_t of a multiplicity-one flow, stored as
weighted surface samples with optional normal and curvature columns. A
FlowTrack is the time-ordered sequence of slices standing in for a Brakke
flow, together with its mass bound. recenter_rescale implements the
parabolic blowup M_{X,r} = D_{1/r}(M - X).
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from errors import DataMissingError, InvalidInputError, OutOfRangeError
from spacetime import SpacetimePoint

logger = logging.getLogger(__name__)

Integrand = Callable[[np.ndarray], np.ndarray]

# Relative slack on the |A|^2 = sum(lambda_i^2) consistency check
CURVATURE_CONSISTENCY = 1e-9
TIME_MATCH = 1e-12


def _optional_array(values, shape: Tuple[int, ...], name: str) -> Optional[np.ndarray]:
    if values is None:
        return None
    arr = np.asarray(values, dtype=float)
    try:
        arr = arr.reshape(shape)
    except ValueError:
        raise InvalidInputError(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class VarifoldSlice:
    """Time slice M_t as weighted samples: weights are n-dimensional area elements"""

    t: float
    n: int
    positions: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    normals: Optional[np.ndarray] = field(default=None, repr=False)
    principal_curvatures: Optional[np.ndarray] = field(default=None, repr=False)
    mean_curvature: Optional[np.ndarray] = field(default=None, repr=False)
    secondff_norm: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=float)
        if positions.ndim != 2:
            raise InvalidInputError("positions must be an (m, N) array")
        m, N = positions.shape
        weights = np.asarray(self.weights, dtype=float).reshape(m)
        if m and not np.all(weights > 0):
            raise InvalidInputError("all sample weights must be positive")
        if not np.all(np.isfinite(positions)):
            raise InvalidInputError("positions contain non-finite values")

        normals = _optional_array(self.normals, (m, N), "normals")
        lam = _optional_array(self.principal_curvatures, (m, self.n), "principal_curvatures")
        h = _optional_array(self.mean_curvature, (m,), "mean_curvature")
        a = _optional_array(self.secondff_norm, (m,), "secondff_norm")

        if lam is not None:
            if m and np.any(np.diff(lam, axis=1) < 0):
                raise InvalidInputError("principal curvatures must be sorted ascending")
            derived_a = np.sqrt(np.sum(lam ** 2, axis=1))
            derived_h = np.sum(lam, axis=1)
            if a is not None and not np.allclose(a, derived_a, rtol=CURVATURE_CONSISTENCY, atol=1e-300):
                raise InvalidInputError("|A| inconsistent with principal curvatures")
            if h is not None and not np.allclose(h, derived_h, rtol=CURVATURE_CONSISTENCY, atol=1e-12):
                raise InvalidInputError("mean curvature inconsistent with principal curvatures")
            a = derived_a if a is None else a
            h = derived_h if h is None else h
        if a is not None and m and np.any(a < 0):
            raise InvalidInputError("|A| must be nonnegative")

        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "principal_curvatures", lam)
        object.__setattr__(self, "mean_curvature", h)
        object.__setattr__(self, "secondff_norm", a)

    @classmethod
    def empty(cls, t: float, n: int, N: int) -> "VarifoldSlice":
        """Empty-slice marker: the zero measure at time t"""
        return cls(t=t, n=n, positions=np.zeros((0, N)), weights=np.zeros(0))

    @property
    def N(self) -> int:
        return self.positions.shape[1]

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    @property
    def is_empty(self) -> bool:
        return self.size == 0

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def has_curvature(self) -> bool:
        return self.secondff_norm is not None

    def curvature_norm(self) -> np.ndarray:
        """|A| per sample"""
        if self.secondff_norm is None:
            raise DataMissingError(f"slice at t={self.t:.6g} has no curvature data")
        return self.secondff_norm

    def require_principal_curvatures(self) -> np.ndarray:
        if self.principal_curvatures is None:
            raise DataMissingError(f"slice at t={self.t:.6g} has no principal curvatures")
        return self.principal_curvatures

    def integrate(self, integrand: Integrand) -> float:
        """Quadrature of integrand(positions) against the slice measure"""
        if self.is_empty:
            return 0.0
        return float(np.dot(self.weights, integrand(self.positions)))

    def integrate_values(self, values: np.ndarray) -> float:
        if self.is_empty:
            return 0.0
        return float(np.dot(self.weights, values))

    @cached_property
    def tree(self) -> cKDTree:
        return cKDTree(self.positions if self.size else np.zeros((1, self.N)))

    def nearest(self, x: Sequence[float]) -> Tuple[int, float]:
        """Index of and distance to the sample nearest to x"""
        if self.is_empty:
            raise InvalidInputError(f"slice at t={self.t:.6g} is empty")
        dist, idx = self.tree.query(np.asarray(x, dtype=float))
        return int(idx), float(dist)

    def ball_indices(self, x: Sequence[float], r: float) -> np.ndarray:
        """Indices of samples with |p - x| < r"""
        if self.is_empty:
            return np.zeros(0, dtype=int)
        idx = np.asarray(self.tree.query_ball_point(np.asarray(x, dtype=float), r), dtype=int)
        if idx.size == 0:
            return idx
        # query_ball_point is inclusive; keep the open ball
        d = np.linalg.norm(self.positions[idx] - np.asarray(x, dtype=float), axis=1)
        return np.sort(idx[d < r])

    def restrict(self, mask: np.ndarray) -> "VarifoldSlice":
        def pick(arr):
            return None if arr is None else arr[mask]

        return VarifoldSlice(
            t=self.t,
            n=self.n,
            positions=self.positions[mask],
            weights=self.weights[mask],
            normals=pick(self.normals),
            principal_curvatures=pick(self.principal_curvatures),
            mean_curvature=pick(self.mean_curvature),
            secondff_norm=pick(self.secondff_norm),
        )

    def rescaled(self, x0: np.ndarray, t0: float, r: float) -> "VarifoldSlice":
        """Image under D_{1/r}(. - X): lengths /r, times /r^2, area r^-n, curvature *r"""

        def scale(arr, factor):
            return None if arr is None else arr * factor

        return VarifoldSlice(
            t=(self.t - t0) / r ** 2,
            n=self.n,
            positions=(self.positions - x0) / r,
            weights=self.weights * r ** (-self.n),
            normals=self.normals,
            principal_curvatures=scale(self.principal_curvatures, r),
            mean_curvature=scale(self.mean_curvature, r),
            secondff_norm=scale(self.secondff_norm, r),
        )


@dataclass(frozen=True, eq=False)
class FlowTrack:
    """Discrete Brakke flow: time-ordered slices with mass bound Lambda"""

    slices: Tuple[VarifoldSlice, ...]
    n: int
    N: int
    mass_bound: float
    singular_times: Tuple[float, ...] = ()
    singular_points: Tuple[SpacetimePoint, ...] = ()
    closed: bool = False
    vanished: bool = False
    provenance: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        slices = tuple(self.slices)
        object.__setattr__(self, "slices", slices)
        object.__setattr__(self, "singular_times", tuple(float(t) for t in self.singular_times))
        object.__setattr__(self, "singular_points", tuple(self.singular_points))
        if self.mass_bound <= 0:
            raise InvalidInputError(f"mass bound must be positive, got {self.mass_bound}")
        if not 1 <= self.n < self.N:
            raise InvalidInputError(f"need 1 <= n < N, got n={self.n}, N={self.N}")
        times = [s.t for s in slices]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidInputError("slice times must be strictly increasing")
        for s in slices:
            if s.N != self.N or s.n != self.n:
                raise InvalidInputError(f"slice at t={s.t:.6g} has dimensions (n={s.n}, N={s.N})")
            if s.mass > self.mass_bound * (1 + 1e-9):
                raise InvalidInputError(
                    f"slice at t={s.t:.6g} has mass {s.mass:.6g} above bound {self.mass_bound:.6g}"
                )

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.slices])

    @property
    def is_empty(self) -> bool:
        """Empty-flow marker: no samples in any slice"""
        return all(s.is_empty for s in self.slices)

    @property
    def t_min(self) -> float:
        if not self.slices:
            raise OutOfRangeError("flow has no slices")
        return self.slices[0].t

    @property
    def t_max(self) -> float:
        if not self.slices:
            raise OutOfRangeError("flow has no slices")
        return self.slices[-1].t

    @property
    def has_curvature(self) -> bool:
        return all(s.has_curvature for s in self.slices if not s.is_empty)

    def covers(self, t: float) -> bool:
        if not self.slices:
            return False
        if t < self.t_min - TIME_MATCH:
            return False
        return self.vanished or t <= self.t_max + TIME_MATCH

    def bracket(self, t: float) -> List[Tuple[VarifoldSlice, float]]:
        """Slices and linear-in-measure weights representing M_t"""
        if not self.covers(t):
            raise OutOfRangeError(f"time {t:.6g} outside flow extent")
        times = self.times
        i = int(np.searchsorted(times, t))
        if i < len(times) and abs(times[i] - t) <= TIME_MATCH:
            return [(self.slices[i], 1.0)]
        if i > 0 and abs(times[i - 1] - t) <= TIME_MATCH:
            return [(self.slices[i - 1], 1.0)]
        if i >= len(times):
            # past the last slice of a vanished flow
            return []
        if i == 0:
            return [(self.slices[0], 1.0)]
        lo, hi = self.slices[i - 1], self.slices[i]
        theta = (t - lo.t) / (hi.t - lo.t)
        return [(lo, 1.0 - theta), (hi, theta)]

    def integrate(self, t: float, integrand: Integrand) -> float:
        """Integral of integrand against M_t"""
        return sum(w * s.integrate(integrand) for s, w in self.bracket(t) if w > 0)

    def mass_at(self, t: float) -> float:
        return sum(w * s.mass for s, w in self.bracket(t))

    def slice_nearest(self, t: float) -> VarifoldSlice:
        if not self.slices:
            raise OutOfRangeError("flow has no slices")
        i = int(np.argmin(np.abs(self.times - t)))
        return self.slices[i]

    def mass_history(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.times, np.array([s.mass for s in self.slices])

    def check_mass_monotone(self, tol: float = 1e-6) -> List[int]:
        """Indices i where mass(i) exceeds mass(i-1) by more than tol * Lambda"""
        if not self.closed:
            return []
        _, mass = self.mass_history()
        return [i for i in range(1, len(mass)) if mass[i] - mass[i - 1] > tol * self.mass_bound]

    def with_slices(self, slices: Sequence[VarifoldSlice], **changes) -> "FlowTrack":
        params = dict(
            n=self.n,
            N=self.N,
            mass_bound=self.mass_bound,
            singular_times=self.singular_times,
            singular_points=self.singular_points,
            closed=self.closed,
            vanished=self.vanished,
            provenance=dict(self.provenance),
        )
        params.update(changes)
        return FlowTrack(slices=tuple(slices), **params)


def recenter_rescale(
    flow: FlowTrack, X: SpacetimePoint, r: float, window: Optional[float] = 2.0
) -> FlowTrack:
    """M_{X,r} = D_{1/r}(M - X), restricted to |x| <= window, |t| <= window^2

    ``window=None`` keeps the whole rescaled flow. The result is the empty-flow
    marker when no sample survives the restriction.
    """
    if X.N != flow.N:
        raise InvalidInputError(f"dimension mismatch: point has N={X.N}, flow has N={flow.N}")
    if not 0 < r <= 1:
        raise InvalidInputError(f"scale must satisfy 0 < r <= 1, got {r}")
    if flow.slices and not flow.covers(X.t) and X.t < flow.t_min:
        raise OutOfRangeError(f"base point time {X.t:.6g} precedes the flow")

    x0 = X.position
    kept: List[VarifoldSlice] = []
    for s in flow.slices:
        t_new = (s.t - X.t) / r ** 2
        if window is not None and abs(t_new) > window ** 2:
            continue
        if window is not None and not s.is_empty:
            d = np.linalg.norm(s.positions - x0, axis=1) / r
            s = s.restrict(d <= window)
        kept.append(s.rescaled(x0, X.t, r))

    max_mass = max((s.mass for s in kept), default=0.0)
    rescaled_points = tuple(
        SpacetimePoint(tuple((p.position - x0) / r), (p.t - X.t) / r ** 2) for p in flow.singular_points
    )
    result = flow.with_slices(
        kept,
        mass_bound=max(4.0 * flow.mass_bound, max_mass * (1 + 1e-12)),
        singular_times=tuple((t - X.t) / r ** 2 for t in flow.singular_times),
        singular_points=rescaled_points,
        closed=False,
    )
    if result.is_empty:
        logger.debug(f"Rescaled flow is empty | t={X.t:.6g}, r={r:.6g}")
    return result


def stack_spacetime_samples(flow: FlowTrack, stride: int = 1) -> np.ndarray:
    """Rows (x..., t) of every stride-th sample of every slice"""
    rows = []
    for s in flow.slices:
        if s.is_empty:
            continue
        pos = s.positions[::stride]
        rows.append(np.column_stack([pos, np.full(len(pos), s.t)]))
    if not rows:
        return np.zeros((0, flow.N + 1))
    return np.vstack(rows)


def max_curvature_history(flow: FlowTrack) -> Tuple[np.ndarray, np.ndarray]:
    """(t, max |A|) for every nonempty slice"""
    times, values = [], []
    for s in flow.slices:
        if s.is_empty:
            continue
        times.append(s.t)
        values.append(float(np.max(s.curvature_norm())))
    return np.array(times), np.array(values)
