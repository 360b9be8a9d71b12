"""
Curve Shortening Flow

Explicit evolution of closed embedded polygons in the plane by their discrete
curvature vector (n=1, N=2). Vertices are redistributed uniformly in arc
length with a periodic cubic spline every few steps, and slices are emitted
more densely as the curvature grows.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from errors import InvalidInputError, SimulationDegenerateError, StepSizeError
from simulator import StopReason, StopRule
from spacetime import SpacetimePoint
from varifold import FlowTrack, VarifoldSlice

logger = logging.getLogger(__name__)

MIN_VERTICES = 16
STABILITY = 0.25
CURVATURE_CADENCE = 0.05


@dataclass(frozen=True, eq=False)
class CurveState:
    """Closed polygon (counter-clockwise) at time t"""

    vertices: np.ndarray = field(repr=False)
    t: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise InvalidInputError("curve vertices must be an (m, 2) array")
        if len(v) < MIN_VERTICES:
            raise InvalidInputError(f"curve needs at least {MIN_VERTICES} vertices, got {len(v)}")
        if signed_area(v) < 0:
            v = v[::-1].copy()
        if self_intersects(v):
            raise InvalidInputError("initial curve is not simple")
        object.__setattr__(self, "vertices", v)


def circle_curve(radius: float, vertices: int = 256, center=(0.0, 0.0)) -> CurveState:
    if radius <= 0:
        raise InvalidInputError(f"radius must be positive, got {radius}")
    theta = 2.0 * math.pi * np.arange(vertices) / vertices
    pts = np.column_stack([np.cos(theta), np.sin(theta)]) * radius + np.asarray(center, dtype=float)
    return CurveState(pts)


def ellipse_curve(a: float, b: float, vertices: int = 256) -> CurveState:
    """Ellipse with semi-axes a, b, resampled uniformly in arc length"""
    if a <= 0 or b <= 0:
        raise InvalidInputError(f"semi-axes must be positive, got {a}, {b}")
    theta = 2.0 * math.pi * np.arange(8 * vertices) / (8 * vertices)
    dense = np.column_stack([a * np.cos(theta), b * np.sin(theta)])
    return CurveState(redistribute(dense, vertices))


def signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def edge_lengths(v: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)


def self_intersects(v: np.ndarray) -> bool:
    """Whether two non-adjacent edges of the closed polygon cross"""
    a = v
    b = np.roll(v, -1, axis=0)
    m = len(v)

    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

    A1, B1 = a[:, None, :], b[:, None, :]
    A2, B2 = a[None, :, :], b[None, :, :]
    d1 = orient(A1, B1, A2)
    d2 = orient(A1, B1, B2)
    d3 = orient(A2, B2, A1)
    d4 = orient(A2, B2, B1)
    crossing = (d1 * d2 < 0) & (d3 * d4 < 0)
    idx = np.arange(m)
    gap = np.abs(idx[:, None] - idx[None, :])
    non_adjacent = (gap > 1) & (gap < m - 1)
    return bool(np.any(crossing & non_adjacent))


def curvature_vectors(v: np.ndarray) -> np.ndarray:
    """Discrete curvature vector 2/(|e-|+|e+|) (e+/|e+| - e-/|e-|), exact on regular polygons"""
    e_plus = np.roll(v, -1, axis=0) - v
    e_minus = v - np.roll(v, 1, axis=0)
    l_plus = np.linalg.norm(e_plus, axis=1)
    l_minus = np.linalg.norm(e_minus, axis=1)
    turn = e_plus / l_plus[:, None] - e_minus / l_minus[:, None]
    return 2.0 * turn / (l_plus + l_minus)[:, None]


def outward_normals(v: np.ndarray) -> np.ndarray:
    """Unit outward normals of a counter-clockwise polygon at its vertices"""
    tangent = np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)
    tangent /= np.linalg.norm(tangent, axis=1)[:, None]
    return np.column_stack([tangent[:, 1], -tangent[:, 0]])


def redistribute(v: np.ndarray, count: Optional[int] = None) -> np.ndarray:
    """Resample ``count`` points uniformly in arc length along a periodic cubic spline"""
    count = len(v) if count is None else count
    closed = np.vstack([v, v[:1]])
    s = np.concatenate([[0.0], np.cumsum(edge_lengths(v))])
    spline = CubicSpline(s, closed, bc_type="periodic")
    return spline(np.linspace(0.0, s[-1], count, endpoint=False))


def curve_slice(v: np.ndarray, t: float) -> VarifoldSlice:
    """Slice with dual arc-length weights and signed curvature (positive for convex)"""
    kappa_vec = curvature_vectors(v)
    normals = outward_normals(v)
    kappa = -np.sum(kappa_vec * normals, axis=1)
    lengths = edge_lengths(v)
    weights = 0.5 * (lengths + np.roll(lengths, 1))
    return VarifoldSlice(
        t=t, n=1, positions=v.copy(), weights=weights, normals=normals, principal_curvatures=kappa[:, None]
    )


def evolve_curve(
    initial: CurveState,
    dt_max: Optional[float],
    stop: StopRule,
    emit_dt: float = 0.05,
    redistribute_every: int = 20,
) -> FlowTrack:
    """Evolve by x_t = kappa vector until the stop rule fires

    dt_max=None uses the stability bound (min edge)^2 / 4 alone.
    """
    v = initial.vertices.copy()
    t = initial.t
    h_min = float(np.min(edge_lengths(v)))
    bound = STABILITY * h_min ** 2
    if dt_max is None:
        dt_max = bound
    if dt_max <= 0 or dt_max > bound * (1 + 1e-12):
        raise StepSizeError(f"dt_max={dt_max:.3g} violates (min edge)^2/4 = {bound:.3g}")

    first = curve_slice(v, t)
    slices: List[VarifoldSlice] = [first]
    mass_bound = first.mass * (1 + 1e-9)
    last_emit = t
    steps = 0
    reason = None
    logger.info(f"Curve flow start | vertices={len(v)}, t={t:.6g}, length={first.mass:.6g}")

    while True:
        kappa_vec = curvature_vectors(v)
        kmax = float(np.max(np.linalg.norm(kappa_vec, axis=1)))
        area = signed_area(v)
        reason = stop.check(t, kmax, area, steps)
        if reason is not None:
            break
        h_min = float(np.min(edge_lengths(v)))
        dt = min(dt_max, STABILITY * h_min ** 2)
        if math.isfinite(stop.t_end):
            dt = min(dt, stop.t_end - t)
        v = v + dt * kappa_vec
        t += dt
        steps += 1

        if steps % redistribute_every == 0:
            if self_intersects(v):
                raise SimulationDegenerateError("curve self-intersected", last_valid_time=slices[-1].t)
            v = redistribute(v)
        if t - last_emit >= min(emit_dt, CURVATURE_CADENCE / max(kmax, 1e-12) ** 2):
            slices.append(curve_slice(v, t))
            last_emit = t

    if slices[-1].t < t:
        slices.append(curve_slice(v, t))
    area = signed_area(v)
    vanished = reason in (StopReason.MAX_CURVATURE, StopReason.MIN_AREA)
    singular_times = ()
    singular_points = ()
    if vanished:
        # enclosed area decreases at the constant rate 2*pi
        t_sing = t + max(area, 0.0) / (2.0 * math.pi)
        singular_times = (t_sing,)
        singular_points = (SpacetimePoint(tuple(np.mean(v, axis=0)), t_sing),)
    logger.info(f"Curve flow stop | reason={reason.value}, t={t:.6g}, steps={steps}, slices={len(slices)}")
    return FlowTrack(
        slices=tuple(slices),
        n=1,
        N=2,
        mass_bound=mass_bound,
        singular_times=singular_times,
        singular_points=singular_points,
        closed=True,
        vanished=vanished,
        provenance={"simulator": "curve", "stop_reason": reason.value, "steps": str(steps)},
    )
