"""
Rotationally Symmetric Surface Flow

Mean curvature flow of closed surfaces of revolution in R^3 (n=2, N=3) about
the x_1-axis. The generating profile is a polyline in the (z, r) half-plane
running from pole to pole; interior vertices move by the profile curvature
vector plus the rotational curvature term, the poles move along the axis with
speed 2*kappa. Vertices are redistributed so that resolution follows the
curvature, which keeps a neck resolved down to the pinch threshold.

After a neckpinch the profile is split at the pinch and each piece continues
as its own closed surface (surgery-free restart).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from curve_flow import curvature_vectors, self_intersects
from errors import InvalidInputError, SimulationDegenerateError, StepSizeError
from simulator import StopReason, StopRule
from spacetime import SpacetimePoint
from varifold import FlowTrack, VarifoldSlice

logger = logging.getLogger(__name__)

MIN_PROFILE_VERTICES = 16
STABILITY = 0.2
CURVATURE_CADENCE = 0.05
PINCH_FRACTION = 1e-3


@dataclass(frozen=True, eq=False)
class ProfileState:
    """Generating profile: points (z_i, r_i) from pole to pole, r = 0 at both ends"""

    points: np.ndarray = field(repr=False)
    t: float = 0.0
    neck_radius: Optional[float] = None

    def __post_init__(self):
        P = np.asarray(self.points, dtype=float)
        if P.ndim != 2 or P.shape[1] != 2:
            raise InvalidInputError("profile points must be an (m, 2) array")
        if len(P) < MIN_PROFILE_VERTICES:
            raise InvalidInputError(f"profile needs at least {MIN_PROFILE_VERTICES} points")
        if abs(P[0, 1]) > 1e-12 or abs(P[-1, 1]) > 1e-12:
            raise InvalidInputError("profile must start and end on the axis")
        if np.any(P[1:-1, 1] <= 0):
            raise InvalidInputError("interior radii must be positive")
        if np.any(np.diff(P[:, 0]) <= 0):
            raise InvalidInputError("initial profile must be a graph over the axis (z strictly increasing)")
        P = P.copy()
        P[[0, -1], 1] = 0.0
        object.__setattr__(self, "points", P)

    @property
    def pinch_threshold(self) -> float:
        reference = self.neck_radius if self.neck_radius is not None else float(np.max(self.points[:, 1]))
        return PINCH_FRACTION * reference


def resample_profile(P: np.ndarray, count: int, density: Optional[np.ndarray] = None) -> np.ndarray:
    """Redistribute ``count`` points along the profile, equidistributing ``density`` x arc length"""
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    if np.any(seg <= 0):
        raise SimulationDegenerateError("profile has coincident vertices")
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if density is None:
        seg_w = seg
    else:
        seg_w = 0.5 * (density[:-1] + density[1:]) * seg
    cw = np.concatenate([[0.0], np.cumsum(seg_w)])
    s_new = np.interp(np.linspace(0.0, cw[-1], count), cw, s)
    spline = CubicSpline(s, P, axis=0)
    Q = spline(s_new)
    Q[0], Q[-1] = P[0], P[-1]
    Q[[0, -1], 1] = 0.0
    return Q


def sphere_profile(radius: float, vertices: int = 256, center: float = 0.0) -> ProfileState:
    if radius <= 0:
        raise InvalidInputError(f"radius must be positive, got {radius}")
    phi = math.pi * np.arange(vertices + 1) / vertices
    P = np.column_stack([center - radius * np.cos(phi), radius * np.sin(phi)])
    P[[0, -1], 1] = 0.0
    return ProfileState(P)


def dumbbell_neck_length(bell_radius: float, neck_radius: float) -> float:
    """Half-length c of the quartic neck, fixed by C^2 matching at the bell equators"""
    return math.sqrt(3.0 * bell_radius * (bell_radius - neck_radius))


def dumbbell_radius(z: np.ndarray, bell_radius: float, neck_radius: float) -> np.ndarray:
    """u(z): quartic neck 4.5s^2 - 5s^3 + 1.5s^4 for |z| < c, spherical bells centered at +-c"""
    c = dumbbell_neck_length(bell_radius, neck_radius)
    a = np.abs(np.asarray(z, dtype=float))
    s = np.clip(a / c, 0.0, 1.0)
    neck = neck_radius + (bell_radius - neck_radius) * (4.5 * s ** 2 - 5.0 * s ** 3 + 1.5 * s ** 4)
    bell = np.sqrt(np.clip(bell_radius ** 2 - (a - c) ** 2, 0.0, None))
    return np.where(a < c, neck, bell)


def dumbbell_profile(bell_radius: float = 2.0, neck_radius: float = 0.5, vertices: int = 256) -> ProfileState:
    """Symmetric dumbbell: two round bells joined by a C^2 quartic neck"""
    if not 0 < neck_radius < bell_radius:
        raise InvalidInputError(f"need 0 < neck_radius < bell_radius, got {neck_radius}, {bell_radius}")
    c = dumbbell_neck_length(bell_radius, neck_radius)
    dense = 16 * vertices
    # caps by angle so the poles are resolved, neck by z
    phi = np.linspace(0.0, 0.5 * math.pi, dense // 4, endpoint=False)
    left_cap = np.column_stack([-c - bell_radius * np.cos(phi), bell_radius * np.sin(phi)])
    z = np.linspace(-c, c, dense // 2)
    neck = np.column_stack([z, dumbbell_radius(z, bell_radius, neck_radius)])
    right_cap = np.column_stack([-left_cap[::-1, 0], left_cap[::-1, 1]])
    P = np.vstack([left_cap, neck, right_cap[:-1], [[c + bell_radius, 0.0]]])
    P[0, 1] = 0.0
    return ProfileState(resample_profile(P, vertices + 1), neck_radius=neck_radius)


def _profile_normals(P: np.ndarray) -> np.ndarray:
    """Outward unit normals (nu_z, nu_r) at interior vertices"""
    tangent = P[2:] - P[:-2]
    tangent /= np.linalg.norm(tangent, axis=1)[:, None]
    return np.column_stack([-tangent[:, 1], tangent[:, 0]])


def _pole_curvature(pole: np.ndarray, neighbor: np.ndarray) -> Tuple[float, float]:
    """Curvature of the axis-centered circle through the pole and its neighbor, and the circle center z"""
    z0, z1, r1 = pole[0], neighbor[0], neighbor[1]
    c = (z1 ** 2 + r1 ** 2 - z0 ** 2) / (2.0 * (z1 - z0))
    return 1.0 / abs(z0 - c), c


def profile_curvatures(P: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(kappa_profile, kappa_rotation, normals) at every vertex; poles get (kappa, kappa)"""
    m = len(P)
    k1 = np.zeros(m)
    k2 = np.zeros(m)
    normals = np.zeros((m, 2))
    nu = _profile_normals(P)
    kvec = _open_curvature_vectors(P)
    k1[1:-1] = -np.sum(kvec * nu, axis=1)
    k2[1:-1] = nu[:, 1] / P[1:-1, 1]
    normals[1:-1] = nu
    for pole, neighbor, direction in ((0, 1, -1.0), (m - 1, m - 2, 1.0)):
        kappa, _ = _pole_curvature(P[pole], P[neighbor])
        k1[pole] = k2[pole] = kappa
        normals[pole] = (direction, 0.0)
    return k1, k2, normals


def _open_curvature_vectors(P: np.ndarray) -> np.ndarray:
    """Discrete curvature vectors at the interior vertices of an open polyline"""
    return curvature_vectors(P)[1:-1]


def _velocity(P: np.ndarray) -> np.ndarray:
    m = len(P)
    V = np.zeros_like(P)
    nu = _profile_normals(P)
    kvec = _open_curvature_vectors(P)
    k2 = nu[:, 1] / P[1:-1, 1]
    V[1:-1] = kvec - k2[:, None] * nu
    for pole, neighbor in ((0, 1), (m - 1, m - 2)):
        kappa, c = _pole_curvature(P[pole], P[neighbor])
        V[pole, 0] = 2.0 * kappa * math.copysign(1.0, c - P[pole, 0])
    return V


def _curvature_density(P: np.ndarray) -> np.ndarray:
    k1, k2, _ = profile_curvatures(P)
    length = float(np.sum(np.linalg.norm(np.diff(P, axis=0), axis=1)))
    return np.sqrt(k1 ** 2 + k2 ** 2) + 1.0 / length


def _embedded(P: np.ndarray) -> bool:
    mirror = P[-2:0:-1] * np.array([1.0, -1.0])
    return not self_intersects(np.vstack([P, mirror]))


def profile_area(P: np.ndarray) -> float:
    """Area of the surface of revolution (trapezoid rule on 2 pi r ds)"""
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    return float(np.sum(math.pi * (P[:-1, 1] + P[1:, 1]) * seg))


def _dual_lengths(P: np.ndarray) -> np.ndarray:
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    dual = np.zeros(len(P))
    dual[:-1] += 0.5 * seg
    dual[1:] += 0.5 * seg
    return dual


def sample_mass(P: np.ndarray) -> float:
    """Total weight of the revolved samples of P, independent of n_theta"""
    dual = _dual_lengths(P)
    return float(2.0 * math.pi * np.dot(P[1:-1, 1], dual[1:-1]) + math.pi * (dual[0] ** 2 + dual[-1] ** 2))


def surface_samples(P: np.ndarray, n_theta: int) -> Tuple[np.ndarray, ...]:
    """Positions, weights, normals and sorted principal curvatures of the revolved profile"""
    k1, k2, nu = profile_curvatures(P)
    dual = _dual_lengths(P)
    theta = 2.0 * math.pi * (np.arange(n_theta) + 0.5) / n_theta
    cos_t, sin_t = np.cos(theta), np.sin(theta)

    inner = P[1:-1]
    zz = np.repeat(inner[:, 0], n_theta)
    rr = np.repeat(inner[:, 1], n_theta)
    ct = np.tile(cos_t, len(inner))
    st = np.tile(sin_t, len(inner))
    positions = np.column_stack([zz, rr * ct, rr * st])
    weights = 2.0 * math.pi * rr * np.repeat(dual[1:-1], n_theta) / n_theta
    nz = np.repeat(nu[1:-1, 0], n_theta)
    nr = np.repeat(nu[1:-1, 1], n_theta)
    normals = np.column_stack([nz, nr * ct, nr * st])
    lam = np.sort(np.column_stack([np.repeat(k1[1:-1], n_theta), np.repeat(k2[1:-1], n_theta)]), axis=1)

    poles = [0, len(P) - 1]
    pole_pos = np.column_stack([P[poles, 0], np.zeros(2), np.zeros(2)])
    pole_w = math.pi * dual[poles] ** 2
    pole_n = np.column_stack([nu[poles, 0], np.zeros(2), np.zeros(2)])
    pole_lam = np.column_stack([k1[poles], k2[poles]])
    return (
        np.vstack([pole_pos[:1], positions, pole_pos[1:]]),
        np.concatenate([pole_w[:1], weights, pole_w[1:]]),
        np.vstack([pole_n[:1], normals, pole_n[1:]]),
        np.vstack([pole_lam[:1], lam, pole_lam[1:]]),
    )


def rotsym_slice(pieces: Sequence[np.ndarray], t: float, n_theta: int) -> VarifoldSlice:
    if not pieces:
        return VarifoldSlice.empty(t, 2, 3)
    parts = [surface_samples(P, n_theta) for P in pieces]
    return VarifoldSlice(
        t=t,
        n=2,
        positions=np.vstack([p[0] for p in parts]),
        weights=np.concatenate([p[1] for p in parts]),
        normals=np.vstack([p[2] for p in parts]),
        principal_curvatures=np.vstack([p[3] for p in parts]),
    )


def _max_curvature(P: np.ndarray) -> float:
    k1, k2, _ = profile_curvatures(P)
    return float(np.max(np.sqrt(k1 ** 2 + k2 ** 2)))


def _pinch_index(P: np.ndarray, threshold: float) -> Optional[int]:
    """Vertex of a neck thinner than threshold: r below it with r rising past 4r on both sides"""
    r = P[:, 1]
    left_max = np.maximum.accumulate(r)
    right_max = np.maximum.accumulate(r[::-1])[::-1]
    inner = np.arange(2, len(P) - 2)
    neck = (r[inner] < threshold) & (left_max[inner - 1] > 4 * r[inner]) & (right_max[inner + 1] > 4 * r[inner])
    if not np.any(neck):
        return None
    hits = inner[neck]
    return int(hits[np.argmin(r[hits])])


def dilate_profile(P: np.ndarray, factor: float) -> np.ndarray:
    """Homothety about the axis point below the mean z; sample_mass scales by factor^2"""
    center = np.array([float(np.mean(P[:, 0])), 0.0])
    return center + factor * (P - center)


def cap_mass(pieces: List[np.ndarray], budget: float) -> List[np.ndarray]:
    """Shrink the pieces by a common homothety so their total sample_mass does not exceed budget"""
    mass = sum(sample_mass(P) for P in pieces)
    if mass <= budget:
        return pieces
    factor = math.sqrt(budget / mass)
    logger.debug(f"Resample capped | mass={mass:.8g}, budget={budget:.8g}, factor={factor:.8f}")
    return [dilate_profile(P, factor) for P in pieces]


def redistribute(P: np.ndarray, count: int) -> np.ndarray:
    """Curvature-equidistributed resample of P that never adds sample mass"""
    return cap_mass([resample_profile(P, count, _curvature_density(P))], sample_mass(P))[0]


def _split_at(P: np.ndarray, i: int, count: int) -> List[np.ndarray]:
    """Two closed profiles obtained by cutting at interior vertex i, together no heavier than P"""
    left = P[: i + 1].copy()
    right = P[i:].copy()
    left[-1, 1] = 0.0
    right[0, 1] = 0.0
    pieces = []
    for piece in (left, right):
        if len(piece) >= 4:
            pieces.append(resample_profile(piece, count, _curvature_density(piece)))
    return cap_mass(pieces, sample_mass(P))


def evolve_rotsym(
    initial: ProfileState,
    dt_max: Optional[float],
    stop: StopRule,
    n_theta: int = 16,
    emit_dt: float = 0.05,
    redistribute_every: int = 10,
    continue_after_pinch: bool = True,
    profile_log: Optional[List[Tuple[float, List[np.ndarray]]]] = None,
) -> FlowTrack:
    """Evolve the surface of revolution until the stop rule fires or every piece vanishes

    When ``profile_log`` is given, (t, pieces) is appended for every emitted slice.
    """
    count = len(initial.points)
    pieces = [initial.points.copy()]
    threshold = initial.pinch_threshold
    t = initial.t

    h_min = float(np.min(np.linalg.norm(np.diff(pieces[0], axis=0), axis=1)))
    bound = STABILITY * h_min ** 2
    if dt_max is None:
        dt_max = bound
    if dt_max <= 0 or dt_max > bound * (1 + 1e-12):
        raise StepSizeError(f"dt_max={dt_max:.3g} violates 0.2 (min edge)^2 = {bound:.3g}")

    slices: List[VarifoldSlice] = []

    def emit():
        slices.append(rotsym_slice(pieces, t, n_theta))
        if profile_log is not None:
            profile_log.append((t, [P.copy() for P in pieces]))

    emit()
    first = slices[0]
    mass_bound = first.mass * (1 + 1e-9)
    singular_times: List[float] = []
    singular_points: List[SpacetimePoint] = []
    last_emit = t
    steps = 0
    reason = None
    continuation = "none"
    logger.info(f"Rotsym flow start | vertices={count}, area={first.mass:.6g}, threshold={threshold:.3g}")

    while True:
        kmax = max(_max_curvature(P) for P in pieces)
        area = sum(profile_area(P) for P in pieces)
        reason = stop.check(t, kmax, area, steps)
        if reason is not None:
            break

        h_min = min(float(np.min(np.linalg.norm(np.diff(P, axis=0), axis=1))) for P in pieces)
        dt = min(dt_max, STABILITY * h_min ** 2)
        if math.isfinite(stop.t_end):
            dt = min(dt, stop.t_end - t)
        pieces = [P + dt * _velocity(P) for P in pieces]
        t += dt
        steps += 1

        survivors: List[np.ndarray] = []
        pinched = False
        for P in pieces:
            if not np.all(np.isfinite(P)):
                raise SimulationDegenerateError("non-finite profile", last_valid_time=slices[-1].t)
            r_inner = P[1:-1, 1]
            if float(np.max(P[:, 1])) < threshold:
                # piece shrank to a point: round vanishing, R^2 = 4 (T - t)
                t_sing = t + float(np.max(P[:, 1])) ** 2 / 4.0
                singular_times.append(t_sing)
                singular_points.append(SpacetimePoint((float(np.mean(P[:, 0])), 0.0, 0.0), t_sing))
                logger.info(f"Component vanished | t={t_sing:.6g}, z={np.mean(P[:, 0]):.4g}")
                continue
            i = _pinch_index(P, threshold)
            if i is not None:
                u = float(P[i, 1])
                # cylinder law u^2 = 2 (T - t)
                t_sing = t + u ** 2 / 2.0
                singular_times.append(t_sing)
                singular_points.append(SpacetimePoint((float(P[i, 0]), 0.0, 0.0), t_sing))
                pinched = True
                logger.info(f"Neckpinch | t={t_sing:.6g}, z={P[i, 0]:.6g}, u={u:.3g}")
                if continue_after_pinch:
                    try:
                        survivors.extend(_split_at(P, i, count))
                        continuation = "split"
                    except SimulationDegenerateError as e:
                        logger.warning(f"Continuation after pinch failed: {e}")
                        continuation = "failed"
                continue
            if np.any(r_inner <= 0):
                raise SimulationDegenerateError("profile crossed the axis", last_valid_time=slices[-1].t)
            survivors.append(P)
        pieces = survivors

        if pinched:
            emit()
            last_emit = t
            if not continue_after_pinch or continuation == "failed":
                reason = StopReason.PINCH
                break
        if not pieces:
            if slices[-1].t < t:
                emit()
            reason = StopReason.VANISHED
            break

        if steps % redistribute_every == 0:
            check = steps % (10 * redistribute_every) == 0
            for P in pieces:
                if check and not _embedded(P):
                    raise SimulationDegenerateError("surface is no longer embedded", last_valid_time=slices[-1].t)
            pieces = [redistribute(P, count) for P in pieces]
        if t - last_emit >= min(emit_dt, CURVATURE_CADENCE / max(kmax, 1e-12) ** 2):
            emit()
            last_emit = t

    if slices[-1].t < t:
        emit()
    vanished = reason in (StopReason.VANISHED, StopReason.MIN_AREA, StopReason.MAX_CURVATURE)
    if vanished and pieces:
        for P in pieces:
            t_sing = t + float(np.max(P[:, 1])) ** 2 / 4.0
            singular_times.append(t_sing)
            singular_points.append(SpacetimePoint((float(np.mean(P[:, 0])), 0.0, 0.0), t_sing))
    order = np.argsort(singular_times, kind="stable")
    logger.info(f"Rotsym flow stop | reason={reason.value}, t={t:.6g}, steps={steps}, slices={len(slices)}")
    return FlowTrack(
        slices=tuple(slices),
        n=2,
        N=3,
        mass_bound=mass_bound,
        singular_times=tuple(singular_times[i] for i in order),
        singular_points=tuple(singular_points[i] for i in order),
        closed=True,
        vanished=vanished,
        provenance={
            "simulator": "rotsym",
            "stop_reason": reason.value,
            "steps": str(steps),
            "continuation": continuation,
        },
    )


def neck_radius_history(flow: FlowTrack) -> Tuple[np.ndarray, np.ndarray]:
    """(t, min distance to the axis over samples in the middle half of the initial z extent)"""
    times, radii = [], []
    z = flow.slices[0].positions[:, 0]
    mid, quarter = 0.5 * (z.min() + z.max()), 0.25 * (z.max() - z.min())
    for s in flow.slices:
        if s.is_empty:
            continue
        rho = np.linalg.norm(s.positions[:, 1:], axis=1)
        middle = np.abs(s.positions[:, 0] - mid) <= quarter
        off_axis = rho[middle & (rho > 0)]
        if off_axis.size == 0:
            continue
        times.append(s.t)
        radii.append(float(np.min(off_axis)))
    return np.array(times), np.array(radii)
