"""
Regularity Scale and Curvature Statistics

Regularity scale r_M(X), r-bad sets, the epsilon-regularity implication,
L^p norms of the second fundamental form and of r_M^{-1}, the shrinking
cylinder sharpness study and scale-invariant derivative bounds.

A radius r is certified at X when, on every slice with |t - t_X| <= r^2,
the samples in B_r(x) satisfy r |A| <= 1 and all have normals within 90
degrees of the normal at X, so the piece is a graph over the tangent plane.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid

from brakke_distance import TestFunctionFamily
from covering import CELLS_PER_RADIUS, ExponentFit, minkowski_exponent_fit, tubular_volume
from curve_flow import curve_slice, ellipse_curve
from errors import DataMissingError, InvalidInputError, OutOfRangeError, PrecisionError
from model_catalog import ModelKind, make_model, model_slice
from parallel import parallel_map
from selfsimilar_fit import fit_selfsimilar
from spacetime import SpacetimePoint, unit_sphere_area
from varifold import FlowTrack, VarifoldSlice

logger = logging.getLogger(__name__)

SEARCH_LEVELS = 12
# X counts as on the support within this many local sample spacings
SUPPORT_SPACINGS = 3.0
SHARPNESS_TAUS = (1e-2, 1e-4, 1e-6, 1e-8)
SHARPNESS_CAUCHY = 0.05
SHARPNESS_GROWTH = 2.0
CALIBRATION_SLACK = 1.5
CALIBRATION_ELLIPSES = ((1.0, 1.5), (1.0, 2.0), (1.0, 3.0))
CALIBRATION_VERTICES = 1024


def _support_sample(flow: FlowTrack, X: SpacetimePoint) -> Tuple[VarifoldSlice, int]:
    if X.N != flow.N:
        raise InvalidInputError(f"dimension mismatch: point has N={X.N}, flow has N={flow.N}")
    if not flow.slices or X.t < flow.t_min - 1e-12 or X.t > flow.t_max + 1e-12:
        raise InvalidInputError(f"t={X.t:.6g} is outside the sampled slices")
    s = flow.slice_nearest(X.t)
    if s.is_empty:
        raise InvalidInputError(f"no surface at t={X.t:.6g}")
    idx, dist = s.nearest(X.position)
    spacing = float(s.weights[idx]) ** (1.0 / flow.n)
    if dist > SUPPORT_SPACINGS * spacing + 1e-12:
        raise InvalidInputError(f"point is {dist:.3g} away from the support at t={s.t:.6g}")
    return s, idx


def _certified(flow: FlowTrack, X: SpacetimePoint, r: float, normal: np.ndarray, a_at_x: float) -> Tuple[bool, float]:
    """(certified, max r|A| over the parabolic ball)"""
    if r * a_at_x > 1.0:
        return False, r * a_at_x
    worst = r * a_at_x
    window = [s for s in flow.slices if abs(s.t - X.t) <= r * r + 1e-15]
    if not window:
        window = [flow.slice_nearest(X.t)]
    for s in window:
        idx = s.ball_indices(X.position, r)
        if idx.size == 0:
            continue
        worst = max(worst, r * float(np.max(s.curvature_norm()[idx])))
        if worst > 1.0:
            return False, worst
        if np.any(s.normals[idx] @ normal <= 0.0):
            return False, worst
    return True, worst


@dataclass
class RegularityPoint:
    X: SpacetimePoint
    r_M: float
    curvature: float
    worst: float


def regularity_point(flow: FlowTrack, X: SpacetimePoint) -> RegularityPoint:
    """r_M(X) with |A|(X) and the max of r|A| over the certifying ball"""
    if not flow.has_curvature:
        raise DataMissingError("regularity scale needs curvature data")
    s, idx = _support_sample(flow, X)
    if s.normals is None:
        raise DataMissingError("regularity scale needs sample normals")
    normal = s.normals[idx]
    a_at_x = float(s.curvature_norm()[idx])

    ok, worst = _certified(flow, X, 1.0, normal, a_at_x)
    if ok:
        return RegularityPoint(X, 1.0, a_at_x, worst)
    lo, hi, lo_worst = 0, 2 ** SEARCH_LEVELS, 0.0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        ok, w = _certified(flow, X, mid / 2 ** SEARCH_LEVELS, normal, a_at_x)
        if ok:
            lo, lo_worst = mid, w
        else:
            hi = mid
    return RegularityPoint(X, lo / 2 ** SEARCH_LEVELS, a_at_x, lo_worst)


def regularity_scale(flow: FlowTrack, X: SpacetimePoint) -> float:
    """r_M(X) on the grid k 2^-12, capped at 1"""
    return regularity_point(flow, X).r_M


@dataclass
class RegularityField:
    """r_M, |A| and certifying max r|A| per sampled point"""

    entries: List[RegularityPoint] = field(default_factory=list)

    @property
    def points(self) -> List[SpacetimePoint]:
        return [e.X for e in self.entries]

    @property
    def scales(self) -> np.ndarray:
        return np.array([e.r_M for e in self.entries])

    def domination_violations(self) -> List[int]:
        return [i for i, e in enumerate(self.entries) if e.r_M * e.curvature > 1.0]

    def bad(self, r: float) -> List[SpacetimePoint]:
        return [e.X for e in self.entries if e.r_M <= r]

    def to_rows(self) -> List[Dict[str, Any]]:
        return [
            {
                "point": i,
                "x": " ".join(f"{c:.17g}" for c in e.X.x),
                "t": e.X.t,
                "r_M": e.r_M,
                "A": e.curvature,
                "max_rA": e.worst,
            }
            for i, e in enumerate(self.entries)
        ]


def regularity_field(flow: FlowTrack, points: Sequence[SpacetimePoint]) -> RegularityField:
    entries = parallel_map(lambda X: regularity_point(flow, X), points)
    logger.info(f"Regularity field | points={len(entries)}")
    return RegularityField(entries)


def bad_set(
    flow: FlowTrack, r: float, samples: Sequence[SpacetimePoint], field_: Optional[RegularityField] = None
) -> List[SpacetimePoint]:
    """{X in samples : r_M(X) <= r}"""
    if field_ is None:
        field_ = regularity_field(flow, samples)
    return field_.bad(r)


def bad_set_volume_exponent(
    flow: FlowTrack,
    samples: Sequence[SpacetimePoint],
    radii: Sequence[float],
    field_: Optional[RegularityField] = None,
    cells_per_radius: int = CELLS_PER_RADIUS,
) -> ExponentFit:
    """Slope of log Vol(T_r(B_r)) against log r"""
    field_ = field_ or regularity_field(flow, samples)
    pairs = []
    for r in radii:
        bad = field_.bad(r)
        volume = tubular_volume(bad, r, cell=r / cells_per_radius, N=flow.N).value if bad else 0.0
        logger.debug(f"Bad set | r={r:.4g}, points={len(bad)}, volume={volume:.4g}")
        pairs.append((r, volume))
    return minkowski_exponent_fit(pairs)


def _epsilon_premise(
    flow: FlowTrack, X: SpacetimePoint, r: float, k: int, epsilon: float, fam: Optional[TestFunctionFamily]
) -> Tuple[bool, float]:
    scale = r / epsilon
    if scale > 1.0:
        raise OutOfRangeError(f"fit scale r/epsilon={scale:.4g} exceeds the unit window")
    result = fit_selfsimilar(flow, X, scale, k, fam)
    return (not result.empty and result.dist < epsilon), result.dist


def epsilon_regularity_check(
    flow: FlowTrack,
    X: SpacetimePoint,
    r: float,
    k: int,
    epsilon: float,
    fam: Optional[TestFunctionFamily] = None,
    r_M: Optional[float] = None,
) -> bool:
    """Whether a k-selfsimilar fit within epsilon at scale r/epsilon implies r_M(X) >= r"""
    premise, dist = _epsilon_premise(flow, X, r, k, epsilon, fam)
    if not premise:
        return True
    r_M = regularity_scale(flow, X) if r_M is None else r_M
    if r_M < r:
        logger.warning(f"Epsilon-regularity failed | t={X.t:.6g}, dist={dist:.3g}, r_M={r_M:.4g}, r={r:.4g}")
    return r_M >= r


def calibrate_epsilon(
    flow: FlowTrack,
    points: Sequence[SpacetimePoint],
    r: float,
    k: int,
    candidates: Sequence[float] = (0.5, 0.3, 0.2, 0.1, 0.05),
    fam: Optional[TestFunctionFamily] = None,
) -> Tuple[Optional[float], Dict[float, Dict[str, int]]]:
    """Largest candidate epsilon for which the implication held at every point"""
    field_ = regularity_field(flow, points)
    table: Dict[float, Dict[str, int]] = {}
    best: Optional[float] = None
    for eps in sorted(candidates, reverse=True):
        if r / eps > 1.0:
            continue

        def check(entry: RegularityPoint, eps=eps) -> Tuple[bool, bool]:
            premise, _ = _epsilon_premise(flow, entry.X, r, k, eps, fam)
            return premise, (not premise) or entry.r_M >= r

        outcomes = parallel_map(check, field_.entries)
        applied = sum(p for p, _ in outcomes)
        held = sum(h for _, h in outcomes)
        table[eps] = {"points": len(outcomes), "premise": applied, "held": held}
        if held == len(outcomes) and best is None:
            best = eps
    logger.info(f"Calibrated epsilon | k={k}, r={r:.4g}, epsilon={best}")
    return best, table


def _slice_values(s: VarifoldSlice, p: float) -> float:
    return s.integrate_values(s.curvature_norm() ** p)


def lp_curvature_norm(
    flow: FlowTrack,
    p: float,
    mode: str = "slice",
    t: Optional[float] = None,
    t_range: Optional[Tuple[float, float]] = None,
) -> float:
    """int |A|^p dM_t (slice) or int int |A|^{p+2} dM_t dt (spacetime, trapezoid in t)"""
    if p <= 0:
        raise InvalidInputError(f"p must be positive, got {p}")
    if not flow.has_curvature:
        raise DataMissingError("L^p norms need curvature data")
    if mode == "slice":
        if t is None:
            raise InvalidInputError("slice mode needs a time")
        return sum(w * _slice_values(s, p) for s, w in flow.bracket(t) if w > 0 and not s.is_empty)
    if mode == "spacetime":
        slices = _spacetime_slices(flow, t_range)
        values = [0.0 if s.is_empty else _slice_values(s, p + 2.0) for s in slices]
        return _time_integral(slices, values)
    raise InvalidInputError(f"unknown mode {mode!r}, use 'slice' or 'spacetime'")


def _spacetime_slices(flow: FlowTrack, t_range: Optional[Tuple[float, float]]) -> List[VarifoldSlice]:
    if t_range is None:
        return list(flow.slices)
    lo, hi = t_range
    return [s for s in flow.slices if lo <= s.t <= hi]


def _time_integral(slices: Sequence[VarifoldSlice], values: Sequence[float]) -> float:
    if len(slices) < 2:
        return 0.0
    return float(trapezoid(values, [s.t for s in slices]))


def _inverse_scale_integral(flow: FlowTrack, s: VarifoldSlice, power: float, stride: int) -> float:
    if s.is_empty:
        return 0.0
    idx = np.arange(0, s.size, stride)
    points = [SpacetimePoint(tuple(s.positions[i]), s.t) for i in idx]
    scales = np.array([e.r_M for e in regularity_field(flow, points).entries])
    if np.any(scales <= 0):
        return math.inf
    weights = s.weights[idx] * (s.size / len(idx))
    return float(np.dot(weights, scales ** (-power)))


def lp_inverse_regscale(
    flow: FlowTrack,
    p: float,
    mode: str = "slice",
    t: Optional[float] = None,
    t_range: Optional[Tuple[float, float]] = None,
    stride: int = 1,
) -> float:
    """int r_M^{-p} dM_t (slice, nearest slice to t) or int int r_M^{-(p+2)} dM_t dt (spacetime)"""
    if p <= 0:
        raise InvalidInputError(f"p must be positive, got {p}")
    if not flow.has_curvature:
        raise DataMissingError("L^p norms need curvature data")
    if mode == "slice":
        if t is None:
            raise InvalidInputError("slice mode needs a time")
        return _inverse_scale_integral(flow, flow.slice_nearest(t), p, stride)
    if mode == "spacetime":
        slices = _spacetime_slices(flow, t_range)
        values = [_inverse_scale_integral(flow, s, p + 2.0, stride) for s in slices]
        return _time_integral(slices, values)
    raise InvalidInputError(f"unknown mode {mode!r}, use 'slice' or 'spacetime'")


def critical_exponent(n: int, k: int) -> int:
    """n + 1 - k: dimension of the sphere factor of R^{k-1} x S^{n+1-k}"""
    if not 1 <= k <= n:
        raise InvalidInputError(f"need 1 <= k <= n, got k={k}, n={n}")
    return n + 1 - k


def sharpness_oracle(n: int, k: int, p: float, tau: float) -> float:
    """Closed form of int_{-1}^{-tau} int_{unit box} |A|^{p+2} dM_t dt on R^{k-1} x S^{n+1-k}"""
    m = critical_exponent(n, k)
    e = (m - p - 2.0) / 2.0
    prefactor = unit_sphere_area(m) * m ** ((p + 2.0) / 2.0) * (2.0 * m) ** e
    if abs(e + 1.0) < 1e-12:
        return prefactor * math.log(1.0 / tau)
    return prefactor * (1.0 - tau ** (e + 1.0)) / (e + 1.0)


def _cylinder_model(n: int, k: int, resolution: int):
    if k == 1:
        return make_model(ModelKind.SHRINKER_SPHERE, n, resolution=resolution)
    # scale 1/2 makes the flat factor the unit box
    return make_model(ModelKind.SHRINKER_CYLINDER, n, j=k - 1, scale=0.5, resolution=resolution)


@dataclass
class SharpnessVerdict:
    verdict: str
    n: int
    k: int
    p: float
    taus: List[float]
    values: List[float]
    oracle: List[float]

    def as_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict,
            "n": self.n,
            "k": self.k,
            "p": self.p,
            "taus": self.taus,
            "values": self.values,
            "oracle": self.oracle,
        }


def cylinder_spacetime_integral(
    n: int, k: int, p: float, tau: float, per_decade: int = 32, resolution: int = 32
) -> float:
    """Quadrature of the sharpness integral from sampled cylinder slices, log-spaced in -t"""
    model = _cylinder_model(n, k, resolution)
    decades = math.log10(1.0 / tau)
    count = max(int(math.ceil(decades * per_decade)) + 1, 2)
    u = np.linspace(math.log(tau), 0.0, count)
    values = []
    for ui in u:
        s = model_slice(model, -math.exp(ui))
        values.append(_slice_values(s, p + 2.0) * math.exp(ui))
    return float(trapezoid(values, u))


def sharpness_study(
    n: int, k: int, p: float, taus: Sequence[float] = SHARPNESS_TAUS, resolution: int = 32
) -> SharpnessVerdict:
    """converges iff p < n+1-k, diverges iff p > n+1-k, judged from the tau ladder"""
    m = critical_exponent(n, k)
    if abs(p - m) < 1e-12:
        raise InvalidInputError(f"p={p} is the critical exponent n+1-k={m}")
    taus = sorted(taus, reverse=True)
    values = [cylinder_spacetime_integral(n, k, p, tau, resolution=resolution) for tau in taus]
    oracle = [sharpness_oracle(n, k, p, tau) for tau in taus]
    increments = np.diff(values)
    ratios = [b / a for a, b in zip(values, values[1:])]
    if increments[-1] / values[-1] < SHARPNESS_CAUCHY and np.all(np.diff(increments) < 0):
        verdict = "converges"
    elif all(ratio >= SHARPNESS_GROWTH for ratio in ratios):
        verdict = "diverges"
    else:
        verdict = "inconclusive"
        logger.warning(f"Sharpness study inconclusive | n={n}, k={k}, p={p}")
    logger.info(f"Sharpness | n={n}, k={k}, p={p}, verdict={verdict}")
    return SharpnessVerdict(verdict, n, k, p, list(taus), values, oracle)


def _tangent_basis(normal: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(np.column_stack([normal, np.eye(len(normal))]))
    return q[:, 1:len(normal)]


def _quadratic_design(u: np.ndarray) -> np.ndarray:
    n = u.shape[1]
    cols = [np.ones(len(u))] + [u[:, i] for i in range(n)]
    cols += [u[:, i] * u[:, j] for i in range(n) for j in range(i, n)]
    return np.column_stack(cols)


def derivative_norm(s: VarifoldSlice, x: np.ndarray, radius: float, normal: np.ndarray, ell: int) -> float:
    """sup over B_radius(x) of |nabla^ell A| from a quadratic fit of each principal curvature"""
    if ell not in (1, 2):
        raise InvalidInputError(f"derivative order must be 1 or 2, got {ell}")
    lam = s.require_principal_curvatures()
    idx = s.ball_indices(x, radius)
    n = s.n
    coeffs = 1 + n + n * (n + 1) // 2
    if idx.size < 2 * coeffs:
        raise PrecisionError(f"{idx.size} samples in the ball, need {2 * coeffs} for order {ell} differences")
    u = (s.positions[idx] - x) @ _tangent_basis(normal)[:, :n]
    design = _quadratic_design(u)
    fit, *_ = np.linalg.lstsq(design, lam[idx], rcond=None)
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    hessians = np.zeros((lam.shape[1], n, n))
    for c, (i, j) in enumerate(pairs):
        value = fit[1 + n + c]
        hessians[:, i, j] += value if i != j else 2.0 * value
        if i != j:
            hessians[:, j, i] += value
    if ell == 2:
        return float(np.sqrt(np.sum(hessians ** 2)))
    grads = fit[1:1 + n].T[None, :, :] + np.einsum("kij,mj->mki", hessians, u)
    return float(np.max(np.sqrt(np.sum(grads ** 2, axis=(1, 2)))))


@lru_cache(maxsize=1)
def derivative_constants() -> Dict[int, float]:
    """C_1, C_2: slack times the max r^{l+1} |nabla^l A| over exact ellipses, r = 1/max curvature"""
    observed = {1: 0.0, 2: 0.0}
    for a, b in CALIBRATION_ELLIPSES:
        s = curve_slice(ellipse_curve(a, b, CALIBRATION_VERTICES).vertices, 0.0)
        r = 1.0 / float(np.max(s.curvature_norm()))
        for i in range(0, s.size, s.size // 16):
            for ell in (1, 2):
                value = r ** (ell + 1) * derivative_norm(s, s.positions[i], r / 2.0, s.normals[i], ell)
                observed[ell] = max(observed[ell], value)
    constants = {ell: CALIBRATION_SLACK * max(v, 1e-12) for ell, v in observed.items()}
    logger.info(f"Derivative constants calibrated | C1={constants[1]:.4g}, C2={constants[2]:.4g}")
    return constants


def derivative_bounds_check(
    flow: FlowTrack, X: SpacetimePoint, ell: int, r: Optional[float] = None
) -> Tuple[float, float]:
    """(r^{l+1} sup_{B_{r/2}(X)} |nabla^l A|, ratio to C_l) at r = r_M(X) unless given"""
    if r is None:
        r = regularity_scale(flow, X)
    if r <= 0:
        raise InvalidInputError("point lies in every bad set")
    s, idx = _support_sample(flow, X)
    if s.normals is None:
        raise DataMissingError("derivative bounds need sample normals")
    value = r ** (ell + 1) * derivative_norm(s, X.position, r / 2.0, s.normals[idx], ell)
    return value, value / derivative_constants()[ell]
