"""
Gaussian Density and Huisken Energy

Backwards heat kernel, the localizing cutoff, Gaussian density at a scale
and its tau -> 0 limit, the (r1, r2)-Huisken energy and density ratios.
Densities of a FlowTrack at times between slices interpolate linearly in
measure.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import InvalidInputError, OutOfRangeError
from parallel import parallel_map
from spacetime import SpacetimePoint, unit_sphere_area
from varifold import FlowTrack

logger = logging.getLogger(__name__)

TAU_BASE = 0.25
TAU_RATIO = 2.0
LIMIT_TOLERANCE = 1e-3
MAX_LEVELS = 30


def heat_kernel_weight(X0: SpacetimePoint, x: Sequence[float], t: float, n: int) -> float:
    """(4 pi (t0 - t))^{-n/2} exp(-|x - x0|^2 / 4 (t0 - t))"""
    if t >= X0.t:
        raise InvalidInputError(f"heat kernel needs t < t0, got t={t:.6g}, t0={X0.t:.6g}")
    tau = X0.t - t
    d2 = float(np.sum((np.asarray(x, dtype=float) - X0.position) ** 2))
    return (4.0 * math.pi * tau) ** (-n / 2.0) * math.exp(-d2 / (4.0 * tau))


def cutoff_weight(X0: SpacetimePoint, x: Sequence[float], t: float, n: int) -> float:
    """(1 - |x - x0|^2 - 2n (t - t0))_+^3"""
    d2 = float(np.sum((np.asarray(x, dtype=float) - X0.position) ** 2))
    return max(1.0 - d2 - 2.0 * n * (t - X0.t), 0.0) ** 3


def density_integrand(X0: SpacetimePoint, tau: float, n: int, localized: bool):
    """Vectorized phi * rho (or rho alone) at time t0 - tau, as a function of positions"""
    x0 = X0.position
    prefactor = (4.0 * math.pi * tau) ** (-n / 2.0)

    def integrand(positions: np.ndarray) -> np.ndarray:
        d2 = np.sum((positions - x0) ** 2, axis=1)
        rho = prefactor * np.exp(-d2 / (4.0 * tau))
        if not localized:
            return rho
        return rho * np.clip(1.0 - d2 + 2.0 * n * tau, 0.0, None) ** 3

    return integrand


def gaussian_density_at_scale(flow: FlowTrack, X0: SpacetimePoint, tau: float, localized: bool = True) -> float:
    """Theta(M, X0, tau) = integral of phi rho (or rho) against M_{t0 - tau}"""
    if tau <= 0:
        raise InvalidInputError(f"tau must be positive, got {tau}")
    if X0.N != flow.N:
        raise InvalidInputError(f"dimension mismatch: point has N={X0.N}, flow has N={flow.N}")
    return flow.integrate(X0.t - tau, density_integrand(X0, tau, flow.n, localized))


def gaussian_density_oracle(n: int) -> float:
    """Gaussian density of the round shrinking S^n (and of every R^j x S^n cylinder)"""
    return (4.0 * math.pi) ** (-n / 2.0) * unit_sphere_area(n) * (2.0 * n) ** (n / 2.0) * math.exp(-n / 2.0)


@dataclass
class DensityProfile:
    """Theta sampled along a tau ladder at one base point"""

    base: SpacetimePoint
    taus: List[float] = field(default_factory=list)
    thetas: List[float] = field(default_factory=list)
    localized: bool = True

    def monotone(self, tol: float = LIMIT_TOLERANCE) -> bool:
        """Theta non-increasing as tau decreases, within tol"""
        order = np.argsort(self.taus)[::-1]
        values = np.asarray(self.thetas)[order]
        return bool(np.all(np.diff(values) <= tol))

    def to_rows(self) -> List[Dict[str, Any]]:
        localized = int(self.localized)
        return [{"tau": tau, "theta": theta, "localized": localized} for tau, theta in zip(self.taus, self.thetas)]


@dataclass
class DensityLimit:
    value: float
    converged: bool
    profile: DensityProfile
    reason: str = ""


def density_profile(
    flow: FlowTrack, X0: SpacetimePoint, taus: Sequence[float], localized: bool = True
) -> DensityProfile:
    """Theta at each tau that the flow covers; uncovered scales are skipped"""
    profile = DensityProfile(base=X0, localized=localized)
    for tau in taus:
        try:
            theta = gaussian_density_at_scale(flow, X0, tau, localized)
        except OutOfRangeError:
            logger.debug(f"Density scale outside flow | tau={tau:.4g}")
            continue
        profile.taus.append(float(tau))
        profile.thetas.append(theta)
    return profile


def _local_spacing(flow: FlowTrack, X0: SpacetimePoint, t: float) -> Optional[float]:
    s = flow.slice_nearest(t)
    if s.is_empty:
        return None
    idx, _ = s.nearest(X0.position)
    return float(s.weights[idx]) ** (1.0 / flow.n)


def gaussian_density_limit(
    flow: FlowTrack,
    X0: SpacetimePoint,
    localized: bool = True,
    tau0: float = TAU_BASE,
    ratio: float = TAU_RATIO,
    tol: float = LIMIT_TOLERANCE,
    max_levels: int = MAX_LEVELS,
) -> DensityLimit:
    """Theta(M, X0) by a geometric tau ladder with Richardson extrapolation

    The ladder stops when successive extrapolated values agree within tol
    (converged), or when t0 - tau leaves the sampled slices or the kernel
    width drops below twice the local sample spacing (not converged; the
    smallest-tau value is reported).
    """
    profile = DensityProfile(base=X0, localized=localized)
    extrapolated: List[float] = []
    reason = "max_levels"
    for k in range(max_levels):
        tau = tau0 * ratio ** (-k)
        t = X0.t - tau
        if not flow.slices or t < flow.t_min or t > flow.t_max:
            reason = "extent"
            break
        spacing = _local_spacing(flow, X0, t)
        if spacing is not None and math.sqrt(2.0 * tau) < 2.0 * spacing:
            reason = "resolution"
            break
        profile.taus.append(tau)
        profile.thetas.append(gaussian_density_at_scale(flow, X0, tau, localized))
        if k >= 1:
            # error linear in tau cancels for ratio 2
            w = ratio / (ratio - 1.0)
            extrapolated.append(w * profile.thetas[-1] - (w - 1.0) * profile.thetas[-2])
        if len(extrapolated) >= 2 and abs(extrapolated[-1] - extrapolated[-2]) < tol:
            value = min(extrapolated[-1], min(profile.thetas))
            logger.debug(f"Density limit converged | value={value:.6g}, levels={k + 1}")
            return DensityLimit(max(value, 0.0), True, profile, "converged")

    if not profile.thetas:
        raise OutOfRangeError(f"no density scale of the ladder fits the flow at t0={X0.t:.6g}")
    logger.warning(f"Density limit not converged ({reason}) | t0={X0.t:.6g}, levels={len(profile.thetas)}")
    return DensityLimit(profile.thetas[-1], False, profile, reason)


def huisken_energy(flow: FlowTrack, X: SpacetimePoint, r1: float, r2: float, localized: bool = True) -> float:
    """W_{r1,r2}(M, X) = Theta(M, X, r1^2) - Theta(M, X, r2^2) for 1/2 > r1 > r2 > 0"""
    if not 0.5 > r1 > r2 > 0:
        raise InvalidInputError(f"need 1/2 > r1 > r2 > 0, got r1={r1}, r2={r2}")
    return gaussian_density_at_scale(flow, X, r1 ** 2, localized) - gaussian_density_at_scale(
        flow, X, r2 ** 2, localized
    )


def density_ratio_check(flow: FlowTrack, X: SpacetimePoint, r: float) -> Tuple[float, float]:
    """(M_t(B_r(x)) / r^n, 4 Lambda)"""
    if not 0 < r <= 0.5:
        raise InvalidInputError(f"need 0 < r <= 1/2, got {r}")
    x0 = X.position

    def inside(positions: np.ndarray) -> np.ndarray:
        return (np.linalg.norm(positions - x0, axis=1) < r).astype(float)

    ratio = flow.integrate(X.t, inside) / r ** flow.n
    return ratio, 4.0 * flow.mass_bound


def monotonicity_violations(
    flow: FlowTrack,
    points: Sequence[SpacetimePoint],
    taus: Sequence[float],
    tol: float = LIMIT_TOLERANCE,
    localized: bool = True,
) -> List[Dict[str, float]]:
    """Pairs tau1 > tau2 (consecutive in the covered ladder) with Theta(tau1) < Theta(tau2) - tol"""

    def check(X: SpacetimePoint) -> List[Dict[str, float]]:
        profile = density_profile(flow, X, sorted(taus, reverse=True), localized)
        found = []
        for (t1, th1), (t2, th2) in zip(
            zip(profile.taus, profile.thetas), zip(profile.taus[1:], profile.thetas[1:])
        ):
            if th1 < th2 - tol:
                found.append({"t": X.t, "tau1": t1, "tau2": t2, "theta1": th1, "theta2": th2})
        return found

    violations: List[Dict[str, float]] = []
    for found in parallel_map(check, points):
        violations.extend(found)
    if violations:
        logger.warning(f"Monotonicity violated at {len(violations)} scale pairs")
    return violations
