"""
Simulator Monitoring

Stop rules shared by the curve and surface-of-revolution solvers, plus the
monitors run on their output: k-convexity margins, mass history and first
singular time detection.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from errors import DataMissingError, InvalidInputError
from varifold import FlowTrack, VarifoldSlice, max_curvature_history

logger = logging.getLogger(__name__)

BLOWUP_FACTOR = 100.0


class StopReason(Enum):
    T_END = "t_end"
    MAX_CURVATURE = "max_curvature"
    MIN_AREA = "min_area"
    MAX_STEPS = "max_steps"
    PINCH = "pinch"
    VANISHED = "vanished"


@dataclass(frozen=True)
class StopRule:
    """When a simulation stops: fixed time, curvature threshold, vanishing area or step cap"""

    t_end: float = math.inf
    max_curvature: float = math.inf
    min_area: float = 0.0
    max_steps: int = 5_000_000

    def __post_init__(self):
        if math.isinf(self.t_end) and math.isinf(self.max_curvature) and self.min_area <= 0:
            raise InvalidInputError("stop rule needs t_end, max_curvature or min_area")
        if self.max_steps < 1:
            raise InvalidInputError("max_steps must be positive")

    def check(self, t: float, max_curvature: float, area: float, steps: int) -> Optional[StopReason]:
        if t >= self.t_end:
            return StopReason.T_END
        if max_curvature >= self.max_curvature:
            return StopReason.MAX_CURVATURE
        if area <= self.min_area:
            return StopReason.MIN_AREA
        if steps >= self.max_steps:
            return StopReason.MAX_STEPS
        return None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "StopRule":
        """Missing or null entries fall back to the defaults"""

        def pick(key, default):
            value = data.get(key)
            return default if value is None else value

        return cls(
            t_end=float(pick("t_end", math.inf)),
            max_curvature=float(pick("max_curvature", math.inf)),
            min_area=float(pick("min_area", 0.0)),
            max_steps=int(pick("max_steps", 5_000_000)),
        )


def k_convexity_margin(slice_: VarifoldSlice, k: int) -> float:
    """min over samples of (lambda_1 + ... + lambda_k) / h; -inf if h <= 0 anywhere"""
    lam = slice_.require_principal_curvatures()
    if not 1 <= k <= slice_.n:
        raise InvalidInputError(f"need 1 <= k <= n={slice_.n}, got k={k}")
    if slice_.is_empty:
        raise InvalidInputError("k-convexity of an empty slice is undefined")
    h = slice_.mean_curvature
    if np.any(h <= 0):
        return -math.inf
    return float(np.min(np.sum(lam[:, :k], axis=1) / h))


def k_convexity_history(flow: FlowTrack, k: int) -> Tuple[np.ndarray, np.ndarray]:
    times, margins = [], []
    for s in flow.slices:
        if s.is_empty:
            continue
        times.append(s.t)
        margins.append(k_convexity_margin(s, k))
    return np.array(times), np.array(margins)


def mass_history(flow: FlowTrack) -> Tuple[np.ndarray, np.ndarray]:
    return flow.mass_history()


def detect_first_singular_time(
    flow: FlowTrack, blowup_factor: float = BLOWUP_FACTOR, fit_points: int = 6
) -> Optional[float]:
    """Earliest blowup time, or None when max |A| never crosses the threshold

    The threshold is blowup_factor times the initial max |A|. The estimate
    extrapolates 1/max|A|^2, which is linear in t near a type-I singularity,
    to zero using the last slices before the crossing.
    """
    if not flow.has_curvature:
        raise DataMissingError("singular time detection needs curvature data")
    times, curv = max_curvature_history(flow)
    if len(times) < 2 or curv[0] <= 0:
        return None
    threshold = blowup_factor * curv[0]
    crossed = np.nonzero(curv >= threshold)[0]
    if crossed.size == 0:
        return None
    stop = int(crossed[0]) + 1
    start = max(0, stop - fit_points)
    inv = 1.0 / curv[start:stop] ** 2
    if stop - start < 2:
        return float(times[stop - 1])
    slope, intercept = np.polyfit(times[start:stop], inv, 1)
    if slope >= 0:
        logger.warning("1/|A|^2 not decreasing near blowup; using crossing time")
        return float(times[stop - 1])
    estimate = -intercept / slope
    logger.debug(f"Singular time extrapolated to {estimate:.6g} from {stop - start} slices")
    return float(estimate)


def singular_summary(flow: FlowTrack) -> Dict[str, Any]:
    """Detected and recorded singular data for reports"""
    detected = detect_first_singular_time(flow) if flow.has_curvature else None
    violations: List[int] = flow.check_mass_monotone()
    return {
        "detected_singular_time": detected,
        "recorded_singular_times": list(flow.singular_times),
        "mass_monotone_violations": len(violations),
        "slices": len(flow.slices),
    }
