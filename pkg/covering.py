"""
Coverings and Tubular Volumes

Recursive greedy coverings of sampled quantitative strata, grid-counted
parabolic tubular volumes T_r(S) and the least-squares Minkowski exponent
fit of log volume against log r.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from brakke_distance import TestFunctionFamily
from errors import InvalidInputError
from spacetime import SpacetimePoint, parabolic_distances
from strata import StratConfig, StratumReport, stratum_grid
from varifold import FlowTrack

logger = logging.getLogger(__name__)

CELLS_PER_RADIUS = 8
COARSE_FACTOR = 4.0
MIN_RADII = 4
MIN_OCTAVES = 3.0
# allowed deviation of consecutive level ratios from gamma^-j
RATIO_SLACK = 3.0


def _as_rows(points: Any, N: Optional[int] = None) -> np.ndarray:
    if isinstance(points, np.ndarray):
        rows = np.asarray(points, dtype=float)
    else:
        rows = np.array([X.as_array() for X in points], dtype=float)
    if rows.size == 0:
        return np.zeros((0, (N + 1) if N else 0))
    if rows.ndim != 2:
        raise InvalidInputError("spacetime samples must be an (m, N+1) array")
    return rows


def greedy_cover(rows: np.ndarray, radius: float) -> List[int]:
    """Farthest-point net: indices of centers whose radius-balls cover every row

    Starts at the first row and repeatedly adds the row farthest (parabolic
    distance) from the chosen centers until every row is within ``radius``.
    """
    if len(rows) == 0:
        return []
    centers = [0]
    dist = parabolic_distances(rows, rows[0])
    while True:
        far = int(np.argmax(dist))
        if dist[far] <= radius:
            return centers
        centers.append(far)
        dist = np.minimum(dist, parabolic_distances(rows, rows[far]))


@dataclass
class CoveringResult:
    """Ball centers per level k, of radius gamma^k"""

    gamma: float
    j: int
    levels: List[np.ndarray] = field(default_factory=list)

    @property
    def counts(self) -> List[int]:
        return [len(level) for level in self.levels]

    @property
    def radii(self) -> List[float]:
        return [self.gamma ** k for k in range(len(self.levels))]

    def level_ratios(self) -> List[Dict[str, Any]]:
        """Consecutive count ratios against gamma^-j"""
        expected = self.gamma ** (-self.j)
        out = []
        for k in range(1, len(self.levels)):
            prev, cur = self.counts[k - 1], self.counts[k]
            ratio = cur / prev if prev else math.nan
            ok = prev > 0 and ratio <= RATIO_SLACK * expected
            out.append({"level": k, "ratio": ratio, "expected": expected, "within": bool(ok)})
        return out

    def to_rows(self) -> List[Dict[str, Any]]:
        return [
            {"level": k, "radius": r, "count": c}
            for k, (r, c) in enumerate(zip(self.radii, self.counts))
        ]


def cover_levels(rows: np.ndarray, members: Sequence[Sequence[bool]], gamma: float, j: int = 0) -> CoveringResult:
    """Recursive covering: level k covers each parent ball's share of member set k by gamma^k balls

    ``members[k]`` flags the rows in S^j_{eta, gamma^k}. Level 0 is a greedy
    unit-radius cover of member set 0 with centers in the set.
    """
    result = CoveringResult(gamma=gamma, j=j)
    parents: Optional[np.ndarray] = None
    for k, flags in enumerate(members):
        flags = np.asarray(flags, dtype=bool)
        if len(flags) != len(rows):
            raise InvalidInputError(f"level {k} membership has {len(flags)} flags for {len(rows)} samples")
        radius = gamma ** k
        chosen: List[int] = []
        if parents is None:
            pool = np.flatnonzero(flags)
            chosen = [int(pool[i]) for i in greedy_cover(rows[pool], radius)]
        else:
            parent_radius = gamma ** (k - 1)
            claimed = np.zeros(len(rows), dtype=bool)
            for p in parents:
                inside = flags & ~claimed & (parabolic_distances(rows, rows[p]) <= parent_radius)
                pool = np.flatnonzero(inside)
                claimed |= inside
                chosen.extend(int(pool[i]) for i in greedy_cover(rows[pool], radius))
        parents = np.array(chosen, dtype=int)
        result.levels.append(rows[parents] if len(parents) else np.zeros((0, rows.shape[1])))
        logger.debug(f"Covering level {k} | radius={radius:.4g}, balls={len(parents)}")
    return result


def recursive_covering(
    flow: FlowTrack,
    points: Sequence[SpacetimePoint],
    j: int,
    cfg: StratConfig,
    beta: int,
    report: Optional[StratumReport] = None,
    fam: Optional[TestFunctionFamily] = None,
) -> CoveringResult:
    """Covering of S^j_{eta, gamma^k} for k = 0..beta from sampled membership"""
    if beta < 0:
        raise InvalidInputError(f"beta must be nonnegative, got {beta}")
    rs = [cfg.gamma ** k for k in range(beta + 1)]
    if report is None:
        report = stratum_grid(flow, points, [j], [cfg.eta], rs, gamma=cfg.gamma, fam=fam)
    rows = _as_rows(report.points, flow.N)
    members = [report.membership[(j, cfg.eta, r)] for r in rs]
    result = cover_levels(rows, members, cfg.gamma, j)
    logger.info(f"Recursive covering | j={j}, counts={result.counts}")
    return result


@dataclass
class TubularVolume:
    value: float
    r: float
    cell: float
    coarse: bool = False


def tubular_volume(
    points: Any,
    r: float,
    domain: Optional[Tuple[SpacetimePoint, float]] = (None, 1.0),
    cell: Optional[float] = None,
    N: Optional[int] = None,
) -> TubularVolume:
    """Lebesgue measure of the parabolic r-neighborhood of a point set, inside a parabolic ball

    Space is counted on a grid of cubes of side ``cell`` (default r/8) whose
    centers lie within r of a point; time is exact: each such cube carries the
    union of the intervals [t - r^2, t + r^2] of the points that reach it.
    ``domain`` is (center, radius) of a parabolic ball (center None means the
    origin); None leaves the neighborhood unclipped.
    """
    if r <= 0:
        raise InvalidInputError(f"radius must be positive, got {r}")
    rows = _as_rows(points, N)
    h = cell if cell is not None else r / CELLS_PER_RADIUS
    if h <= 0:
        raise InvalidInputError(f"cell size must be positive, got {h}")
    if len(rows) == 0:
        return TubularVolume(0.0, r, h)
    dim = rows.shape[1] - 1
    coarse = r <= COARSE_FACTOR * h * math.sqrt(dim)
    if coarse:
        logger.warning(f"Tubular grid coarse relative to r | r={r:.4g}, cell={h:.4g}")

    reach = int(math.ceil(r / h)) + 1
    offsets = np.stack(
        np.meshgrid(*([np.arange(-reach, reach + 1)] * dim), indexing="ij"), axis=-1
    ).reshape(-1, dim)
    cells, lo, hi = [], [], []
    for row in rows:
        x, t = row[:dim], row[dim]
        idx = np.floor(x / h).astype(np.int64) + offsets
        centers = (idx + 0.5) * h
        near = np.linalg.norm(centers - x, axis=1) <= r
        cells.append(idx[near])
        lo.append(np.full(int(near.sum()), t - r * r))
        hi.append(np.full(int(near.sum()), t + r * r))
    cells_arr = np.vstack(cells)
    lo_arr, hi_arr = np.concatenate(lo), np.concatenate(hi)

    if domain is not None:
        center, radius = domain
        c_x = np.zeros(dim) if center is None else center.position
        c_t = 0.0 if center is None else center.t
        inside = np.linalg.norm((cells_arr + 0.5) * h - c_x, axis=1) < radius
        cells_arr, lo_arr, hi_arr = cells_arr[inside], lo_arr[inside], hi_arr[inside]
        lo_arr = np.maximum(lo_arr, c_t - radius ** 2)
        hi_arr = np.minimum(hi_arr, c_t + radius ** 2)
    if len(cells_arr) == 0:
        return TubularVolume(0.0, r, h, coarse)

    _, group = np.unique(cells_arr, axis=0, return_inverse=True)
    group = group.reshape(-1)
    order = np.lexsort((lo_arr, group))
    group, lo_arr, hi_arr = group[order], lo_arr[order], hi_arr[order]
    # shift each group above the previous so one running max stays within groups
    span = float(np.max(hi_arr) - np.min(lo_arr)) + 1.0
    shifted = hi_arr + group * span
    running = np.maximum.accumulate(shifted)
    prev = np.empty_like(running)
    prev[0] = -np.inf
    prev[1:] = running[:-1] - group[1:] * span
    starts = np.ones(len(group), dtype=bool)
    starts[1:] = group[1:] != group[:-1]
    prev[starts] = -np.inf
    covered = np.clip(hi_arr - np.maximum(lo_arr, prev), 0.0, None)
    value = float(np.sum(covered)) * h ** dim
    return TubularVolume(value, r, h, coarse)


@dataclass
class ExponentFit:
    slope: float
    intercept: float
    radii: List[float]
    volumes: List[float]
    dropped: int = 0

    def as_dict(self) -> Dict[str, Any]:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "radii": self.radii,
            "volumes": self.volumes,
            "dropped": self.dropped,
        }


def minkowski_exponent_fit(pairs: Sequence[Tuple[float, float]]) -> ExponentFit:
    """Least-squares slope of log volume against log r"""
    kept = [(r, v) for r, v in pairs if r > 0 and v > 0]
    dropped = len(pairs) - len(kept)
    if dropped:
        logger.warning(f"Exponent fit dropped {dropped} nonpositive volumes")
    radii = sorted({r for r, _ in kept})
    if len(radii) < MIN_RADII:
        raise InvalidInputError(f"exponent fit needs at least {MIN_RADII} radii, got {len(radii)}")
    if math.log2(radii[-1] / radii[0]) < MIN_OCTAVES - 1e-9:
        raise InvalidInputError(f"exponent fit radii must span {MIN_OCTAVES:g} octaves")
    log_r = np.log([r for r, _ in kept])
    log_v = np.log([v for _, v in kept])
    slope, intercept = np.polyfit(log_r, log_v, 1)
    return ExponentFit(
        float(slope), float(intercept), [r for r, _ in kept], [v for _, v in kept], dropped
    )


def volume_exponent(
    points: Any,
    radii: Sequence[float],
    domain=(None, 1.0),
    N: Optional[int] = None,
    cells_per_radius: int = CELLS_PER_RADIUS,
) -> ExponentFit:
    """Tubular volumes at each radius and their exponent fit"""
    pairs = [(r, tubular_volume(points, r, domain, cell=r / cells_per_radius, N=N).value) for r in radii]
    return minkowski_exponent_fit(pairs)
