"""
Quantitative Stratification

Membership in the quantitative strata S^j_{eta,r}, scale signatures built
from Huisken energies, the bad-scale bound and the energy decomposition of a
sampled point set. The continuum of scales [r, 1] is replaced by the ladder
gamma^k >= r, which makes the ladder of a larger r a subset of the ladder of
a smaller one.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

from brakke_distance import TestFunctionFamily, default_family
from density import huisken_energy
from errors import InvalidInputError, OutOfRangeError
from parallel import parallel_map
from selfsimilar_fit import KindFit, fit_kinds, select_fit
from spacetime import SpacetimePoint
from varifold import FlowTrack, recenter_rescale

logger = logging.getLogger(__name__)

# ladder minimum within this fraction above eta is flagged as a possible missed scale band
NEAR_THRESHOLD = 0.1
DEFAULT_GAMMA = 0.25

Signature = Tuple[int, ...]


def check_gamma(gamma: float) -> None:
    if not 0 < gamma < 0.5:
        raise InvalidInputError(f"gamma must lie in (0, 1/2), got {gamma}")


@dataclass(frozen=True)
class StratConfig:
    """Parameter pack for signatures, decomposition and covering"""

    n: int
    gamma: float = DEFAULT_GAMMA
    delta: float = 0.05
    q: int = 2
    eta: float = 0.05
    epsilon: float = 0.1
    beta_max: int = 6
    mass_bound: float = 1.0
    localized: bool = True

    def __post_init__(self):
        check_gamma(self.gamma)
        if self.delta <= 0 or self.eta <= 0 or self.epsilon <= 0:
            raise InvalidInputError("delta, eta and epsilon must be positive")
        if self.q < 1 or self.beta_max < 1:
            raise InvalidInputError("q and beta_max must be at least 1")
        if self.mass_bound <= 0 or self.n < 1:
            raise InvalidInputError("mass bound and n must be positive")

    @property
    def bad_scale_limit(self) -> float:
        """(2q+1) delta^-1 Lambda / pi^{n/2}"""
        return (2 * self.q + 1) * self.mass_bound / (self.delta * math.pi ** (self.n / 2.0))

    @property
    def Q(self) -> int:
        return int(math.floor(self.bad_scale_limit)) + self.q

    def ladder(self, r: float) -> List[float]:
        return scale_ladder(r, self.gamma)

    def gamma_power_ok(self, A: float) -> bool:
        """gamma^q <= 1/(2A)"""
        return self.gamma ** self.q <= 1.0 / (2.0 * A)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "gamma": self.gamma,
            "delta": self.delta,
            "q": self.q,
            "eta": self.eta,
            "epsilon": self.epsilon,
            "beta_max": self.beta_max,
            "mass_bound": self.mass_bound,
            "localized": self.localized,
            "Q": self.Q,
        }


def scale_ladder(r: float, gamma: float) -> List[float]:
    """gamma^k for k >= 0 while gamma^k >= r"""
    if not 0 < r <= 1:
        raise InvalidInputError(f"need 0 < r <= 1, got {r}")
    if not 0 < gamma < 1:
        raise InvalidInputError(f"ladder ratio must lie in (0, 1), got {gamma}")
    ladder = [1.0]
    while ladder[-1] * gamma >= r * (1 - 1e-12):
        ladder.append(ladder[-1] * gamma)
    return ladder


@dataclass
class MembershipDetail:
    member: bool
    scales: List[float]
    dists: List[float]
    empty: bool = False

    @property
    def min_dist(self) -> float:
        return min(self.dists) if self.dists else math.inf

    def near_threshold(self, eta: float) -> bool:
        return eta < self.min_dist <= (1.0 + NEAR_THRESHOLD) * eta


def _kind_fits(
    flow: FlowTrack, X: SpacetimePoint, s: float, fam: Optional[TestFunctionFamily]
) -> Optional[Dict[int, KindFit]]:
    rescaled = recenter_rescale(flow, X, s)
    if rescaled.is_empty:
        return None
    return fit_kinds(rescaled, fam)


def membership_detail(
    flow: FlowTrack,
    X: SpacetimePoint,
    j: int,
    eta: float,
    r: float,
    ladder: Optional[Sequence[float]] = None,
    gamma: float = DEFAULT_GAMMA,
    fam: Optional[TestFunctionFamily] = None,
) -> MembershipDetail:
    check_gamma(gamma)
    if not 0 <= j <= flow.n + 1:
        raise InvalidInputError(f"need 0 <= j <= n + 1, got j={j}")
    scales = list(ladder) if ladder is not None else scale_ladder(r, gamma)
    dists: List[float] = []
    for s in scales:
        fits = _kind_fits(flow, X, s, fam)
        if fits is None:
            logger.debug(f"Point off the support at scale {s:.4g}")
            return MembershipDetail(False, scales, dists, empty=True)
        dists.append(select_fit(fits, j + 1).dist)
    member = all(d > eta for d in dists)
    detail = MembershipDetail(member, scales, dists)
    if detail.near_threshold(eta):
        logger.warning(f"Ladder minimum {detail.min_dist:.4g} within {NEAR_THRESHOLD:.0%} of eta={eta}")
    return detail


def is_quant_stratum_member(
    flow: FlowTrack,
    X: SpacetimePoint,
    j: int,
    eta: float,
    r: float,
    ladder: Optional[Sequence[float]] = None,
    gamma: float = DEFAULT_GAMMA,
    fam: Optional[TestFunctionFamily] = None,
) -> bool:
    """X in S^j_{eta,r}: no ladder scale s in [r, 1] has a (j+1)-selfsimilar fit within eta"""
    return membership_detail(flow, X, j, eta, r, ladder, gamma, fam).member


def scale_signature(flow: FlowTrack, X: SpacetimePoint, cfg: StratConfig, beta: int) -> Signature:
    """T_alpha = 1 if alpha <= q or W_{gamma^{alpha-q}, gamma^{alpha+q}}(M, X) > delta"""
    if not 1 <= beta <= cfg.beta_max:
        raise InvalidInputError(f"need 1 <= beta <= beta_max={cfg.beta_max}, got {beta}")
    bits = []
    for alpha in range(1, beta + 1):
        if alpha <= cfg.q:
            bits.append(1)
            continue
        energy = huisken_energy(flow, X, cfg.gamma ** (alpha - cfg.q), cfg.gamma ** (alpha + cfg.q), cfg.localized)
        bits.append(int(energy > cfg.delta))
    return tuple(bits)


def bad_scale_count(signature: Signature, q: int) -> int:
    return int(sum(signature[q:]))


def bad_scale_bound(cfg: StratConfig, signatures: Sequence[Signature]) -> Tuple[int, float, bool]:
    """(max #{alpha > q : T_alpha = 1}, (2q+1) delta^-1 Lambda / pi^{n/2}, ok)"""
    max_count = max((bad_scale_count(s, cfg.q) for s in signatures), default=0)
    bound = cfg.bad_scale_limit
    return max_count, bound, max_count <= bound


def energy_decomposition(
    points: Sequence[SpacetimePoint], signatures: Sequence[Signature], beta: int
) -> Dict[Signature, List[SpacetimePoint]]:
    """Partition of the points by their first beta signature bits"""
    if len(points) != len(signatures):
        raise InvalidInputError("points and signatures differ in length")
    classes: Dict[Signature, List[SpacetimePoint]] = {}
    for X, sig in zip(points, signatures):
        if len(sig) < beta:
            raise InvalidInputError(f"signature of length {len(sig)} shorter than beta={beta}")
        classes.setdefault(tuple(sig[:beta]), []).append(X)
    return dict(sorted(classes.items()))


def decomposition_class_bound(beta: int, Q: int) -> int:
    """Bound 2 beta^Q on the number of nonempty classes"""
    return 2 * beta ** Q


def good_scale_set(
    flow: FlowTrack,
    points: Sequence[SpacetimePoint],
    r: float,
    A: float,
    delta: float,
    localized: bool = True,
) -> List[SpacetimePoint]:
    """Points whose Huisken energy between scales A r and r / A is at most delta"""
    if A <= 1:
        raise InvalidInputError(f"need A > 1, got {A}")

    def good(X: SpacetimePoint) -> bool:
        try:
            return huisken_energy(flow, X, A * r, r / A, localized) <= delta
        except OutOfRangeError:
            return False

    flags = parallel_map(good, points)
    return [X for X, ok in zip(points, flags) if ok]


def relation_proxy(
    flow: FlowTrack,
    X: SpacetimePoint,
    scales: Sequence[float],
    j: int,
    floor: float = 1e-6,
    fam: Optional[TestFunctionFamily] = None,
) -> Dict[str, Any]:
    """Fit distances down a scale ladder; tends_to_zero when each step at least halves or is below floor"""
    dists = [fit_from_kinds_or_inf(flow, X, s, j, fam) for s in sorted(scales, reverse=True)]
    decreasing = all(b <= 0.5 * a or b < floor for a, b in zip(dists, dists[1:]))
    return {"scales": sorted(scales, reverse=True), "dists": dists, "tends_to_zero": decreasing}


def fit_from_kinds_or_inf(
    flow: FlowTrack, X: SpacetimePoint, s: float, j: int, fam: Optional[TestFunctionFamily] = None
) -> float:
    fits = _kind_fits(flow, X, s, fam)
    return math.inf if fits is None else select_fit(fits, j).dist


@dataclass
class StratumReport:
    """Membership grid, per-scale best fits and signatures of a sampled point set"""

    points: List[SpacetimePoint]
    js: List[int]
    etas: List[float]
    rs: List[float]
    gamma: float
    membership: Dict[Tuple[int, float, float], List[bool]] = field(default_factory=dict)
    fits: List[List[Optional[Dict[int, KindFit]]]] = field(default_factory=list)
    scales: List[float] = field(default_factory=list)
    near_threshold: Dict[Tuple[int, float, float], List[bool]] = field(default_factory=dict)
    signatures: List[Signature] = field(default_factory=list)

    def members(self, j: int, eta: float, r: float) -> List[SpacetimePoint]:
        flags = self.membership[(j, eta, r)]
        return [X for X, f in zip(self.points, flags) if f]

    def containment_violations(self) -> List[Tuple[int, Tuple, Tuple]]:
        """(point, smaller key, larger key) where S^j_{eta,r} membership is not inherited"""
        violations = []
        keys = list(self.membership)
        for a in keys:
            for b in keys:
                j, eta, r = a
                j2, eta2, r2 = b
                if a == b or not (j <= j2 and eta >= eta2 and r <= r2):
                    continue
                for i, (fa, fb) in enumerate(zip(self.membership[a], self.membership[b])):
                    if fa and not fb:
                        violations.append((i, a, b))
        return violations

    def to_rows(self) -> List[Dict[str, Any]]:
        """One row per (point, scale, j): best (j+1)-fit and membership flags"""
        rows = []
        for i, X in enumerate(self.points):
            for k, s in enumerate(self.scales):
                for j in self.js:
                    fit = self.fits[i][k] if self.fits else None
                    row = {
                        "point": i,
                        "x": " ".join(f"{c:.17g}" for c in X.x),
                        "t": X.t,
                        "scale": s,
                        "j": j,
                    }
                    kinds = fit if isinstance(fit, dict) else None
                    if kinds is None:
                        row.update({"best_kind": "empty", "dist": math.inf})
                    else:
                        choice = select_fit(kinds, j + 1)
                        row.update({"best_kind": choice.model.kind.value, "dist": choice.dist})
                    for eta in self.etas:
                        for r in self.rs:
                            row[f"member_eta{eta:g}_r{r:g}"] = int(self.membership[(j, eta, r)][i])
                    rows.append(row)
        return rows

    def summary(self) -> Dict[str, Any]:
        counts = {f"S{j}_eta{eta:g}_r{r:g}": sum(flags) for (j, eta, r), flags in self.membership.items()}
        flagged = sum(sum(flags) for flags in self.near_threshold.values())
        return {
            "points": len(self.points),
            "stratum_counts": counts,
            "near_threshold_flags": flagged,
            "containment_violations": len(self.containment_violations()),
        }


def stratum_grid(
    flow: FlowTrack,
    points: Sequence[SpacetimePoint],
    js: Sequence[int],
    etas: Sequence[float],
    rs: Sequence[float],
    gamma: float = DEFAULT_GAMMA,
    fam: Optional[TestFunctionFamily] = None,
) -> StratumReport:
    """Boolean S^j_{eta,r} grid over points; every (point, scale) is fitted once"""
    check_gamma(gamma)
    fam = fam or default_family(flow.N)
    for j in js:
        if not 0 <= j <= flow.n + 1:
            raise InvalidInputError(f"need 0 <= j <= n + 1, got j={j}")
    scales = scale_ladder(min(rs), gamma)

    def fit_point(X: SpacetimePoint) -> List[Optional[Dict[int, KindFit]]]:
        return [_kind_fits(flow, X, s, fam) for s in scales]

    all_fits = parallel_map(fit_point, points)
    report = StratumReport(list(points), list(js), list(etas), list(rs), gamma, scales=scales)
    report.fits = all_fits
    for j in js:
        for eta in etas:
            for r in rs:
                ladder_len = len(scale_ladder(r, gamma))
                flags, near = [], []
                for fits in all_fits:
                    used = fits[:ladder_len]
                    if any(f is None for f in used):
                        flags.append(False)
                        near.append(False)
                        continue
                    dists = [select_fit(f, j + 1).dist for f in used]
                    flags.append(all(d > eta for d in dists))
                    near.append(eta < min(dists) <= (1.0 + NEAR_THRESHOLD) * eta)
                report.membership[(j, eta, r)] = flags
                report.near_threshold[(j, eta, r)] = near
    logger.info(f"Stratum grid | points={len(points)}, scales={len(scales)}, keys={len(report.membership)}")
    return report
