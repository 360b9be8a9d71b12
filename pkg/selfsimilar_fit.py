"""
Self-Similarity Detection

Best approximation of a rescaled flow M_{X,r} by a j-selfsimilar catalog
model about the origin, measured in the Brakke pseudometric. Candidates are
a deterministic grid over kind x orientation x disappearance time; the best
grid candidate of each competitive kind is refined with Nelder-Mead.
Self-similar models about the origin are dilation invariant, so there is no
scale parameter to search.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from brakke_distance import TestFunctionFamily, default_family, distance_from_integrals, family_integrals
from errors import InvalidInputError
from model_catalog import (
    ModelKind,
    SelfSimilarModel,
    catalog_models,
    complete_frame,
    make_model,
    model_catalog,
    model_spine,
    plane_frame,
    symmetry_count,
)
from spacetime import SpacetimePoint, Spine
from varifold import FlowTrack, recenter_rescale

logger = logging.getLogger(__name__)

FIT_RESOLUTION = {1: 256, 2: 48}
ANGLE_STEPS = 17
T_GRID = tuple(np.linspace(0.0, 1.0, 9))
REFINE_ITERATIONS = 50
# refinement threshold relative to the best grid optimum among equally or more symmetric kinds
REFINE_FACTOR = 2.0


@dataclass(frozen=True)
class FitResult:
    """Best j-selfsimilar model for M_{X,r}; ``empty`` marks an empty rescaled flow"""

    model: Optional[SelfSimilarModel]
    spine: Optional[Spine]
    dist: float
    empty: bool = False
    X: Optional[SpacetimePoint] = None
    r: float = 1.0

    @property
    def kind(self) -> Optional[ModelKind]:
        return None if self.model is None else self.model.kind

    @property
    def label(self) -> str:
        return "empty" if self.model is None else self.model.label()


def orientation_grid(N: int) -> List[Tuple[float, ...]]:
    """17 angles on [0, pi] for N=2; a 17 x 17 hemisphere grid (polar, azimuth) for N=3"""
    if N == 2:
        return [(math.pi * i / (ANGLE_STEPS - 1),) for i in range(ANGLE_STEPS)]
    if N == 3:
        polar = [0.5 * math.pi * i / (ANGLE_STEPS - 1) for i in range(ANGLE_STEPS)]
        azimuth = [2.0 * math.pi * k / ANGLE_STEPS for k in range(ANGLE_STEPS)]
        return [(a, b) for a in polar for b in azimuth]
    raise InvalidInputError(f"orientation search supports N in (2, 3), got {N}")


def direction(angles: Sequence[float], N: int) -> np.ndarray:
    """Unit vector; theta = 0 is e_1"""
    if N == 2:
        (theta,) = angles
        return np.array([math.cos(theta), math.sin(theta)])
    theta, phi = angles
    return np.array([math.cos(theta), math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi)])


def candidate_model(
    prototype: SelfSimilarModel, angles: Sequence[float], T: Optional[float] = None
) -> SelfSimilarModel:
    """Prototype reoriented: plane normal or cylinder axis along direction(angles)"""
    N = prototype.N
    if prototype.kind is ModelKind.SHRINKER_SPHERE:
        return prototype
    v = direction(angles, N)
    if prototype.kind is ModelKind.SHRINKER_CYLINDER:
        frame = complete_frame(v[:, None])
        return make_model(prototype.kind, prototype.n, frame=frame, j=prototype.j, resolution=prototype.resolution)
    frame = plane_frame(v)
    return make_model(prototype.kind, prototype.n, frame=frame, T=T, resolution=prototype.resolution)


def model_integrals(model: SelfSimilarModel, fam: TestFunctionFamily, cache: bool = True) -> np.ndarray:
    """I[alpha, beta] of an analytic model; planes reuse one slice for every time"""
    out = np.zeros((len(fam.widths), len(fam.times)))
    if model.kind in (ModelKind.STATIC_PLANE, ModelKind.QUASISTATIC_PLANE):
        t_alive = -1.0 if model.T is None else model.T - 1.0
        s = model_catalog.get_slice(model, t_alive, cache=cache)
        column = s.weights @ fam.evaluate(s.positions)
        alive = np.ones(len(fam.times), dtype=bool) if model.T is None else fam.times < model.T
        out[:, alive] = column[:, None]
        return out
    for b, t in enumerate(fam.times):
        s = model_catalog.get_slice(model, float(t), cache=cache)
        if not s.is_empty:
            out[:, b] = s.weights @ fam.evaluate(s.positions)
    return out


@dataclass(frozen=True, eq=False)
class CandidateTable:
    prototypes: Tuple[SelfSimilarModel, ...]
    kinds: Tuple[ModelKind, ...]
    params: Tuple[Tuple[float, ...], ...]
    integrals: np.ndarray


@lru_cache(maxsize=16)
def candidate_table(n: int, fam: TestFunctionFamily) -> CandidateTable:
    """Grid candidates of the full catalog with their test integrals"""
    N = n + 1
    resolution = FIT_RESOLUTION.get(n, 32)
    prototypes = catalog_models(n, N, 0, resolution=resolution)
    grid = orientation_grid(N)
    kinds: List[ModelKind] = []
    params: List[Tuple[float, ...]] = []
    blocks: List[np.ndarray] = []
    plane_cache: Dict[Tuple[float, ...], np.ndarray] = {}
    proto_of: List[SelfSimilarModel] = []

    def plane_integrals(angles):
        if angles not in plane_cache:
            static = make_model(ModelKind.STATIC_PLANE, n, resolution=resolution)
            plane_cache[angles] = model_integrals(candidate_model(static, angles), fam, cache=False)
        return plane_cache[angles]

    for proto in prototypes:
        if proto.kind is ModelKind.SHRINKER_SPHERE:
            kinds.append(proto.kind)
            params.append(())
            blocks.append(model_integrals(proto, fam))
            proto_of.append(proto)
        elif proto.kind is ModelKind.SHRINKER_CYLINDER:
            for angles in grid:
                kinds.append(proto.kind)
                params.append(angles)
                blocks.append(model_integrals(candidate_model(proto, angles), fam, cache=False))
                proto_of.append(proto)
        elif proto.kind is ModelKind.STATIC_PLANE:
            for angles in grid:
                kinds.append(proto.kind)
                params.append(angles)
                blocks.append(plane_integrals(angles))
                proto_of.append(proto)
        else:
            for angles in grid:
                base = plane_integrals(angles)
                for T in T_GRID:
                    kinds.append(proto.kind)
                    params.append(angles + (float(T),))
                    blocks.append(base * (fam.times < T)[None, :])
                    proto_of.append(proto)
    logger.info(f"Candidate table built | n={n}, candidates={len(kinds)}")
    return CandidateTable(tuple(proto_of), tuple(kinds), tuple(params), np.array(blocks))


def _model_from_params(prototype: SelfSimilarModel, params: Sequence[float]) -> SelfSimilarModel:
    if prototype.kind is ModelKind.QUASISTATIC_PLANE:
        return candidate_model(prototype, params[:-1], T=float(np.clip(params[-1], 0.0, 1.0)))
    return candidate_model(prototype, params)


def _refine(
    prototype: SelfSimilarModel, start: Tuple[float, ...], start_dist: float, IA: np.ndarray, fam: TestFunctionFamily
) -> Tuple[Tuple[float, ...], float]:
    if not start:
        return start, start_dist

    def objective(x):
        model = _model_from_params(prototype, x)
        return float(distance_from_integrals(IA, model_integrals(model, fam, cache=False), fam))

    result = minimize(
        objective,
        np.array(start),
        method="Nelder-Mead",
        options={"maxiter": REFINE_ITERATIONS, "xatol": 1e-7, "fatol": 1e-12},
    )
    if result.fun < start_dist:
        params = tuple(float(v) for v in result.x)
        if prototype.kind is ModelKind.QUASISTATIC_PLANE:
            params = params[:-1] + (float(np.clip(params[-1], 0.0, 1.0)),)
        return params, float(result.fun)
    return start, start_dist


def spine_in_original(model: SelfSimilarModel, X: SpacetimePoint, r: float) -> Spine:
    """Spine of a model about the origin of M_{X,r}, mapped back to original coordinates"""
    rescaled = model_spine(model)
    time = None if rescaled.time is None else X.t + r ** 2 * rescaled.time
    base = tuple(X.position + r * np.asarray(rescaled.base))
    return Spine(rescaled.kind, base, rescaled.plane, time=time)


@dataclass(frozen=True)
class KindFit:
    """Refined best candidate of one catalog prototype"""

    model: SelfSimilarModel
    dist: float
    D: int


def fit_kinds(
    rescaled: FlowTrack, fam: Optional[TestFunctionFamily] = None, refine: bool = True
) -> Dict[int, KindFit]:
    """Best model of every catalog prototype, keyed by symmetry count D

    A prototype is refined when its grid optimum is within REFINE_FACTOR of
    the best grid optimum among prototypes at least as symmetric, so the
    result for each prototype does not depend on which j is asked for later.
    """
    n = rescaled.n
    if rescaled.N != n + 1:
        raise InvalidInputError(f"self-similar fits cover hypersurfaces only, got n={n}, N={rescaled.N}")
    fam = fam or default_family(rescaled.N)
    IA = family_integrals(rescaled, fam)
    table = candidate_table(n, fam)
    dists = distance_from_integrals(IA, table.integrals, fam)

    best: Dict[int, int] = {}
    for idx in range(len(dists)):
        D = symmetry_count(table.prototypes[idx])
        if D not in best or dists[idx] < dists[best[D]]:
            best[D] = idx

    fits: Dict[int, KindFit] = {}
    for D, idx in sorted(best.items()):
        params, dist = table.params[idx], float(dists[idx])
        rivals = min(float(dists[i]) for d, i in best.items() if d >= D)
        if refine and dist <= REFINE_FACTOR * rivals + 1e-3:
            params, dist = _refine(table.prototypes[idx], params, dist, IA, fam)
        fits[D] = KindFit(_model_from_params(table.prototypes[idx], params), dist, D)
    return fits


def select_fit(fits: Dict[int, KindFit], j: int) -> KindFit:
    """Closest j-selfsimilar model: minimum over prototypes with D >= j, ties to the more symmetric"""
    allowed = [fit for D, fit in fits.items() if D >= j]
    if not allowed:
        raise InvalidInputError(f"no catalog model has symmetry count >= {j}")
    return min(allowed, key=lambda fit: (fit.dist, -fit.D))


def fit_from_kinds(fits: Dict[int, KindFit], X: SpacetimePoint, r: float, j: int) -> FitResult:
    choice = select_fit(fits, j)
    return FitResult(model=choice.model, spine=spine_in_original(choice.model, X, r), dist=choice.dist, X=X, r=r)


def fit_selfsimilar(
    flow: FlowTrack,
    X: SpacetimePoint,
    r: float,
    j: int,
    fam: Optional[TestFunctionFamily] = None,
    refine: bool = True,
) -> FitResult:
    """Closest j-selfsimilar model to M_{X,r} and its spine W_X"""
    if not 0 <= j <= flow.n + 2:
        raise InvalidInputError(f"need 0 <= j <= n + 2, got j={j}")
    rescaled = recenter_rescale(flow, X, r)
    if rescaled.is_empty:
        return FitResult(model=None, spine=None, dist=math.inf, empty=True, X=X, r=r)
    result = fit_from_kinds(fit_kinds(rescaled, fam, refine), X, r, j)
    logger.debug(f"Fit | t={X.t:.6g}, r={r:.4g}, j={j}, model={result.label}, dist={result.dist:.3g}")
    return result


def best_symmetry(result: FitResult) -> int:
    """Symmetry count D of the fitted model (-1 for the empty marker)"""
    return -1 if result.model is None else symmetry_count(result.model)
