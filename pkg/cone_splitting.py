"""
Cone Splitting

Case table predicting the enlarged spine when a flow is approximately
self-similar about a spine W and about a further point Y at parabolic
distance rho from it, plus the quasistatic promotion check that upgrades a
half-cylinder to a static fit at points well before its vanishing time.
"""

import logging
from typing import Optional

import numpy as np

from brakke_distance import TestFunctionFamily
from errors import CaseViolationError, InvalidInputError
from model_catalog import ModelKind
from selfsimilar_fit import fit_selfsimilar
from spacetime import SpacetimePoint, Spine, SpineKind, orthonormal_basis
from varifold import FlowTrack

logger = logging.getLogger(__name__)

# angular tolerance when matching a fitted static plane against V
PLANE_TOLERANCE = 5e-2


def _spanned_plane(W: Spine, y: np.ndarray) -> np.ndarray:
    """Orthonormal basis of span{y - base, V}"""
    vectors = [W.plane[:, i] for i in range(W.dim)] + [y - np.asarray(W.base)]
    return orthonormal_basis(vectors, W.N)


def _require(condition: bool, inequality: str) -> None:
    if not condition:
        raise CaseViolationError(inequality)


def cone_splitting_case(W: Spine, Y: SpacetimePoint, rho: float) -> Spine:
    """Predicted spine of the (j+1)- or (j+2)-selfsimilar enlargement of W through Y"""
    if rho <= 0:
        raise InvalidInputError(f"rho must be positive, got {rho}")
    if Y.N != W.N:
        raise InvalidInputError(f"dimension mismatch: point has N={Y.N}, spine has N={W.N}")
    y, s = Y.position, Y.t
    d = W.distance_to_plane(y)

    if W.kind is SpineKind.TIME_SLICE:
        t0 = W.time
        if abs(s - t0) < rho ** 2:
            _require(d >= rho, "d(y, V) >= rho")
            return Spine(SpineKind.TIME_SLICE, W.base, _spanned_plane(W, y), time=t0)
        plane = W.plane if d < rho else _spanned_plane(W, y)
        return Spine(SpineKind.HALF_CYLINDER, W.base, plane, time=max(s, t0))

    if W.kind is SpineKind.HALF_CYLINDER:
        T = W.time
        if d < rho:
            _require(s >= T + rho ** 2, "s >= T + rho^2")
            return Spine(SpineKind.HALF_CYLINDER, W.base, W.plane, time=s)
        return Spine(SpineKind.HALF_CYLINDER, W.base, _spanned_plane(W, y), time=max(s, T))

    _require(d >= rho, "d(y, V) >= rho")
    return Spine(SpineKind.FULL_CYLINDER, W.base, _spanned_plane(W, y))


def quasistatic_promotion_check(
    flow: FlowTrack,
    W: Spine,
    Y: SpacetimePoint,
    gamma: float,
    epsilon: float,
    fam: Optional[TestFunctionFamily] = None,
) -> bool:
    """Static fit at (Y, gamma) with spine (y + V) x R within epsilon, for Y well before T"""
    if W.kind is not SpineKind.HALF_CYLINDER:
        raise CaseViolationError(f"spine is {W.kind.value}, need half_cylinder")
    if not 0 < gamma < 0.5:
        raise InvalidInputError(f"gamma must lie in (0, 1/2), got {gamma}")
    _require(float(np.linalg.norm(Y.position)) <= 1.0 - 2.0 * gamma, "|y| <= 1 - 2 gamma")
    _require(-1.0 < Y.t < 1.0, "-1 < s < 1")
    _require(Y.t <= W.time - (2.0 * gamma) ** 2, "s <= T - (2 gamma)^2")

    result = fit_selfsimilar(flow, Y, gamma, W.dim + 2, fam)
    if result.empty or result.kind is not ModelKind.STATIC_PLANE:
        logger.info(f"Promotion failed | fitted={result.label}, dist={result.dist:.3g}")
        return False
    spine = result.spine
    aligned = spine.same_plane(W, tol=PLANE_TOLERANCE)
    logger.debug(f"Promotion fit | dist={result.dist:.3g}, aligned={aligned}")
    return bool(aligned and result.dist < epsilon)
