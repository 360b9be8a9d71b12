"""
Self-Similar Model Catalog

Exact self-similar flows used as references by the stratification and
regularity pipelines: static planes, quasistatic planes, and round shrinking
spheres and cylinders R^j x S^{n-j}. Slices are evaluated analytically on
deterministic quadrature grids, and a process-wide provider caches them so
repeated fits reuse the same samples.
"""

import logging
import math
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import InvalidInputError
from spacetime import SpacetimePoint, Spine, SpineKind
from varifold import FlowTrack, VarifoldSlice

logger = logging.getLogger(__name__)

MIN_RESOLUTION = 8
DEFAULT_RESOLUTION = 64
DEFAULT_EXTENT = 1.5


class ModelKind(Enum):
    STATIC_PLANE = "static_plane"
    SHRINKER_SPHERE = "shrinker_sphere"
    SHRINKER_CYLINDER = "shrinker_cylinder"
    QUASISTATIC_PLANE = "quasistatic_plane"


def complete_frame(leading: np.ndarray) -> np.ndarray:
    """Orthonormal N x N frame whose first columns are the (orthonormal) ``leading`` columns"""
    leading = np.atleast_2d(np.asarray(leading, dtype=float))
    if leading.shape[0] == 1 and leading.shape[1] > 1:
        leading = leading.T
    N, k = leading.shape
    q, _ = np.linalg.qr(np.hstack([leading, np.eye(N)]))
    q = q[:, :N]
    for i in range(k):
        if np.dot(q[:, i], leading[:, i]) < 0:
            q[:, i] = -q[:, i]
    return q


def plane_frame(normal: Sequence[float]) -> np.ndarray:
    """Frame with tangent columns first and the unit normal last"""
    nu = np.asarray(normal, dtype=float)
    nu = nu / np.linalg.norm(nu)
    full = complete_frame(nu[:, None])
    return np.column_stack([full[:, 1:], nu])


@dataclass(frozen=True, eq=False)
class SelfSimilarModel:
    """Exact j-selfsimilar hypersurface flow (n, N=n+1) about ``center``

    frame columns: for planes the n tangent directions then the normal; for
    cylinders the j axis directions then the sphere factor; for spheres any
    orthonormal basis. ``scale`` is the half-extent sampled along flat factors.
    """

    kind: ModelKind
    n: int
    center: SpacetimePoint
    frame: np.ndarray = field(repr=False)
    j: int = 0
    T: Optional[float] = None
    scale: float = DEFAULT_EXTENT
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        N = self.center.N
        if N != self.n + 1:
            raise InvalidInputError(f"catalog models are hypersurfaces: need N = n + 1, got n={self.n}, N={N}")
        frame = np.asarray(self.frame, dtype=float).reshape(N, N)
        if not np.allclose(frame.T @ frame, np.eye(N), atol=1e-9):
            raise InvalidInputError("model frame must be orthonormal")
        object.__setattr__(self, "frame", frame)
        if self.scale <= 0:
            raise InvalidInputError(f"model scale must be positive, got {self.scale}")
        if self.resolution < MIN_RESOLUTION:
            raise InvalidInputError(f"resolution must be at least {MIN_RESOLUTION}")

        if self.kind is ModelKind.STATIC_PLANE or self.kind is ModelKind.QUASISTATIC_PLANE:
            object.__setattr__(self, "j", self.n)
        elif self.kind is ModelKind.SHRINKER_SPHERE:
            object.__setattr__(self, "j", 0)
        elif not 1 <= self.j <= self.n - 1:
            raise InvalidInputError(f"cylinder R^j x S^(n-j) needs 1 <= j <= n-1, got j={self.j}")
        if self.kind is ModelKind.QUASISTATIC_PLANE:
            if self.T is None:
                raise InvalidInputError("quasistatic plane needs a disappearance time T")
            object.__setattr__(self, "T", float(self.T))
        elif self.T is not None:
            raise InvalidInputError(f"{self.kind.value} takes no disappearance time")

    @property
    def N(self) -> int:
        return self.center.N

    @property
    def is_shrinker(self) -> bool:
        return self.kind in (ModelKind.SHRINKER_SPHERE, ModelKind.SHRINKER_CYLINDER)

    @property
    def vanishing_time(self) -> float:
        """First time at which the model is empty (inf for static planes)"""
        if self.kind is ModelKind.STATIC_PLANE:
            return math.inf
        if self.kind is ModelKind.QUASISTATIC_PLANE:
            return self.T
        return self.center.t

    @property
    def plane(self) -> np.ndarray:
        """Spatial symmetry plane V as an N x j column basis"""
        return self.frame[:, : self.j]

    def radius(self, t: float) -> float:
        """Radius of the sphere factor at time t (0 at and after the singular time)"""
        if not self.is_shrinker:
            raise InvalidInputError(f"{self.kind.value} has no radius")
        tau = self.center.t - t
        if tau <= 0:
            return 0.0
        return math.sqrt(2.0 * (self.n - self.j) * tau)

    def label(self) -> str:
        if self.kind is ModelKind.SHRINKER_CYLINDER:
            return f"cylinder R^{self.j}xS^{self.n - self.j}"
        if self.kind is ModelKind.SHRINKER_SPHERE:
            return f"sphere S^{self.n}"
        return self.kind.value.replace("_", " ")

    def cache_key(self) -> Tuple[Any, ...]:
        return (
            self.kind.value,
            self.n,
            self.center.x,
            self.center.t,
            np.round(self.frame, 14).tobytes(),
            self.j,
            self.T,
            self.scale,
            self.resolution,
        )

    def integrate(self, t: float, integrand: Callable[[np.ndarray], np.ndarray]) -> float:
        return model_slice(self, t).integrate(integrand)

    def as_track(self, times: Sequence[float], resolution: Optional[int] = None) -> FlowTrack:
        """FlowTrack with analytic slices at ``times``"""
        slices = [model_slice(self, t, resolution) for t in sorted(times)]
        mass = max((s.mass for s in slices), default=0.0)
        return FlowTrack(
            slices=tuple(slices),
            n=self.n,
            N=self.N,
            mass_bound=max(mass, 1e-12),
            singular_times=(self.center.t,) if self.is_shrinker else (),
            singular_points=(self.center,) if self.is_shrinker else (),
            closed=self.kind is ModelKind.SHRINKER_SPHERE,
            vanished=self.kind is not ModelKind.STATIC_PLANE,
            provenance={"model": self.label()},
        )


def make_model(
    kind: ModelKind,
    n: int,
    center: Optional[SpacetimePoint] = None,
    frame: Optional[np.ndarray] = None,
    j: int = 0,
    T: Optional[float] = None,
    scale: float = DEFAULT_EXTENT,
    resolution: int = DEFAULT_RESOLUTION,
) -> SelfSimilarModel:
    """Model centered at the origin with the identity frame unless told otherwise"""
    N = n + 1
    return SelfSimilarModel(
        kind=kind,
        n=n,
        center=center if center is not None else SpacetimePoint.origin(N),
        frame=np.eye(N) if frame is None else frame,
        j=j,
        T=T,
        scale=scale,
        resolution=resolution,
    )


def symmetry_count(model: SelfSimilarModel) -> int:
    """D(model): spatial symmetry dimension, plus 2 for static flows"""
    if model.kind is ModelKind.STATIC_PLANE:
        return model.n + 2
    return model.j


def model_spine(model: SelfSimilarModel) -> Spine:
    """Spine W_X of the model about its center"""
    base = model.center.x
    if model.kind is ModelKind.STATIC_PLANE:
        return Spine(SpineKind.FULL_CYLINDER, base, model.plane)
    if model.kind is ModelKind.QUASISTATIC_PLANE:
        return Spine(SpineKind.HALF_CYLINDER, base, model.plane, time=model.T)
    return Spine(SpineKind.TIME_SLICE, base, model.plane, time=model.center.t)


def rescale_model(model: SelfSimilarModel, X: SpacetimePoint, r: float) -> SelfSimilarModel:
    """Analytic M_{X,r} of a catalog model"""
    if r <= 0:
        raise InvalidInputError(f"scale must be positive, got {r}")
    if X.N != model.N:
        raise InvalidInputError(f"dimension mismatch: point has N={X.N}, model has N={model.N}")
    center = SpacetimePoint(tuple((model.center.position - X.position) / r), (model.center.t - X.t) / r ** 2)
    T = None if model.T is None else (model.T - X.t) / r ** 2
    return replace(model, center=center, T=T, scale=model.scale / r)


def catalog_models(n: int, N: int, j: int, resolution: int = DEFAULT_RESOLUTION) -> List[SelfSimilarModel]:
    """Prototype models (origin, identity frame) with symmetry count D >= j"""
    if N != n + 1:
        raise InvalidInputError(f"catalog covers hypersurfaces only, got n={n}, N={N}")
    if not 0 <= j <= n + 2:
        raise InvalidInputError(f"need 0 <= j <= n + 2, got {j}")
    prototypes = [make_model(ModelKind.SHRINKER_SPHERE, n, resolution=resolution)]
    prototypes += [make_model(ModelKind.SHRINKER_CYLINDER, n, j=i, resolution=resolution) for i in range(1, n)]
    prototypes.append(make_model(ModelKind.QUASISTATIC_PLANE, n, T=0.0, resolution=resolution))
    prototypes.append(make_model(ModelKind.STATIC_PLANE, n, resolution=resolution))
    return [m for m in prototypes if symmetry_count(m) >= j]


def _midpoints(extent: float, count: int) -> Tuple[np.ndarray, float]:
    h = 2.0 * extent / count
    return -extent + h * (np.arange(count) + 0.5), h


def _sphere_factor(dim: int, R: float, resolution: int) -> Tuple[np.ndarray, np.ndarray]:
    """Unit directions and area weights of a round S^dim of radius R (dim in {1, 2})"""
    if dim == 1:
        theta = 2.0 * math.pi * (np.arange(resolution) + 0.5) / resolution
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
        return dirs, np.full(resolution, 2.0 * math.pi * R / resolution)
    if dim == 2:
        m_z = max(resolution // 2, 4)
        z, wz = np.polynomial.legendre.leggauss(m_z)
        phi = 2.0 * math.pi * (np.arange(resolution) + 0.5) / resolution
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        rho = np.sqrt(1.0 - zz ** 2)
        dirs = np.column_stack([(rho * np.cos(pp)).ravel(), (rho * np.sin(pp)).ravel(), zz.ravel()])
        weights = np.outer(wz, np.full(resolution, 2.0 * math.pi / resolution)).ravel() * R ** 2
        return dirs, weights
    raise InvalidInputError(f"sphere factors of dimension {dim} are not supported")


def _flat_factor(dim: int, extent: float, resolution: int) -> Tuple[np.ndarray, np.ndarray]:
    """Midpoint grid on the cube [-extent, extent]^dim"""
    if dim == 0:
        return np.zeros((1, 0)), np.ones(1)
    ticks, h = _midpoints(extent, resolution)
    grids = np.meshgrid(*([ticks] * dim), indexing="ij")
    coords = np.column_stack([g.ravel() for g in grids])
    return coords, np.full(len(coords), h ** dim)


def _evaluate_slice(model: SelfSimilarModel, t: float, resolution: int) -> VarifoldSlice:
    n, N, j = model.n, model.N, model.j
    if t >= model.vanishing_time:
        return VarifoldSlice.empty(t, n, N)
    x0 = model.center.position

    if model.kind in (ModelKind.STATIC_PLANE, ModelKind.QUASISTATIC_PLANE):
        coords, weights = _flat_factor(n, model.scale, resolution)
        positions = x0 + coords @ model.frame[:, :n].T
        normals = np.tile(model.frame[:, n], (len(weights), 1))
        lam = np.zeros((len(weights), n))
        return VarifoldSlice(t, n, positions, weights, normals, lam)

    R = model.radius(t)
    dirs, sphere_w = _sphere_factor(n - j, R, resolution)
    flat, flat_w = _flat_factor(j, model.scale, resolution)
    # every flat sample paired with every sphere sample
    flat_rep = np.repeat(flat, len(dirs), axis=0)
    dirs_rep = np.tile(dirs, (len(flat), 1))
    weights = np.repeat(flat_w, len(dirs)) * np.tile(sphere_w, len(flat))
    axis = model.frame[:, :j]
    sphere_basis = model.frame[:, j:]
    normals = dirs_rep @ sphere_basis.T
    positions = x0 + flat_rep @ axis.T + R * normals
    lam = np.hstack([np.zeros((len(weights), j)), np.full((len(weights), n - j), 1.0 / R)])
    return VarifoldSlice(t, n, positions, weights, normals, lam)


class ModelCatalog:
    """Provider of analytic model slices, cached per (model, time, resolution)"""

    def __init__(self, max_entries: int = 4096):
        self.max_entries = max_entries
        self._slices: Dict[Tuple[Any, ...], VarifoldSlice] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get_slice(
        self, model: SelfSimilarModel, t: float, resolution: Optional[int] = None, cache: bool = True
    ) -> VarifoldSlice:
        resolution = model.resolution if resolution is None else resolution
        if resolution < MIN_RESOLUTION:
            raise InvalidInputError(f"resolution must be at least {MIN_RESOLUTION}, got {resolution}")
        if not cache:
            return _evaluate_slice(model, float(t), resolution)
        key = model.cache_key() + (float(t), resolution)
        with self._lock:
            cached = self._slices.get(key)
            if cached is not None:
                self.hits += 1
                return cached
        result = _evaluate_slice(model, float(t), resolution)
        with self._lock:
            self.misses += 1
            if len(self._slices) >= self.max_entries:
                # drop the oldest entry
                self._slices.pop(next(iter(self._slices)))
            self._slices[key] = result
        return result

    def get_catalog(self, n: int, j: int) -> Dict[str, Any]:
        """Summary of the j-selfsimilar catalog for reports"""
        models = catalog_models(n, n + 1, j)
        return {
            "n": n,
            "j": j,
            "models": [{"kind": m.kind.value, "label": m.label(), "D": symmetry_count(m)} for m in models],
        }

    def stats(self) -> Dict[str, int]:
        with self._lock:
            return {"entries": len(self._slices), "hits": self.hits, "misses": self.misses}

    def clear(self) -> None:
        with self._lock:
            self._slices.clear()
            self.hits = self.misses = 0


def model_slice(model: SelfSimilarModel, t: float, resolution: Optional[int] = None) -> VarifoldSlice:
    """Quadrature-grade sampling of the exact slice at time t (empty at/after vanishing)"""
    return model_catalog.get_slice(model, t, resolution)


# Global model provider instance
model_catalog = ModelCatalog()
