"""
Brakke Pseudometric

Finite deterministic truncation of the distance between Brakke flows on the
unit parabolic ball:

    d(A, B) = sum_{alpha, beta} 2^{-(alpha + beta)} u / (1 + u),
    u = | int phi_alpha dA_{t_beta} - int phi_alpha dB_{t_beta} |

Spatial tests phi_alpha are bumps (1 - |x - c|^2 / w^2)_+^3 of widths 1, 1/2,
1/4 with centers on the lattice wZ^N inside B_{1-w}, ordered by width, then
|c|, then lexicographically. Times t_beta are 0 followed by the dyadic levels
+-1/2, +-1/4, +-3/4, ... ordered by level, then |t|, negative first. Both
lists are cut at the same length; with 14 entries each the tail weight is
below 2^-12.
"""

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Tuple

import numpy as np

from errors import InvalidInputError
from varifold import FlowTrack

logger = logging.getLogger(__name__)

BUMP_WIDTHS = (1.0, 0.5, 0.25)
BUMP_POWER = 3
FAMILY_SIZE = 14


def _lattice_centers(N: int, width: float) -> List[Tuple[float, ...]]:
    reach = int(np.floor((1.0 - width) / width + 1e-12))
    centers = []
    for k in itertools.product(range(-reach, reach + 1), repeat=N):
        c = tuple(width * ki for ki in k)
        if np.linalg.norm(c) <= 1.0 - width + 1e-12:
            centers.append(c)
    return sorted(centers, key=lambda c: (round(float(np.dot(c, c)), 12), c))


def _dyadic_times(count: int) -> List[float]:
    times = [0.0]
    level = 1
    while len(times) < count:
        step = 2.0 ** (-level)
        odd = [m * step for m in range(1, 2 ** level, 2)]
        for value in odd:
            times.extend([-value, value])
        level += 1
    return times[:count]


@dataclass(frozen=True, eq=False)
class TestFunctionFamily:
    """Enumerated bumps, dyadic times and weights 2^{-(alpha + beta)}"""

    N: int
    centers: np.ndarray = field(repr=False)
    widths: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)

    __test__ = False

    @property
    def weights(self) -> np.ndarray:
        alpha = np.arange(1, len(self.widths) + 1)
        beta = np.arange(1, len(self.times) + 1)
        return 2.0 ** (-(alpha[:, None] + beta[None, :]))

    @property
    def tail_weight(self) -> float:
        """Total weight of the terms dropped by the truncation"""
        return 1.0 - float(np.sum(self.weights))

    def evaluate(self, positions: np.ndarray) -> np.ndarray:
        """phi_alpha(positions) as an (m, n_alpha) array"""
        d2 = np.sum((positions[:, None, :] - self.centers[None, :, :]) ** 2, axis=2)
        return np.clip(1.0 - d2 / self.widths[None, :] ** 2, 0.0, None) ** BUMP_POWER


@lru_cache(maxsize=8)
def default_family(N: int, size: int = FAMILY_SIZE) -> TestFunctionFamily:
    if N < 2:
        raise InvalidInputError(f"ambient dimension must be at least 2, got {N}")
    centers: List[Tuple[float, ...]] = []
    widths: List[float] = []
    for w in BUMP_WIDTHS:
        for c in _lattice_centers(N, w):
            centers.append(c)
            widths.append(w)
    if len(centers) < size:
        raise InvalidInputError(f"only {len(centers)} bumps available, requested {size}")
    return TestFunctionFamily(
        N=N,
        centers=np.array(centers[:size]),
        widths=np.array(widths[:size]),
        times=np.array(_dyadic_times(size)),
    )


def family_integrals(flow: FlowTrack, fam: TestFunctionFamily) -> np.ndarray:
    """I[alpha, beta] = int phi_alpha dM_{t_beta}; the empty flow gives zeros"""
    if flow.N != fam.N:
        raise InvalidInputError(f"dimension mismatch: flow N={flow.N}, family N={fam.N}")
    out = np.zeros((len(fam.widths), len(fam.times)))
    if flow.is_empty:
        return out
    for b, t in enumerate(fam.times):
        for s, w in flow.bracket(float(t)):
            if w > 0 and not s.is_empty:
                out[:, b] += w * (s.weights @ fam.evaluate(s.positions))
    return out


def distance_from_integrals(IA: np.ndarray, IB: np.ndarray, fam: TestFunctionFamily) -> np.ndarray:
    """d_B from precomputed integrals; IB may carry leading candidate axes"""
    u = np.abs(IB - IA)
    return np.sum(fam.weights * u / (1.0 + u), axis=(-2, -1))


def brakke_distance(A: FlowTrack, B: FlowTrack, fam: TestFunctionFamily) -> float:
    """Truncated Brakke pseudometric between two flows on the unit parabolic ball"""
    return float(distance_from_integrals(family_integrals(A, fam), family_integrals(B, fam), fam))
