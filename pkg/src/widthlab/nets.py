"""Greedy packings, coverings, and two-sided entropy-number brackets.

The n-th entropy number of a class K is the smallest radius at which 2^n
balls cover K.  On a finite cloud we bracket it from both sides:

  lower: half the separation of a greedy (2^n + 1)-point packing, since any
         cover by 2^n balls puts two packed points in one ball;
  upper: the radius of a greedy 2^n-center cover with centers inside K.

Greedy farthest-point selection is a 2-approximation for both problems, and
both bounds are certificates in their own right (an actual packing, an
actual cover), so the bracket is valid regardless of approximation quality.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .spaces import ModelClassSurrogate, pairwise_distances

__all__ = [
    "Net",
    "EntropyBracket",
    "greedy_packing",
    "greedy_cover",
    "entropy_bracket",
    "exact_cover_radius",
    "build_net",
]


@dataclass(frozen=True)
class Net:
    """Covering net: centers (rows) and the radius they achieve."""

    centers: np.ndarray
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")
        object.__setattr__(self, "centers", np.asarray(self.centers, dtype=float))


@dataclass(frozen=True)
class EntropyBracket:
    """Two-sided bracket for the n-th entropy number of a finite cloud."""

    n: int
    lower: float
    upper: float
    packing_witness: np.ndarray
    cover_centers: np.ndarray

    def __post_init__(self):
        if not (0.0 <= self.lower <= self.upper + 1e-12):
            raise ValueError(
                f"bracket out of order: lower={self.lower}, upper={self.upper}"
            )


def _greedy_order(dist: np.ndarray, m: int) -> tuple[list[int], np.ndarray]:
    """First m farthest-point-selection indices plus min-distance profile.

    Selection starts at index 0; every later pick maximizes the distance to
    the already selected set, ties broken by lowest index (np.argmax).
    Returns the selected indices and, for each of them, the distance to the
    previously selected set (inf for the first pick).
    """
    count = dist.shape[0]
    m = min(m, count)
    selected = [0]
    gaps = [math.inf]
    mindist = dist[0].copy()
    for _ in range(1, m):
        j = int(np.argmax(mindist))
        selected.append(j)
        gaps.append(float(mindist[j]))
        np.minimum(mindist, dist[j], out=mindist)
    return selected, np.asarray(gaps)


def greedy_packing(
    K: ModelClassSurrogate, m: int
) -> tuple[np.ndarray, float]:
    """Greedy m-point packing of the cloud; returns (points, separation).

    The separation of the selected set is at least half the best separation
    achievable by any m-subset.  m = 1 reports infinite separation.
    """
    if m < 1:
        raise ValueError("m must be positive")
    if m > K.count:
        raise ValueError(f"asked for {m} points but cloud has {K.count}")
    if m == 1:
        return K.points[:1].copy(), math.inf
    dist = pairwise_distances(K.points, K.space.p)
    selected, gaps = _greedy_order(dist, m)
    # the min pairwise distance of the selected set equals the last gap
    # because greedy gaps are nonincreasing
    return K.points[selected].copy(), float(gaps[-1])


def greedy_cover(K: ModelClassSurrogate, m: int) -> Net:
    """Greedy m-center cover of the cloud by its own points.

    Radius is within a factor 2 of the best m-center cover with centers in
    the cloud (classical farthest-point guarantee).
    """
    if m < 1:
        raise ValueError("m must be positive")
    m = min(m, K.count)
    dist = pairwise_distances(K.points, K.space.p)
    selected, _ = _greedy_order(dist, m)
    radius = float(np.max(np.min(dist[selected], axis=0)))
    return Net(centers=K.points[selected].copy(), radius=radius)


def entropy_bracket(K: ModelClassSurrogate, n: int) -> EntropyBracket:
    """Bracket the n-th entropy number of the cloud, n >= 0.

    The lower bound needs a (2^n + 1)-point packing; when the cloud is too
    small for that the lower bound degrades to 0 with an empty witness.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    budget = 2**n
    cover = greedy_cover(K, budget)
    if budget + 1 <= K.count:
        witness, sep = greedy_packing(K, budget + 1)
        lower = sep / 2.0
    else:
        witness = np.empty((0, K.space.dim))
        lower = 0.0
    return EntropyBracket(
        n=n,
        lower=lower,
        upper=cover.radius,
        packing_witness=witness,
        cover_centers=cover.centers,
    )


def exact_cover_radius(K: ModelClassSurrogate, m: int) -> float:
    """Best m-center cover radius with centers in the cloud, by enumeration.

    Exponential in the cloud size; refuses clouds larger than 14 points.
    Serves as the oracle for the greedy bounds.
    """
    if K.count > 14:
        raise ValueError("exact enumeration limited to clouds of <= 14 points")
    if m < 1:
        raise ValueError("m must be positive")
    m = min(m, K.count)
    dist = pairwise_distances(K.points, K.space.p)
    best = math.inf
    for subset in itertools.combinations(range(K.count), m):
        radius = np.max(np.min(dist[list(subset)], axis=0))
        if radius < best:
            best = float(radius)
    return best


def build_net(K: ModelClassSurrogate, eps: float) -> Net:
    """Smallest greedy net achieving radius <= eps (inner covering).

    Greedy radii are nonincreasing in the center count, so the first count
    whose radius drops to eps is returned.  eps = 0 returns the full cloud.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    dist = pairwise_distances(K.points, K.space.p)
    selected, _ = _greedy_order(dist, K.count)
    mindist = dist[selected[0]].copy()
    if np.max(mindist) <= eps:
        return Net(centers=K.points[selected[:1]].copy(), radius=float(np.max(mindist)))
    for used, j in enumerate(selected[1:], start=2):
        np.minimum(mindist, dist[j], out=mindist)
        radius = float(np.max(mindist))
        if radius <= eps:
            return Net(centers=K.points[selected[:used]].copy(), radius=radius)
    # eps below the cloud's own granularity: every point is a center
    return Net(centers=K.points[selected].copy(), radius=0.0)
