"""Finite-dimensional normed spaces and finite surrogates of compact model classes.

Everything downstream (nets, extensions, width experiments) works on finite
point clouds carrying an ambient l_p norm.  A surrogate stands in for an
ideal compact class; its ``resolution`` records how densely it fills the
ideal set (0 when the surrogate is the class itself).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "FiniteNormedSpace",
    "ModelClassSurrogate",
    "AlphaSequence",
    "norm",
    "pairwise_distances",
    "generate_Kq",
    "generate_diag_class",
    "generate_sparse_class",
    "save_points",
    "load_points",
]


@dataclass(frozen=True)
class FiniteNormedSpace:
    """R^dim equipped with the l_p norm, p in [1, inf]."""

    dim: int
    p: float = 2.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if not (self.p >= 1.0):
            raise ValueError(f"p must satisfy 1 <= p <= inf, got {self.p}")


def norm(x: np.ndarray, space: FiniteNormedSpace) -> np.ndarray:
    """l_p norm of a vector, or row-wise norms of a 2-d array of vectors."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != space.dim:
        raise ValueError(f"vector length {x.shape[-1]} != space dim {space.dim}")
    if math.isinf(space.p):
        return np.max(np.abs(x), axis=-1)
    if space.p == 1.0:
        return np.sum(np.abs(x), axis=-1)
    if space.p == 2.0:
        return np.sqrt(np.sum(x * x, axis=-1))
    return np.sum(np.abs(x) ** space.p, axis=-1) ** (1.0 / space.p)


def pairwise_distances(points: np.ndarray, p: float) -> np.ndarray:
    """Dense matrix of l_p distances between rows of ``points``."""
    from scipy.spatial import distance

    points = np.asarray(points, dtype=float)
    if math.isinf(p):
        return distance.squareform(distance.pdist(points, "chebyshev"))
    if p == 1.0:
        return distance.squareform(distance.pdist(points, "cityblock"))
    if p == 2.0:
        return distance.squareform(distance.pdist(points, "euclidean"))
    return distance.squareform(distance.pdist(points, "minkowski", p=p))


@dataclass(frozen=True)
class ModelClassSurrogate:
    """Finite point cloud standing in for a compact class K.

    resolution: guaranteed (or estimated) density of the cloud in the ideal
    class, 0 when the cloud is exact.  convex: whether the ideal class is
    convex, which nearest-point projection steps rely on.
    """

    space: FiniteNormedSpace
    points: np.ndarray
    resolution: float = 0.0
    label: str = "custom"
    convex: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise ValueError("points must be a 2-d array, one point per row")
        if pts.shape[1] != self.space.dim:
            raise ValueError(
                f"point length {pts.shape[1]} != space dim {self.space.dim}"
            )
        if pts.shape[0] < 1:
            raise ValueError("surrogate needs at least one point")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise ValueError("surrogate points must be pairwise distinct")
        if self.resolution < 0:
            raise ValueError("resolution must be nonnegative")
        object.__setattr__(self, "points", pts)

    @property
    def count(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class AlphaSequence:
    """Slowly decaying sequence alpha_j = (1 + log2 j)^(-r/2), j >= 1.

    Strictly decreasing, tends to 0, and the ratio alpha_{2n}/alpha_n tends
    to 1; these are the properties the diagonal counterexample needs.
    """

    r: float

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError(f"r must be positive, got {self.r}")

    def alpha(self, j) -> np.ndarray | float:
        j_arr = np.asarray(j)
        if np.any(j_arr < 1):
            raise ValueError("alpha_j is defined for j >= 1")
        out = (1.0 + np.log2(j_arr)) ** (-self.r / 2.0)
        return float(out) if np.isscalar(j) else out


def _dedupe_resample(draw, count: int, max_rounds: int = 16) -> np.ndarray:
    """Draw ``count`` points, redrawing until rows are pairwise distinct."""
    pts = draw(count)
    for _ in range(max_rounds):
        uniq = np.unique(pts, axis=0)
        if uniq.shape[0] == count and pts.shape[0] == count:
            return pts
        pts = np.concatenate([uniq, draw(count - uniq.shape[0])], axis=0)
    raise RuntimeError("could not draw pairwise distinct points")


def generate_Kq(
    N: int, q: float, count: int, seed: int, ambient_p: float = 2.0
) -> ModelClassSurrogate:
    """Sample ``count`` points uniformly from the unit l_q ball in R^N.

    Direction is drawn from the cone measure of the l_q sphere (coordinates
    sign * Gamma(1/q)^(1/q)), radius from the U^(1/N) law, which together
    give the uniform distribution on the ball.  q = inf uses uniform
    coordinates in [-1, 1], which is that ball's uniform law directly.
    """
    if count < 1:
        raise ValueError("count must be positive")
    if not (q >= 1.0):
        raise ValueError(f"q must satisfy 1 <= q <= inf, got {q}")
    rng = np.random.default_rng(seed)
    qspace = FiniteNormedSpace(N, q)

    def draw(k: int) -> np.ndarray:
        if math.isinf(q):
            return rng.uniform(-1.0, 1.0, size=(k, N))
        mag = rng.standard_gamma(1.0 / q, size=(k, N)) ** (1.0 / q)
        direction = mag * rng.choice([-1.0, 1.0], size=(k, N))
        direction /= norm(direction, qspace)[:, None]
        radius = rng.uniform(size=k) ** (1.0 / N)
        return direction * radius[:, None]

    pts = _dedupe_resample(draw, count)
    return ModelClassSurrogate(
        space=FiniteNormedSpace(N, ambient_p),
        points=pts,
        resolution=0.0,
        label=f"Kq(q={q})",
        convex=True,
    )


def generate_diag_class(alpha: AlphaSequence, m: int) -> ModelClassSurrogate:
    """Truncated diagonal class {alpha_j e_j : j <= m} plus the origin in l_2^m.

    Every dropped tail point alpha_j e_j (j > m) lies within alpha_{m+1} of
    the origin, so the truncation resolution is alpha_{m+1}.
    """
    if m < 1:
        raise ValueError("m must be positive")
    pts = np.zeros((m + 1, m))
    idx = np.arange(1, m + 1)
    pts[:m, :][idx - 1, idx - 1] = alpha.alpha(idx)
    return ModelClassSurrogate(
        space=FiniteNormedSpace(m, 2.0),
        points=pts,
        resolution=float(alpha.alpha(m + 1)),
        label=f"diag(r={alpha.r})",
        convex=False,
    )


def generate_sparse_class(
    N: int, k: int, count: int, seed: int
) -> ModelClassSurrogate:
    """Sample k-sparse points from the unit l_2 ball in R^N.

    Supports are uniform among the k-subsets; on each support the entries
    are uniform in the k-dimensional unit ball (sphere direction times a
    U^(1/k) radius).  resolution is estimated below by probe sampling.
    """
    if not (1 <= k <= N):
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={N}")
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)

    def draw(n_draw: int) -> np.ndarray:
        pts = np.zeros((n_draw, N))
        for i in range(n_draw):
            support = rng.choice(N, size=k, replace=False)
            g = rng.standard_normal(k)
            g /= np.linalg.norm(g)
            pts[i, support] = g * rng.uniform() ** (1.0 / k)
        return pts

    pts = _dedupe_resample(draw, count)
    # estimated covering density of the cloud in Sigma_k cap B: max distance
    # from fresh probe draws to their nearest cloud point (a lower estimate
    # of the true covering radius; callers fold in realized distances too)
    probes = draw(4 * count)
    d2 = np.linalg.norm(probes[:, None, :] - pts[None, :, :], axis=2)
    res = float(np.max(np.min(d2, axis=1)))
    return ModelClassSurrogate(
        space=FiniteNormedSpace(N, 2.0),
        points=pts,
        resolution=res,
        label=f"sparse(k={k})",
        convex=False,
    )


def save_points(K: ModelClassSurrogate, path: str | Path) -> None:
    """Write the cloud as CSV (header x0..x{N-1}) plus a key=value sidecar."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(K.space.dim)])
        for row in K.points:
            writer.writerow([repr(float(v)) for v in row])
    meta = path.with_suffix(path.suffix + ".meta")
    with open(meta, "w") as fh:
        fh.write(f"dim={K.space.dim}\n")
        fh.write(f"p={K.space.p}\n")
        fh.write(f"resolution={K.resolution!r}\n")
        fh.write(f"label={K.label}\n")
        fh.write(f"convex={int(K.convex)}\n")


def load_points(path: str | Path) -> ModelClassSurrogate:
    """Inverse of save_points; the sidecar must sit next to the CSV."""
    path = Path(path)
    pts = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    meta: dict[str, str] = {}
    with open(path.with_suffix(path.suffix + ".meta")) as fh:
        for line in fh:
            line = line.strip()
            if line:
                key, _, value = line.partition("=")
                meta[key] = value
    space = FiniteNormedSpace(int(meta["dim"]), float(meta["p"]))
    return ModelClassSurrogate(
        space=space,
        points=pts,
        resolution=float(meta["resolution"]),
        label=meta["label"],
        convex=bool(int(meta.get("convex", "0"))),
    )
