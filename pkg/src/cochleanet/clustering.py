"""Mini-batch k-means with per-center 1/count learning rates.

Both network layers learn their codebooks with this. Assignment always
uses squared Euclidean distance with ties going to the lowest center
index, and training and inference share one assignment routine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from .errors import DimensionMismatch, TooFewPoints


@numba.njit(cache=True)
def nearest_row(x, centers):
    best = 0
    best_d = np.inf
    for k in range(centers.shape[0]):
        d = 0.0
        for j in range(centers.shape[1]):
            diff = x[j] - centers[k, j]
            d += diff * diff
        if d < best_d:
            best_d = d
            best = k
    return best


@numba.njit(cache=True)
def _nearest_rows_direct(points, centers):
    out = np.empty(points.shape[0], dtype=np.int64)
    for i in range(points.shape[0]):
        out[i] = nearest_row(points[i], centers)
    return out


@numba.njit(cache=True)
def _nearest_among(points, centers, rows, mask, out):
    for r in rows:
        best = -1
        best_d = np.inf
        for k in range(centers.shape[0]):
            if not mask[r, k]:
                continue
            d = 0.0
            for j in range(centers.shape[1]):
                diff = points[r, j] - centers[k, j]
                d += diff * diff
            if d < best_d:
                best_d = d
                best = k
        out[r] = best


_DIRECT_WORK = 256  # k * dim below which the plain scan is faster than BLAS


def nearest_rows(points, centers):
    """Index of the nearest center for every row of ``points``.

    Same answer as scanning every center with the direct squared-distance
    sum (lowest index on ties). For larger codebooks the expanded form
    ``|x|^2 - 2 x.c + |c|^2`` screens candidates through BLAS first, and
    only rows with several candidates inside the rounding margin are
    re-scanned directly.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    if centers.shape[0] * centers.shape[1] <= _DIRECT_WORK or points.shape[0] < 8:
        return _nearest_rows_direct(points, centers)
    cn = np.einsum("ij,ij->i", centers, centers)
    xn = np.einsum("ij,ij->i", points, points)
    d = (xn[:, None] + cn[None, :]) - 2.0 * (points @ centers.T)
    m = d.min(axis=1)
    margin = 1e-9 * (xn + cn.max()) + 1e-300
    mask = d <= (m + margin)[:, None]
    out = np.argmax(mask, axis=1).astype(np.int64)
    ambiguous = np.flatnonzero(mask.sum(axis=1) > 1)
    if ambiguous.size:
        _nearest_among(points, centers, ambiguous, mask, out)
    return out


@numba.njit(cache=True)
def _sqdist_to(points, c, out):
    for i in range(points.shape[0]):
        d = 0.0
        for j in range(points.shape[1]):
            diff = points[i, j] - c[j]
            d += diff * diff
        out[i] = d


@dataclass
class Codebook:
    centers: np.ndarray
    counts: np.ndarray = None

    def __post_init__(self):
        self.centers = np.ascontiguousarray(self.centers, dtype=np.float64)
        if self.centers.ndim != 2:
            raise DimensionMismatch("centers must be a (k, dim) matrix")
        if self.counts is None:
            self.counts = np.zeros(self.k, dtype=np.int64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (self.k,):
            raise DimensionMismatch("need one count per center")

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def copy(self) -> "Codebook":
        return Codebook(self.centers.copy(), self.counts.copy())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Codebook):
            return NotImplemented
        return (np.array_equal(self.centers, other.centers)
                and np.array_equal(self.counts, other.counts))


@dataclass
class MiniBatchConfig:
    k: int
    batch_size: int = 1024
    num_iterations: Optional[int] = None  # None -> 10 passes over the data
    seed: int = 0
    init_method: str = "kmeans++"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.init_method not in ("kmeans++", "random-sample"):
            raise ValueError(f"unknown init_method {self.init_method!r}")

    def iterations_for(self, n_points: int) -> int:
        if self.num_iterations is not None:
            return self.num_iterations
        return 10 * math.ceil(n_points / self.batch_size)


def _as_dataset(data) -> np.ndarray:
    x = np.ascontiguousarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch("dataset must be a 2-D array of row vectors")
    return x


def init_centers(dataset, config: MiniBatchConfig,
                 rng: Optional[np.random.Generator] = None) -> Codebook:
    x = _as_dataset(dataset)
    n = x.shape[0]
    k = config.k
    if n < k:
        raise TooFewPoints(f"need at least k={k} points, got {n}")
    rng = rng if rng is not None else np.random.default_rng(config.seed)

    if config.init_method == "random-sample":
        chosen = rng.choice(n, size=k, replace=False)
        return Codebook(x[chosen].copy())

    chosen = [int(rng.integers(n))]
    taken = np.zeros(n, dtype=bool)
    taken[chosen[0]] = True
    closest = np.empty(n)
    _sqdist_to(x, x[chosen[0]], closest)
    scratch = np.empty(n)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # every remaining point coincides with a chosen center
            idx = int(rng.choice(np.flatnonzero(~taken)))
        chosen.append(idx)
        taken[idx] = True
        _sqdist_to(x, x[idx], scratch)
        np.minimum(closest, scratch, out=closest)
    return Codebook(x[chosen].copy())


def partial_fit(codebook: Codebook, batch) -> Codebook:
    """One mini-batch step, updating ``codebook`` in place and returning it.

    Points are assigned against the centers as they stood at the start of
    the batch. Each assignment then bumps its center's count and moves the
    center by ``(x - center) / count``; applied over one batch that sequence
    telescopes to ``(count0 * center0 + sum(x)) / (count0 + r)``, which is
    what is computed.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.size == 0:
        return codebook
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != codebook.dim:
        raise DimensionMismatch(f"batch dim {x.shape[1]} != codebook dim {codebook.dim}")
    labels = nearest_rows(np.ascontiguousarray(x), codebook.centers)
    for c in np.unique(labels):
        members = x[labels == c]
        c0 = codebook.counts[c]
        r = members.shape[0]
        codebook.centers[c] = (c0 * codebook.centers[c] + members.sum(axis=0)) / (c0 + r)
        codebook.counts[c] = c0 + r
    return codebook


def predict(codebook: Codebook, point) -> int:
    p = np.asarray(point, dtype=np.float64)
    if p.shape != (codebook.dim,):
        raise DimensionMismatch(f"point shape {p.shape} != ({codebook.dim},)")
    return int(nearest_row(p, codebook.centers))


def predict_many(codebook: Codebook, points) -> np.ndarray:
    x = np.ascontiguousarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != codebook.dim:
        raise DimensionMismatch(f"points shape {x.shape} incompatible with dim {codebook.dim}")
    return nearest_rows(x, codebook.centers)


def fit(dataset, config: MiniBatchConfig) -> Codebook:
    """Seeded mini-batch k-means.

    Batches are consecutive slices of a fresh random permutation per pass,
    so every ``ceil(N / batch_size)`` iterations cover each point once.
    """
    x = _as_dataset(dataset)
    rng = np.random.default_rng(config.seed)
    codebook = init_centers(x, config, rng)
    n = x.shape[0]
    per_pass = math.ceil(n / config.batch_size)
    order = None
    for it in range(config.iterations_for(n)):
        step = it % per_pass
        if step == 0:
            order = rng.permutation(n)
        sel = order[step * config.batch_size:(step + 1) * config.batch_size]
        partial_fit(codebook, x[sel])
    return codebook
