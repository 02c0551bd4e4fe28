"""Two-layer event network: local features, cross features, histograms.

Training is two-phase. The local codebook is learned from the local time
vectors of every training recording; the cross codebook is then learned
from cross time vectors built on top of the local layer's inferred
features. Temporal contexts start fresh for each recording.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from . import clustering
from .clustering import Codebook, MiniBatchConfig
from .errors import BadVersion, DimensionMismatch, FeatureOutOfRange
from .events import NUM_CHANNELS, CrossStream, LocalStream, RawStream, Recording
from .timecontext import (
    TauSchedule,
    check_monotone,
    cross_nearest,
    cross_time_vectors,
    local_time_vectors,
)

FORMAT_NAME = "cochleanet-model"
FORMAT_VERSION = 1

DEFAULT_LOCAL_CAP = 2_000_000
DEFAULT_CROSS_CAP = 200_000


@dataclass
class LocalLayerModel:
    codebook: Codebook
    tau_local: float
    n: int

    def __post_init__(self):
        if self.codebook.dim != self.n:
            raise DimensionMismatch(f"local codebook dim {self.codebook.dim} != n={self.n}")

    @property
    def lk(self) -> int:
        return self.codebook.k

    @property
    def schedule(self) -> TauSchedule:
        return TauSchedule(self.tau_local)


@dataclass
class CrossLayerModel:
    codebook: Codebook
    tau_cr: float

    @property
    def ck(self) -> int:
        return self.codebook.k


@dataclass
class NetworkModel:
    local: LocalLayerModel
    cross: CrossLayerModel
    version: int = FORMAT_VERSION

    def __post_init__(self):
        expected = NUM_CHANNELS * self.local.lk
        if self.cross.codebook.dim != expected:
            raise DimensionMismatch(
                f"cross codebook dim {self.cross.codebook.dim} != 32*lk = {expected}")

    @property
    def ck(self) -> int:
        return self.cross.ck


@dataclass
class ActivityHistogram:
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, ActivityHistogram):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)


def _streams(recordings) -> List[RawStream]:
    return [r.stream if isinstance(r, Recording) else r for r in recordings]


def _subsample(sizes: Sequence[int], cap: Optional[int], seed: int) -> List[np.ndarray]:
    """Per-recording sorted event indices kept for clustering."""
    total = int(sum(sizes))
    if cap is None or total <= cap:
        return [np.arange(s, dtype=np.int64) for s in sizes]
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(total, size=cap, replace=False))
    bounds = np.cumsum([0] + list(sizes))
    return [picked[(picked >= lo) & (picked < hi)] - lo
            for lo, hi in zip(bounds[:-1], bounds[1:])]


def train_local(recordings: Iterable, n: int, lk: int, tau_local: float,
                kmeans_cfg: MiniBatchConfig,
                max_vectors: Optional[int] = DEFAULT_LOCAL_CAP) -> LocalLayerModel:
    streams = _streams(recordings)
    if not streams:
        raise ValueError("no recordings to train on")
    sched = TauSchedule(tau_local)
    keep = _subsample([len(s) for s in streams], max_vectors, kmeans_cfg.seed)
    vectors = [local_time_vectors(s, n, sched)[idx] for s, idx in zip(streams, keep)]
    data = np.concatenate(vectors) if vectors else np.zeros((0, n))
    codebook = clustering.fit(data, dataclasses.replace(kmeans_cfg, k=lk))
    return LocalLayerModel(codebook, tau_local, n)


def infer_local(stream: RawStream, model: LocalLayerModel) -> LocalStream:
    vectors = local_time_vectors(stream, model.n, model.schedule)
    if len(stream):
        features = clustering.predict_many(model.codebook, vectors)
    else:
        features = np.zeros(0, dtype=np.int64)
    return LocalStream(stream.timestamps, stream.channels, features, stream.duration_us)


def train_cross(recordings: Iterable, local_model: LocalLayerModel, ck: int, tau_cr: float,
                kmeans_cfg: MiniBatchConfig,
                max_vectors: Optional[int] = DEFAULT_CROSS_CAP) -> CrossLayerModel:
    streams = _streams(recordings)
    if not streams:
        raise ValueError("no recordings to train on")
    lk = local_model.lk
    keep = _subsample([len(s) for s in streams], max_vectors, kmeans_cfg.seed + 1)
    vectors = []
    for s, idx in zip(streams, keep):
        if idx.size == 0:
            check_monotone(s.timestamps)
            continue
        vectors.append(cross_time_vectors(infer_local(s, local_model), lk, tau_cr, idx))
    data = np.concatenate(vectors) if vectors else np.zeros((0, NUM_CHANNELS * lk))
    codebook = clustering.fit(data, dataclasses.replace(kmeans_cfg, k=ck))
    return CrossLayerModel(codebook, tau_cr)


def infer_cross(local_stream: LocalStream, model: NetworkModel) -> CrossStream:
    features = cross_nearest(local_stream, model.local.lk, model.cross.tau_cr,
                             model.cross.codebook.centers)
    return CrossStream(local_stream.timestamps, features, local_stream.duration_us)


def histogram(cross_stream: CrossStream, ck: int) -> ActivityHistogram:
    f = cross_stream.cross_features
    if f.size and (f.min() < 0 or f.max() >= ck):
        raise FeatureOutOfRange(f"cross features outside [0, {ck - 1}]")
    return ActivityHistogram(np.bincount(f, minlength=ck).astype(np.int64))


def process_recording(model: NetworkModel, raw_stream: RawStream) -> ActivityHistogram:
    local = infer_local(raw_stream, model.local)
    return histogram(infer_cross(local, model), model.ck)


def train_network(recordings, n: int = 5, lk: int = 6, tau_local: float = 1e-3,
                  ck: int = 96, tau_cr: float = 0.2,
                  kmeans_cfg: Optional[MiniBatchConfig] = None,
                  local_cap: Optional[int] = DEFAULT_LOCAL_CAP,
                  cross_cap: Optional[int] = DEFAULT_CROSS_CAP) -> NetworkModel:
    kmeans_cfg = kmeans_cfg or MiniBatchConfig(k=1)
    streams = _streams(recordings)
    local = train_local(streams, n, lk, tau_local, kmeans_cfg, local_cap)
    cross = train_cross(streams, local, ck, tau_cr, kmeans_cfg, cross_cap)
    return NetworkModel(local, cross)


# -- serialization ---------------------------------------------------------

def _codebook_doc(cb: Codebook) -> dict:
    return {"k": cb.k, "dim": cb.dim, "counts": cb.counts.tolist(),
            "centers": cb.centers.tolist()}


def _codebook_from(doc: dict) -> Codebook:
    centers = np.array(doc["centers"], dtype=np.float64).reshape(doc["k"], doc["dim"])
    if not np.all(np.isfinite(centers)):
        raise BadVersion("non-finite center value")
    return Codebook(centers, np.array(doc["counts"], dtype=np.int64))


def network_to_doc(model: NetworkModel) -> dict:
    return {
        "local": {"n": model.local.n, "lk": model.local.lk,
                  "tau_local_s": model.local.tau_local,
                  "codebook": _codebook_doc(model.local.codebook)},
        "cross": {"ck": model.cross.ck, "tau_cr_s": model.cross.tau_cr,
                  "codebook": _codebook_doc(model.cross.codebook)},
    }


def network_from_doc(doc: dict) -> NetworkModel:
    try:
        local = LocalLayerModel(_codebook_from(doc["local"]["codebook"]),
                                float(doc["local"]["tau_local_s"]), int(doc["local"]["n"]))
        cross = CrossLayerModel(_codebook_from(doc["cross"]["codebook"]),
                                float(doc["cross"]["tau_cr_s"]))
    except (KeyError, TypeError) as exc:
        raise BadVersion(f"malformed network section: {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, (DimensionMismatch, BadVersion)):
            raise
        raise BadVersion(f"malformed network section: {exc}") from exc
    return NetworkModel(local, cross)


def dump_document(doc: dict) -> bytes:
    return (json.dumps(doc, separators=(",", ":"), allow_nan=False) + "\n").encode("utf-8")


def parse_document(data: bytes) -> dict:
    try:
        doc = json.loads(data)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BadVersion(f"model document does not parse: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise BadVersion("not a cochleanet model document")
    if doc.get("version") != FORMAT_VERSION:
        raise BadVersion(f"unsupported model version {doc.get('version')!r}")
    return doc


def save_model(model: NetworkModel, classifiers: Optional[dict] = None) -> bytes:
    doc = {"format": FORMAT_NAME, "version": FORMAT_VERSION,
           "network": network_to_doc(model)}
    if classifiers is not None:
        doc["classifiers"] = classifiers
    return dump_document(doc)


def load_model(data: bytes) -> NetworkModel:
    doc = parse_document(data)
    if "network" not in doc:
        raise BadVersion("model document has no network section")
    return network_from_doc(doc["network"])
