"""Experiment harness: encode, split, train and evaluate a labelled dataset.

A dataset is a directory with one subdirectory per label, each holding
``.aedat`` recordings (or ``.wav`` files before encoding). Every step is a
deterministic function of (dataset, config, seed).
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import aedat, classifiers, cochlea
from .clustering import MiniBatchConfig
from .errors import BadVersion, CochleaNetError, TooFewSamples
from .events import NUM_CHANNELS, RawStream
from .network import (
    FORMAT_NAME,
    FORMAT_VERSION,
    NetworkModel,
    dump_document,
    network_from_doc,
    network_to_doc,
    parse_document,
    process_recording,
    train_network,
)

log = logging.getLogger(__name__)

DATA_ROOT_ENV = "COCHLEANET_DATA_ROOT"


class ConfigError(CochleaNetError, ValueError):
    """Bad configuration or missing input; the CLI maps it to exit code 2."""


@dataclass
class ExperimentConfig:
    dataset_root: str = ""
    labels: List[str] = field(default_factory=list)
    split_fraction: float = 0.7
    seed: int = 0
    n: int = 5
    lk: int = 6
    tau_local_s: float = 1e-3
    ck: int = 96
    tau_cr_s: float = 0.2
    local_max_vectors: Optional[int] = 2_000_000
    cross_max_vectors: Optional[int] = 200_000
    kmeans_batch_size: int = 1024
    kmeans_iterations: Optional[int] = None
    kmeans_init: str = "kmeans++"
    mlp_hidden: int = 30
    mlp_learning_rate: float = 0.01
    mlp_momentum: float = 0.9
    mlp_batch_size: int = 32
    mlp_epochs: int = 300
    mlp_normalize: bool = True
    jobs: int = 1

    # flat dotted keys accepted in JSON config files
    KEYS = {
        "dataset.root": "dataset_root", "dataset.labels": "labels",
        "split.fraction": "split_fraction", "seed": "seed",
        "local.n": "n", "local.lk": "lk", "local.tau_s": "tau_local_s",
        "local.max_vectors": "local_max_vectors",
        "cross.ck": "ck", "cross.tau_s": "tau_cr_s", "cross.max_vectors": "cross_max_vectors",
        "kmeans.batch_size": "kmeans_batch_size", "kmeans.iterations": "kmeans_iterations",
        "kmeans.init": "kmeans_init",
        "mlp.hidden": "mlp_hidden", "mlp.learning_rate": "mlp_learning_rate",
        "mlp.momentum": "mlp_momentum", "mlp.batch_size": "mlp_batch_size",
        "mlp.epochs": "mlp_epochs", "mlp.normalize": "mlp_normalize", "jobs": "jobs",
    }

    def validate(self) -> "ExperimentConfig":
        if not 0 < self.split_fraction < 1:
            raise ConfigError(f"split fraction must be in (0, 1), got {self.split_fraction}")
        if self.labels and len(self.labels) < 2:
            raise ConfigError("need at least two labels")
        for name in ("n", "lk", "ck", "mlp_hidden", "mlp_epochs", "mlp_batch_size",
                     "kmeans_batch_size", "jobs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.tau_local_s <= 0 or self.tau_cr_s <= 0:
            raise ConfigError("time constants must be positive")
        return self

    def update(self, values: Dict[str, object]) -> "ExperimentConfig":
        for key, value in values.items():
            attr = self.KEYS.get(key, key.replace(".", "_"))
            if attr not in {f.name for f in dataclasses.fields(self)}:
                raise ConfigError(f"unknown config key {key!r}")
            if attr == "labels" and isinstance(value, str):
                value = [v for v in value.split(",") if v]
            setattr(self, attr, value)
        return self

    def to_doc(self) -> dict:
        inverse = {v: k for k, v in self.KEYS.items()}
        return {inverse[f.name]: getattr(self, f.name) for f in dataclasses.fields(self)
                if f.name != "jobs"}

    def kmeans(self) -> MiniBatchConfig:
        return MiniBatchConfig(k=1, batch_size=self.kmeans_batch_size,
                               num_iterations=self.kmeans_iterations, seed=self.seed,
                               init_method=self.kmeans_init)

    def mlp(self) -> classifiers.MlpConfig:
        return classifiers.MlpConfig(hidden=self.mlp_hidden,
                                     learning_rate=self.mlp_learning_rate,
                                     momentum=self.mlp_momentum,
                                     batch_size=self.mlp_batch_size, epochs=self.mlp_epochs,
                                     seed=self.seed, normalize=self.mlp_normalize)


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None,
                env: Optional[dict] = None) -> ExperimentConfig:
    """Defaults < JSON config file < environment data-root override < flags."""
    cfg = ExperimentConfig()
    if path:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        cfg.update(doc)
    env = os.environ if env is None else env
    if env.get(DATA_ROOT_ENV):
        cfg.dataset_root = env[DATA_ROOT_ENV]
    cfg.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return cfg.validate()


# -- dataset ---------------------------------------------------------------

@dataclass(frozen=True)
class DatasetItem:
    id: str
    label: str
    path: Path


def scan_dataset(root, labels: Sequence[str] = (), suffix: str = ".aedat") -> List[DatasetItem]:
    root = Path(root)
    if not str(root) or not root.is_dir():
        raise ConfigError(f"dataset directory not found: {root}")
    wanted = list(labels) or sorted(p.name for p in root.iterdir() if p.is_dir())
    items = []
    for label in sorted(wanted):
        d = root / label
        if not d.is_dir():
            raise ConfigError(f"label directory not found: {d}")
        for p in sorted(d.glob(f"*{suffix}")):
            items.append(DatasetItem(f"{label}/{p.stem}", label, p))
    return items


def split_items(items: Sequence[DatasetItem], fraction: float, seed: int
                ) -> Tuple[List[DatasetItem], List[DatasetItem]]:
    """Balanced stratified split.

    Every label is shuffled with one seeded generator (labels in sorted
    order), truncated to the smallest class size, and the first
    ``floor(fraction * size)`` items go to the training side.
    """
    by_label: Dict[str, List[DatasetItem]] = {}
    for it in sorted(items, key=lambda it: it.id):
        by_label.setdefault(it.label, []).append(it)
    if len(by_label) < 2:
        raise TooFewSamples(f"need at least two labels, found {sorted(by_label)}")
    size = min(len(v) for v in by_label.values())
    if size < 2:
        raise TooFewSamples("every label needs at least two recordings")
    rng = np.random.default_rng(seed)
    n_train = math.floor(fraction * size)
    if n_train < 1 or n_train >= size:
        raise TooFewSamples(f"fraction {fraction} leaves an empty side for {size} per class")
    train, test = [], []
    for label in sorted(by_label):
        group = by_label[label]
        order = rng.permutation(len(group))[:size]
        chosen = [group[i] for i in order]
        train += chosen[:n_train]
        test += chosen[n_train:]
    return train, test


def load_stream(path) -> RawStream:
    _, stream, _ = aedat.read_aedat_file(path)
    return stream


def _pmap(fn, items, jobs: int):
    if jobs <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


# -- encode ----------------------------------------------------------------

@dataclass
class EncodeResult:
    written: int = 0
    skipped: int = 0
    failures: List[Tuple[str, str]] = field(default_factory=list)


def _encode_one(job, fb_config: cochlea.FilterBankConfig, polarity_even_positive: bool):
    src, dst = job
    try:
        audio = cochlea.read_wav(Path(src).read_bytes())
        stream = cochlea.encode(audio, fb_config)
    except CochleaNetError as exc:
        return str(src), f"{type(exc).__name__}: {exc}"
    Path(dst).parent.mkdir(parents=True, exist_ok=True)
    header = aedat.AedatHeader.default(f"source: {Path(src).name}",
                                       f"sample_rate_hz: {audio.sample_rate_hz}")
    aedat.write_aedat_file(dst, header, stream, polarity_even_positive)
    return str(src), None


def encode_dataset(in_dir, out_dir, fb_config: Optional[cochlea.FilterBankConfig] = None,
                   polarity_even_positive: bool = True, jobs: int = 1) -> EncodeResult:
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    if not in_dir.is_dir():
        raise ConfigError(f"input directory not found: {in_dir}")
    fb_config = fb_config or cochlea.FilterBankConfig()
    jobs_list = [(src, out_dir / src.relative_to(in_dir).with_suffix(".aedat"))
                 for src in sorted(in_dir.rglob("*.wav"))]
    out_dir.mkdir(parents=True, exist_ok=True)
    fn = partial(_encode_one, fb_config=fb_config,
                 polarity_even_positive=polarity_even_positive)
    result = EncodeResult()
    for src, err in _pmap(fn, jobs_list, jobs):
        if err is None:
            result.written += 1
        else:
            result.skipped += 1
            result.failures.append((src, err))
            log.warning("skipped %s: %s", src, err)
    return result


# -- train / eval ----------------------------------------------------------

def _histogram_of(path, model: NetworkModel) -> np.ndarray:
    return process_recording(model, load_stream(path)).counts


def compute_histograms(items: Sequence[DatasetItem], model: NetworkModel,
                       jobs: int = 1) -> np.ndarray:
    rows = _pmap(partial(_histogram_of, model=model), [it.path for it in items], jobs)
    return np.array(rows, dtype=np.int64).reshape(len(items), model.ck)


def resolve_split(cfg: ExperimentConfig):
    items = scan_dataset(cfg.dataset_root, cfg.labels)
    return split_items(items, cfg.split_fraction, cfg.seed)


def train(cfg: ExperimentConfig) -> Tuple[bytes, dict]:
    """Train both layers and the three classifiers; return (model bytes, log)."""
    t0 = time.perf_counter()
    train_items, test_items = resolve_split(cfg)
    log.info("split: %d train / %d test recordings", len(train_items), len(test_items))
    streams = [load_stream(it.path) for it in train_items]
    model = train_network(streams, n=cfg.n, lk=cfg.lk, tau_local=cfg.tau_local_s, ck=cfg.ck,
                          tau_cr=cfg.tau_cr_s, kmeans_cfg=cfg.kmeans(),
                          local_cap=cfg.local_max_vectors, cross_cap=cfg.cross_max_vectors)
    log.info("network trained in %.1f s", time.perf_counter() - t0)
    hists = compute_histograms(train_items, model, cfg.jobs)
    labels = [it.label for it in train_items]
    eucl = classifiers.fit_prototypes(hists, labels)
    norm = classifiers.fit_normalized(hists, labels)
    mlp = classifiers.mlp_train(hists, labels, cfg.mlp())
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "config": cfg.to_doc(),
        "split": {"train": [it.id for it in train_items], "test": [it.id for it in test_items]},
        "network": network_to_doc(model),
        "classifiers": {"euclidean": eucl.to_doc(), "normalized": norm.to_doc(),
                        "mlp": mlp.to_doc()},
    }
    train_log = {
        "recordings": len(train_items),
        "events": int(sum(len(s) for s in streams)),
        "mlp_final_loss": mlp.loss_history[-1] if mlp.loss_history else None,
        "runtime_s": time.perf_counter() - t0,
    }
    return dump_document(doc), train_log


@dataclass
class TrainedBundle:
    network: NetworkModel
    euclidean: classifiers.PrototypeModel
    normalized: classifiers.NormalizedPrototypeModel
    mlp: classifiers.MlpModel
    split: Dict[str, List[str]]
    config: dict


def load_bundle(data: bytes) -> TrainedBundle:
    doc = parse_document(data)
    try:
        c = doc["classifiers"]
        return TrainedBundle(network_from_doc(doc["network"]),
                             classifiers.PrototypeModel.from_doc(c["euclidean"]),
                             classifiers.NormalizedPrototypeModel.from_doc(c["normalized"]),
                             classifiers.MlpModel.from_doc(c["mlp"]),
                             doc.get("split", {}), doc.get("config", {}))
    except KeyError as exc:
        raise BadVersion(f"model document lacks {exc}") from exc


# Test accuracies reported for the original hardware-cochlea recordings
# (two-word task). Kept for comparison only: those recordings are not
# available, so they cannot be reproduced bit for bit.
HARDWARE_REFERENCE_TEST_ACCURACY = {"euclidean": 0.7442, "normalized": 0.7380, "mlp": 0.8255}

CLASSIFIER_ROWS = (("euclidean", "Eucl Histogram"), ("normalized", "Norm Eucl Histogram"),
                   ("mlp", "MLP"))


def _event_stats(hists: np.ndarray) -> dict:
    totals = hists.sum(axis=1) if hists.size else np.zeros(0, np.int64)
    if totals.size == 0:
        return {"recordings": 0, "events_total": 0, "events_mean": 0.0,
                "events_min": 0, "events_max": 0, "empty_recordings": 0}
    return {"recordings": int(totals.size), "events_total": int(totals.sum()),
            "events_mean": float(totals.mean()), "events_min": int(totals.min()),
            "events_max": int(totals.max()), "empty_recordings": int((totals == 0).sum())}


@dataclass
class EvalOutput:
    metrics: dict
    table: str
    histograms_csv: str
    accuracy_csv: str
    runtime_s: float


def evaluate_model(model_bytes: bytes, cfg: ExperimentConfig) -> EvalOutput:
    t0 = time.perf_counter()
    bundle = load_bundle(model_bytes)
    items = {it.id: it for it in scan_dataset(cfg.dataset_root, cfg.labels)}
    if bundle.split:
        missing = [i for i in bundle.split["train"] + bundle.split["test"] if i not in items]
        if missing:
            raise ConfigError(f"recording {missing[0]} of the stored split is not in "
                              f"{cfg.dataset_root}")
        parts = {"train": [items[i] for i in bundle.split["train"]],
                 "test": [items[i] for i in bundle.split["test"]]}
    else:
        tr, te = split_items(list(items.values()), cfg.split_fraction, cfg.seed)
        parts = {"train": tr, "test": te}

    hists = {name: compute_histograms(part, bundle.network, cfg.jobs)
             for name, part in parts.items()}
    results: Dict[str, dict] = {}
    for key, _ in CLASSIFIER_ROWS:
        clf = getattr(bundle, key)
        results[key] = {}
        for name, part in parts.items():
            pairs = list(zip(hists[name], [it.label for it in part]))
            results[key][name] = classifiers.evaluate(clf, pairs).to_doc()

    metrics = {
        "format": "cochleanet-metrics",
        "version": 1,
        "seed": cfg.seed,
        "config": bundle.config or cfg.to_doc(),
        "classifiers": results,
        "event_counts": {name: _event_stats(h) for name, h in hists.items()},
    }

    lines = [f"{'Classifiers':<22}| {'Train set accuracy':>18} | {'Test set accuracy':>17}"]
    lines.append("-" * len(lines[0]))
    acc_rows = io.StringIO()
    acc_writer = csv.writer(acc_rows, lineterminator="\n")
    acc_writer.writerow(["classifier", "split", "accuracy", "correct", "total", "skipped"])
    for key, title in CLASSIFIER_ROWS:
        tr, te = results[key]["train"], results[key]["test"]
        lines.append(f"{title:<22}| {100 * tr['accuracy']:>17.2f}% | {100 * te['accuracy']:>16.2f}%")
        for name in ("train", "test"):
            r = results[key][name]
            acc_writer.writerow([key, name, repr(r["accuracy"]), r["correct"], r["total"],
                                 r["skipped"]])

    hist_rows = io.StringIO()
    writer = csv.writer(hist_rows, lineterminator="\n")
    ck = bundle.network.ck
    writer.writerow(["recording_id", "split", "label", "events"] + [f"h{i}" for i in range(ck)])
    for name, part in parts.items():
        for it, h in zip(part, hists[name]):
            writer.writerow([it.id, name, it.label, int(h.sum())] + h.tolist())

    return EvalOutput(metrics, "\n".join(lines) + "\n", hist_rows.getvalue(),
                      acc_rows.getvalue(), time.perf_counter() - t0)


def dump_metrics(metrics: dict) -> bytes:
    return (json.dumps(metrics, indent=2) + "\n").encode("utf-8")


# -- inspect ---------------------------------------------------------------

@dataclass
class InspectReport:
    header: aedat.AedatHeader
    counts: np.ndarray
    duration_us: int
    discarded_negative: int
    stream: RawStream

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def rates(self) -> np.ndarray:
        span = self.duration_us / 1e6
        return self.counts / span if span > 0 else np.zeros(NUM_CHANNELS)

    def text(self, first: int = 10) -> str:
        out = ["header:"] + [f"  {ln}" for ln in self.header.lines]
        out.append(f"events: {self.total} (negative polarity discarded: "
                   f"{self.discarded_negative})")
        out.append(f"duration_us: {self.duration_us}")
        out.append("channel,count,rate_hz")
        rates = self.rates()
        for ch in range(NUM_CHANNELS):
            out.append(f"{ch},{int(self.counts[ch])},{rates[ch]:.1f}")
        out.append(f"first {min(first, len(self.stream))} events (timestamp_us,channel):")
        for ev in list(self.stream)[:first]:
            out.append(f"{ev.timestamp_us},{ev.channel}")
        return "\n".join(out) + "\n"


def inspect_file(path, polarity_even_positive: bool = True) -> InspectReport:
    header, stream, discarded = aedat.read_aedat_file(path, polarity_even_positive)
    counts = np.bincount(stream.channels, minlength=NUM_CHANNELS)[:NUM_CHANNELS]
    return InspectReport(header, counts.astype(np.int64), stream.duration_us, discarded, stream)


def raster_csv(stream: RawStream) -> str:
    buf = io.StringIO()
    buf.write("timestamp_us,channel\n")
    for t, c in zip(stream.timestamps.tolist(), stream.channels.tolist()):
        buf.write(f"{t},{c}\n")
    return buf.getvalue()
