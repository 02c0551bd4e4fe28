"""Histogram classifiers: class prototypes, normalized prototypes and an MLP.

Labels are kept sorted, and every argmin/argmax resolves ties toward the
lexicographically smallest label.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .errors import DegenerateInput, DimensionMismatch, EmptyClass, EmptyHistogram


def _as_matrix(histograms) -> np.ndarray:
    x = np.asarray([np.asarray(getattr(h, "counts", h), dtype=np.float64)
                    for h in histograms])
    if x.ndim != 2:
        raise DimensionMismatch("histograms must share one length")
    return x


def _as_vector(h, dim: int) -> np.ndarray:
    v = np.asarray(getattr(h, "counts", h), dtype=np.float64)
    if v.shape != (dim,):
        raise DimensionMismatch(f"histogram length {v.shape} != ({dim},)")
    return v


def normalize_histogram(h) -> np.ndarray:
    v = np.asarray(getattr(h, "counts", h), dtype=np.float64)
    card = v.sum()
    if card <= 0:
        raise EmptyHistogram("histogram holds no events")
    return v / card


def _class_means(x: np.ndarray, labels: Sequence[str], classes: List[str]) -> np.ndarray:
    y = np.asarray(labels)
    out = []
    for c in classes:
        rows = x[y == c]
        if rows.shape[0] == 0:
            raise EmptyClass(f"class {c!r} has no usable histogram")
        out.append(rows.mean(axis=0))
    return np.array(out)


def _nearest_label(v: np.ndarray, prototypes: np.ndarray, labels: List[str]) -> str:
    d = np.sqrt(((prototypes - v) ** 2).sum(axis=1))
    return labels[int(np.argmin(d))]


@dataclass
class PrototypeModel:
    labels: List[str]
    prototypes: np.ndarray

    def __call__(self, h) -> str:
        return classify_euclidean(self, h)

    def to_doc(self) -> dict:
        return {"labels": list(self.labels), "prototypes": self.prototypes.tolist()}

    @classmethod
    def from_doc(cls, doc: dict) -> "PrototypeModel":
        return cls(list(doc["labels"]), np.array(doc["prototypes"], dtype=np.float64))


@dataclass
class NormalizedPrototypeModel(PrototypeModel):
    def __call__(self, h) -> str:
        return classify_normalized(self, h)


def fit_prototypes(histograms, labels: Sequence[str]) -> PrototypeModel:
    x = _as_matrix(histograms)
    classes = sorted(set(labels))
    return PrototypeModel(classes, _class_means(x, labels, classes))


def classify_euclidean(model: PrototypeModel, h) -> str:
    return _nearest_label(_as_vector(h, model.prototypes.shape[1]),
                          model.prototypes, model.labels)


def fit_normalized(histograms, labels: Sequence[str]) -> NormalizedPrototypeModel:
    """Class means of per-recording normalized histograms; empty recordings are left out."""
    x = _as_matrix(histograms)
    card = x.sum(axis=1)
    keep = card > 0
    y = [lab for lab, k in zip(labels, keep) if k]
    classes = sorted(set(labels))
    return NormalizedPrototypeModel(classes, _class_means(x[keep] / card[keep, None], y, classes))


def classify_normalized(model: NormalizedPrototypeModel, h) -> str:
    v = _as_vector(h, model.prototypes.shape[1])
    return _nearest_label(normalize_histogram(v), model.prototypes, model.labels)


# -- MLP -------------------------------------------------------------------

@dataclass
class MlpConfig:
    hidden: int = 30
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 300
    seed: int = 0
    normalize: bool = True


@dataclass
class MlpModel:
    labels: List[str]
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    seed: int = 0
    normalize: bool = True
    loss_history: List[float] = field(default_factory=list, compare=False)

    @property
    def params(self) -> List[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]

    def __call__(self, h) -> str:
        return mlp_predict(self, h)

    def to_doc(self) -> dict:
        return {"labels": list(self.labels), "seed": self.seed, "normalize": self.normalize,
                "w1": self.w1.tolist(), "b1": self.b1.tolist(),
                "w2": self.w2.tolist(), "b2": self.b2.tolist()}

    @classmethod
    def from_doc(cls, doc: dict) -> "MlpModel":
        arr = lambda k: np.array(doc[k], dtype=np.float64)  # noqa: E731
        return cls(list(doc["labels"]), arr("w1"), arr("b1"), arr("w2"), arr("b2"),
                   int(doc["seed"]), bool(doc["normalize"]))


def mlp_scores(params, x: np.ndarray) -> np.ndarray:
    w1, b1, w2, b2 = params
    return np.maximum(x @ w1 + b1, 0.0) @ w2 + b2


def loss_and_grads(params, x: np.ndarray, y: np.ndarray):
    """Mean softmax cross-entropy and its gradients w.r.t. (w1, b1, w2, b2)."""
    w1, b1, w2, b2 = params
    z1 = x @ w1 + b1
    a1 = np.maximum(z1, 0.0)
    s = a1 @ w2 + b2
    s = s - s.max(axis=1, keepdims=True)
    logp = s - np.log(np.exp(s).sum(axis=1, keepdims=True))
    m = x.shape[0]
    loss = -logp[np.arange(m), y].mean()

    ds = np.exp(logp)
    ds[np.arange(m), y] -= 1.0
    ds /= m
    gw2 = a1.T @ ds
    gb2 = ds.sum(axis=0)
    dz1 = (ds @ w2.T) * (z1 > 0)
    gw1 = x.T @ dz1
    gb1 = dz1.sum(axis=0)
    return loss, [gw1, gb1, gw2, gb2]


def _glorot(rng, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _prepare_inputs(histograms, normalize: bool):
    x = _as_matrix(histograms)
    if not normalize:
        return x, np.ones(x.shape[0], dtype=bool)
    card = x.sum(axis=1)
    keep = card > 0
    out = np.zeros_like(x)
    out[keep] = x[keep] / card[keep, None]
    return out, keep


def mlp_train(histograms, labels: Sequence[str], cfg: Optional[MlpConfig] = None) -> MlpModel:
    """Train a one-hidden-layer ReLU network with momentum SGD."""
    cfg = cfg or MlpConfig()
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise DegenerateInput("need at least two classes")
    x, keep = _prepare_inputs(histograms, cfg.normalize)
    x = x[keep]
    index = {c: i for i, c in enumerate(classes)}
    y = np.array([index[lab] for lab, k in zip(labels, keep) if k], dtype=np.int64)
    if len(set(y.tolist())) < 2:
        raise DegenerateInput("fewer than two classes left after dropping empty histograms")

    rng = np.random.default_rng(cfg.seed)
    dim, n_cls = x.shape[1], len(classes)
    params = [_glorot(rng, dim, cfg.hidden), np.zeros(cfg.hidden),
              _glorot(rng, cfg.hidden, n_cls), np.zeros(n_cls)]
    velocity = [np.zeros_like(p) for p in params]
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(x.shape[0])
        for start in range(0, x.shape[0], cfg.batch_size):
            sel = order[start:start + cfg.batch_size]
            _, grads = loss_and_grads(params, x[sel], y[sel])
            for p, v, g in zip(params, velocity, grads):
                v *= cfg.momentum
                v -= cfg.learning_rate * g
                p += v
        history.append(float(loss_and_grads(params, x, y)[0]))
    return MlpModel(classes, *params, seed=cfg.seed, normalize=cfg.normalize,
                    loss_history=history)


def mlp_predict(model: MlpModel, h) -> str:
    v = _as_vector(h, model.w1.shape[0])
    if model.normalize:
        v = normalize_histogram(v)
    scores = mlp_scores(model.params, v[None, :])[0]
    return model.labels[int(np.argmax(scores))]


# -- evaluation ------------------------------------------------------------

@dataclass
class EvaluationResult:
    accuracy: float
    confusion_matrix: np.ndarray  # rows: true label, columns: predicted label
    labels: List[str]
    skipped_count: int
    correct: int
    total: int

    def to_doc(self) -> dict:
        return {"accuracy": self.accuracy, "correct": self.correct, "total": self.total,
                "skipped": self.skipped_count, "labels": list(self.labels),
                "confusion_matrix": self.confusion_matrix.tolist()}


def evaluate(classifier: Callable, labeled_histograms) -> EvaluationResult:
    """Score ``classifier`` over (histogram, true_label) pairs.

    Items the classifier rejects as empty histograms are skipped and counted.
    """
    items = list(labeled_histograms)
    labels = sorted(set(lab for _, lab in items) | set(getattr(classifier, "labels", [])))
    index = {lab: i for i, lab in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)
    skipped = 0
    for h, truth in items:
        try:
            pred = classifier(h)
        except EmptyHistogram:
            skipped += 1
            continue
        if pred not in index:
            index[pred] = len(labels)
            labels.append(pred)
            confusion = np.pad(confusion, ((0, 1), (0, 1)))
        confusion[index[truth], index[pred]] += 1
    total = int(confusion.sum())
    correct = int(np.trace(confusion))
    accuracy = correct / total if total else 0.0
    return EvaluationResult(accuracy, confusion, labels, skipped, correct, total)
