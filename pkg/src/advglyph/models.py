"""Hashed character n-gram classifiers and query accounting.

Features are counts of character n-grams (spaces included) hashed into a
fixed-width vector with 64-bit FNV-1a, after a length-preserving per-character
lowercasing. Two model families share this representation: a softmax linear
classifier and a one-hidden-layer tanh MLP. Both are trained with seeded
mini-batch gradient descent so that identical inputs give bitwise-identical
parameters.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ModelFormatError, TrainingError
from .textcore import Dataset, TokenizedText, fnv1a64

MODEL_MAGIC = b"GSMODEL1"

# n-gram hashes are independent of the table width, so one process-wide cache
# serves every FeatureConfig. Bounded to keep long evaluation runs flat.
_HASH_CACHE: dict[str, int] = {}
_HASH_CACHE_CAP = 2_000_000


def _lower_keep_length(text: str) -> str:
    out = []
    for ch in text:
        low = ch.lower()
        out.append(low if len(low) == 1 else ch)
    return "".join(out)


def _ngram_hash(gram: str) -> int:
    h = _HASH_CACHE.get(gram)
    if h is None:
        h = fnv1a64(gram.encode("utf-8"))
        if len(_HASH_CACHE) >= _HASH_CACHE_CAP:
            _HASH_CACHE.clear()
        _HASH_CACHE[gram] = h
    return h


@dataclass(frozen=True)
class FeatureConfig:
    """Hashed n-gram extraction parameters."""

    ngram_min: int = 3
    ngram_max: int = 5
    dim: int = 4096

    def __post_init__(self) -> None:
        if self.ngram_min < 1 or self.ngram_max < self.ngram_min:
            raise ValueError("need 1 <= ngram_min <= ngram_max")
        if self.dim < 2:
            raise ValueError("feature dimension must be >= 2")


@dataclass(frozen=True)
class FeatureVector:
    """Sparse non-negative counts over a fixed-width hashed space."""

    dim: int
    indices: np.ndarray  # int64, strictly increasing
    counts: np.ndarray   # float64, positive

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dim)
        dense[self.indices] = self.counts
        return dense


def featurize(text: str, config: FeatureConfig) -> FeatureVector:
    """Count hashed character n-grams of ``text``.

    The sliding windows run over the full lowercased string, spaces included,
    for every n in [ngram_min, ngram_max]. Text shorter than n contributes no
    n-grams of that length; an empty string maps to the zero vector.
    """
    lowered = _lower_keep_length(text)
    counts: dict[int, float] = {}
    for n in range(config.ngram_min, config.ngram_max + 1):
        for p in range(len(lowered) - n + 1):
            idx = _ngram_hash(lowered[p : p + n]) % config.dim
            counts[idx] = counts.get(idx, 0.0) + 1.0
    if not counts:
        return FeatureVector(config.dim, np.empty(0, dtype=np.int64), np.empty(0))
    indices = np.fromiter(sorted(counts), dtype=np.int64, count=len(counts))
    values = np.array([counts[i] for i in indices])
    return FeatureVector(config.dim, indices, values)


def token_feature_counts(toks: TokenizedText, config: FeatureConfig) -> list[dict[int, float]]:
    """Per-token n-gram counts: each window is credited to every token whose
    span it overlaps, so boundary-crossing n-grams count for both neighbors."""
    lowered = _lower_keep_length(toks.source)
    spans = [(t.start, t.end) for t in toks.tokens]
    per_token: list[dict[int, float]] = [{} for _ in spans]
    for n in range(config.ngram_min, config.ngram_max + 1):
        for p in range(len(lowered) - n + 1):
            q = p + n
            idx = None
            for k, (a, b) in enumerate(spans):
                if a >= q:
                    break
                if b > p:  # spans sorted by start; overlap test
                    if idx is None:
                        idx = _ngram_hash(lowered[p:q]) % config.dim
                    bucket = per_token[k]
                    bucket[idx] = bucket.get(idx, 0.0) + 1.0
    return per_token


# ---------------------------------------------------------------------------
# Query accounting
# ---------------------------------------------------------------------------


class QueryLedger:
    """Counts classifier calls, split by who asked: the attack loop itself or
    an interpreter working on its behalf."""

    __slots__ = ("attack", "interpreter")

    def __init__(self) -> None:
        self.attack = 0
        self.interpreter = 0

    def record(self, channel: str) -> None:
        if channel == "attack":
            self.attack += 1
        elif channel == "interpreter":
            self.interpreter += 1
        else:
            raise ValueError(f"unknown query channel {channel!r}")

    @property
    def total(self) -> int:
        return self.attack + self.interpreter


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


@dataclass
class ModelParams:
    """A trained classifier: its kind, feature space and weight arrays.

    kind "linear" stores w (M, D) and b (M,); kind "mlp" stores w1 (H, D),
    b1 (H,), w2 (M, H), b2 (M,).
    """

    kind: str
    features: FeatureConfig
    label_count: int
    arrays: dict[str, np.ndarray]

    ARRAY_NAMES = {"linear": ("w", "b"), "mlp": ("w1", "b1", "w2", "b2")}

    def __post_init__(self) -> None:
        if self.kind not in self.ARRAY_NAMES:
            raise ValueError(f"unknown model kind {self.kind!r}")
        expected = self.ARRAY_NAMES[self.kind]
        if tuple(self.arrays) != expected:
            raise ValueError(f"{self.kind} model needs arrays {expected}, got {tuple(self.arrays)}")

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.kind, self.features, self.label_count,
            {k: v.copy() for k, v in self.arrays.items()},
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    learning_rate: float = 0.5
    l2: float = 1e-4
    batch_size: int = 32
    seed: int = 0
    hidden: int = 16  # mlp only

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1 or self.hidden < 1:
            raise ValueError("epochs, batch_size and hidden must be positive")
        if self.learning_rate <= 0 or self.l2 < 0:
            raise ValueError("learning_rate must be > 0 and l2 >= 0")


@dataclass(frozen=True)
class PredictionResult:
    label: int
    probabilities: np.ndarray


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def logits_from_counts(model: ModelParams, counts: np.ndarray) -> np.ndarray:
    """Forward pass on a dense feature-count vector (the differentiable
    surface that gradient checks probe)."""
    a = model.arrays
    if model.kind == "linear":
        return a["w"] @ counts + a["b"]
    hidden = np.tanh(a["w1"] @ counts + a["b1"])
    return a["w2"] @ hidden + a["b2"]


def _logits_sparse(model: ModelParams, fv: FeatureVector) -> np.ndarray:
    a = model.arrays
    if model.kind == "linear":
        if fv.indices.size == 0:
            return a["b"].copy()
        return a["w"][:, fv.indices] @ fv.counts + a["b"]
    if fv.indices.size == 0:
        pre = a["b1"].copy()
    else:
        pre = a["w1"][:, fv.indices] @ fv.counts + a["b1"]
    return a["w2"] @ np.tanh(pre) + a["b2"]


def predict(
    model: ModelParams,
    text: str,
    ledger: QueryLedger | None = None,
    channel: str = "attack",
) -> PredictionResult:
    """Classify ``text``; one call increments exactly one ledger channel.

    Ties in the probability vector resolve to the lowest label index, so a
    zero-weight binary model answers label 0 with probabilities [0.5, 0.5].
    """
    if ledger is not None:
        ledger.record(channel)
    fv = featurize(text, model.features)
    probs = _softmax(_logits_sparse(model, fv))
    return PredictionResult(int(np.argmax(probs)), probs)


def gradient_wrt_features(model: ModelParams, text: str, class_index: int) -> np.ndarray:
    """d logit[class_index] / d feature-count vector, dense (D,).

    White-box surface: no ledger is touched. For the linear model this is the
    class weight row; for the MLP it is w1^T (w2[c] * sech^2(z)).
    """
    if not 0 <= class_index < model.label_count:
        raise IndexError(f"class index {class_index} out of range")
    a = model.arrays
    if model.kind == "linear":
        return a["w"][class_index].copy()
    fv = featurize(text, model.features)
    pre = a["b1"].copy()
    if fv.indices.size:
        pre += a["w1"][:, fv.indices] @ fv.counts
    sech2 = 1.0 - np.tanh(pre) ** 2
    return (a["w2"][class_index] * sech2) @ a["w1"]


def accuracy(model: ModelParams, dataset: Dataset) -> float:
    """Fraction of records whose predicted label matches the gold label."""
    hits = 0
    for text, label in dataset.records:
        if predict(model, text).label == label:
            hits += 1
    return hits / len(dataset.records)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def _design_matrix(dataset: Dataset, features: FeatureConfig) -> np.ndarray:
    x = np.zeros((len(dataset), features.dim))
    for i, (text, _) in enumerate(dataset.records):
        fv = featurize(text, features)
        x[i, fv.indices] = fv.counts
    return x


def train(
    dataset: Dataset,
    kind: str,
    config: TrainConfig,
    features: FeatureConfig | None = None,
) -> ModelParams:
    """Fit a classifier with seeded mini-batch gradient descent.

    Softmax cross-entropy with L2 on the weight matrices (never the biases).
    The per-epoch shuffle and the MLP init come from one seeded generator, so
    the result is a pure function of (dataset, kind, config, features).
    """
    if kind not in ModelParams.ARRAY_NAMES:
        raise ValueError(f"unknown model kind {kind!r}")
    features = features or FeatureConfig()
    labels = np.array(dataset.labels(), dtype=np.int64)
    if np.unique(labels).size < 2:
        raise TrainingError("training data covers fewer than 2 classes")
    m = dataset.label_count
    x = _design_matrix(dataset, features)
    n = x.shape[0]
    onehot = np.zeros((n, m))
    onehot[np.arange(n), labels] = 1.0

    rng = np.random.default_rng(config.seed)
    if kind == "linear":
        arrays = {"w": np.zeros((m, features.dim)), "b": np.zeros(m)}
    else:
        h = config.hidden
        scale = 1.0 / np.sqrt(features.dim)
        arrays = {
            "w1": rng.normal(0.0, scale, size=(h, features.dim)),
            "b1": np.zeros(h),
            "w2": rng.normal(0.0, 1.0 / np.sqrt(h), size=(m, h)),
            "b2": np.zeros(m),
        }

    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            xb, yb = x[batch], onehot[batch]
            k = len(batch)
            if kind == "linear":
                probs = _softmax(xb @ arrays["w"].T + arrays["b"])
                delta = (probs - yb) / k
                arrays["w"] -= config.learning_rate * (delta.T @ xb + config.l2 * arrays["w"])
                arrays["b"] -= config.learning_rate * delta.sum(axis=0)
            else:
                pre = xb @ arrays["w1"].T + arrays["b1"]
                hid = np.tanh(pre)
                probs = _softmax(hid @ arrays["w2"].T + arrays["b2"])
                delta = (probs - yb) / k
                dhid = (delta @ arrays["w2"]) * (1.0 - hid**2)
                arrays["w2"] -= config.learning_rate * (delta.T @ hid + config.l2 * arrays["w2"])
                arrays["b2"] -= config.learning_rate * delta.sum(axis=0)
                arrays["w1"] -= config.learning_rate * (dhid.T @ xb + config.l2 * arrays["w1"])
                arrays["b1"] -= config.learning_rate * dhid.sum(axis=0)
        if not all(np.isfinite(v).all() for v in arrays.values()):
            raise TrainingError("training diverged to non-finite parameters")

    return ModelParams(kind, features, m, arrays)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_model(model: ModelParams, path: str | Path) -> None:
    """Write the binary model artifact.

    Layout: 8-byte magic, 8-byte little-endian header length, UTF-8 JSON
    header (kind, feature config, label count, array manifest), then each
    array as row-major float64 little-endian in manifest order.
    """
    header = {
        "kind": model.kind,
        "ngram_min": model.features.ngram_min,
        "ngram_max": model.features.ngram_max,
        "dim": model.features.dim,
        "label_count": model.label_count,
        "arrays": [
            {"name": name, "shape": list(arr.shape)} for name, arr in model.arrays.items()
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for arr in model.arrays.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path: str | Path) -> ModelParams:
    """Read a model artifact back; rejects wrong magic, truncation and shape
    mismatches with ModelFormatError."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16 or data[:8] != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: not a model artifact (bad magic)")
    (hlen,) = struct.unpack("<Q", data[8:16])
    if 16 + hlen > len(data):
        raise ModelFormatError(f"{path}: truncated header")
    try:
        header = json.loads(data[16 : 16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: unreadable header: {exc}") from None
    try:
        features = FeatureConfig(header["ngram_min"], header["ngram_max"], header["dim"])
        kind = header["kind"]
        label_count = header["label_count"]
        manifest = header["arrays"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: invalid header: {exc}") from None
    expected = ModelParams.ARRAY_NAMES.get(kind)
    if expected is None or tuple(e["name"] for e in manifest) != expected:
        raise ModelFormatError(f"{path}: array manifest does not match kind {kind!r}")
    arrays: dict[str, np.ndarray] = {}
    offset = 16 + hlen
    for entry in manifest:
        shape = tuple(int(s) for s in entry["shape"])
        size = int(np.prod(shape)) * 8
        if offset + size > len(data):
            raise ModelFormatError(f"{path}: truncated array {entry['name']!r}")
        arrays[entry["name"]] = (
            np.frombuffer(data[offset : offset + size], dtype="<f8").reshape(shape).copy()
        )
        offset += size
    if offset != len(data):
        raise ModelFormatError(f"{path}: {len(data) - offset} trailing bytes")
    model = ModelParams(kind, features, label_count, arrays)
    _check_shapes(model, path)
    return model


def _check_shapes(model: ModelParams, path) -> None:
    a, d, m = model.arrays, model.features.dim, model.label_count
    if model.kind == "linear":
        ok = a["w"].shape == (m, d) and a["b"].shape == (m,)
    else:
        h = a["w1"].shape[0]
        ok = (
            a["w1"].shape == (h, d)
            and a["b1"].shape == (h,)
            and a["w2"].shape == (m, h)
            and a["b2"].shape == (m,)
        )
    if not ok:
        raise ModelFormatError(f"{path}: array shapes inconsistent with header")
