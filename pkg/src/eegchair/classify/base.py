"""Shared classifier plumbing: label coding, splitting, standardization and
the serializable :class:`TrainedModel` container."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import ModelFileError, SchemaError, ValidationError
from ..signal_io import COMMANDS, Command

MODEL_FORMAT = "eegchair-model"
MODEL_VERSION = 1
KINDS = ("svm", "knn", "rf", "mlp")


def as_commands(y) -> list[Command]:
    out = []
    for v in y:
        if isinstance(v, Command):
            out.append(v)
        elif isinstance(v, (int, np.integer)):
            out.append(Command.from_index(int(v)))
        else:
            out.append(Command.from_token(str(v)))
    return out


def encode_labels(y) -> tuple[tuple[Command, ...], np.ndarray]:
    """Return the present classes in command order and per-sample class positions."""
    cmds = as_commands(y)
    labels = tuple(c for c in COMMANDS if c in set(cmds))
    pos = {c: i for i, c in enumerate(labels)}
    return labels, np.array([pos[c] for c in cmds], dtype=int)


def as_matrix(X) -> np.ndarray:
    if len(X) and hasattr(X[0], "values"):
        X = [fv.values for fv in X]
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValidationError(f"feature matrix must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("feature matrix holds non-finite values")
    return X


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------

def split_stratified(labels, train_fraction: float = 0.8, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffled split into train/test index arrays.

    Each class contributes ``floor(n * train_fraction + 0.5)`` training
    samples, clamped so that both sides keep at least one sample.  Both
    returned arrays are sorted.
    """
    if not 0 < train_fraction < 1:
        raise ValidationError("train_fraction must lie strictly between 0 and 1")
    cmds = as_commands(labels)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in COMMANDS:
        idx = np.array([i for i, v in enumerate(cmds) if v == c], dtype=int)
        if idx.size == 0:
            continue
        if idx.size < 2:
            raise ValidationError(f"class {c.value} has fewer than 2 samples")
        n_train = min(max(math.floor(idx.size * train_fraction + 0.5), 1), idx.size - 1)
        perm = rng.permutation(idx)
        train.append(perm[:n_train])
        test.append(perm[n_train:])
    if not train:
        raise ValidationError("nothing to split")
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_folds(labels, n_folds: int, seed: int = 0) -> list[np.ndarray]:
    """Assign each sample to one of ``n_folds`` folds, class by class."""
    cmds = as_commands(labels)
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    offset = 0
    for c in COMMANDS:
        idx = rng.permutation([i for i, v in enumerate(cmds) if v == c])
        for j, i in enumerate(idx):
            folds[(j + offset) % n_folds].append(int(i))
        offset += len(idx)
    return [np.sort(np.array(f, dtype=int)) for f in folds]


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    def apply(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.means) / self.stds

    @classmethod
    def identity(cls, n_features: int) -> "Standardizer":
        return cls(np.zeros(n_features), np.ones(n_features))


def fit_standardizer(X) -> Standardizer:
    """Per-feature mean/std from training data; constant features get std 1."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("cannot fit a standardizer on an empty training set")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    flat = stds <= 1e-12 * np.maximum(1.0, np.abs(means))
    stds = np.where(flat, 1.0, stds)
    if flat.any():
        # exact zero output for constant columns instead of rounding residue
        means = np.where(flat, X[0], means)
    return Standardizer(means, stds)


def apply_standardizer(standardizer: Standardizer, X) -> np.ndarray:
    return standardizer.apply(X)


# ---------------------------------------------------------------------------
# Model container
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainedModel:
    """A fitted classifier plus everything needed to reproduce its inputs.

    ``params`` holds the kind-specific hyperparameters and learned arrays.
    ``train_meta`` records the seed, dataset fingerprint and split so that
    evaluation can recover the held-out trials.
    """

    kind: str
    standardizer: Standardizer
    labels: tuple[Command, ...]
    params: dict
    selected_channels: tuple[str, ...] = ()
    schema_id: str = ""
    train_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown classifier kind {self.kind!r}")

    @property
    def n_features(self) -> int:
        return len(self.standardizer.means)

    def with_meta(self, **meta) -> "TrainedModel":
        merged = dict(self.train_meta)
        merged.update(meta)
        return TrainedModel(self.kind, self.standardizer, self.labels, self.params,
                            self.selected_channels, self.schema_id, merged)

    def check_features(self, X, schema: str | None = None) -> np.ndarray:
        if schema is not None and self.schema_id and schema != self.schema_id:
            raise SchemaError(f"feature schema {schema!r} does not match model {self.schema_id!r}")
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise SchemaError(f"model expects {self.n_features} features, got {X.shape[1]}")
        return X


def _encode(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.tolist(), "dtype": str(obj.dtype)}
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, Command):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    return obj


def _decode(obj: Any) -> Any:
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            return np.array(obj["__ndarray__"], dtype=obj["dtype"])
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def model_to_dict(model: TrainedModel) -> dict:
    payload = _encode({
        "kind": model.kind,
        "labels": [c.value for c in model.labels],
        "standardizer": {"means": model.standardizer.means, "stds": model.standardizer.stds},
        "selected_channels": list(model.selected_channels),
        "schema_id": model.schema_id,
        "params": model.params,
        "train_meta": model.train_meta,
    })
    checksum = hashlib.sha256(_canonical(payload).encode()).hexdigest()
    return {"format": MODEL_FORMAT, "version": MODEL_VERSION, "checksum": checksum,
            "payload": payload}


def model_from_dict(doc: dict) -> TrainedModel:
    if doc.get("format") != MODEL_FORMAT:
        raise ModelFileError("not an eegchair model file")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFileError(f"unsupported model version {doc.get('version')!r}")
    payload = doc.get("payload")
    if not isinstance(payload, dict):
        raise ModelFileError("model file has no payload")
    if hashlib.sha256(_canonical(payload).encode()).hexdigest() != doc.get("checksum"):
        raise ModelFileError("model checksum mismatch")
    p = _decode(payload)
    std = Standardizer(np.asarray(p["standardizer"]["means"], dtype=float),
                       np.asarray(p["standardizer"]["stds"], dtype=float))
    return TrainedModel(p["kind"], std, tuple(Command(v) for v in p["labels"]), p["params"],
                        tuple(p["selected_channels"]), p["schema_id"], p["train_meta"])


def save_model(model: TrainedModel, path) -> None:
    text = json.dumps(model_to_dict(model), sort_keys=True, indent=1, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_model(path) -> TrainedModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: not valid JSON ({exc.msg})") from None
    return model_from_dict(doc)


def vote_winner(votes: np.ndarray, tiebreak: np.ndarray | None = None) -> np.ndarray:
    """Row-wise argmax over class votes.

    Equal votes fall back to ``tiebreak`` (higher wins) and then to the
    lowest class position, i.e. command order.
    """
    votes = np.asarray(votes, dtype=float)
    best = votes.max(axis=1, keepdims=True)
    tied = votes == best
    if tiebreak is None:
        return np.argmax(tied, axis=1)
    tb = np.where(tied, tiebreak, -np.inf)
    tb_best = tb.max(axis=1, keepdims=True)
    return np.argmax(tied & (tb == tb_best), axis=1)
