"""Prediction dispatch, confusion matrices and the classifier comparison."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from ..signal_io import COMMANDS, Command
from .base import TrainedModel, as_commands, as_matrix
from .forest import predict_forest, train_random_forest
from .knn import predict_knn, train_knn
from .mlp import predict_mlp, train_mlp
from .svm import SvmParams, predict_svm, train_svm

_PREDICTORS = {"svm": predict_svm, "knn": predict_knn, "rf": predict_forest, "mlp": predict_mlp}

DISPLAY_NAMES = {"svm": "SVM", "knn": "KNN", "rf": "Random Forest", "mlp": "ANN"}
# Reference accuracies reported for the original private recordings.
PUBLISHED_BASELINE = {"svm": 0.70, "knn": 0.55, "mlp": 0.50, "rf": 0.48}
# Row order of the per-command accuracy table.
TABLE_ORDER = (Command.LEFT, Command.RIGHT, Command.STOP, Command.FORWARD, Command.REVERSE)
TABLE_NAMES = {Command.LEFT: "Left", Command.RIGHT: "Right", Command.STOP: "Stop",
               Command.FORWARD: "Forward", Command.REVERSE: "Reverse"}


def predict_batch(model: TrainedModel, X) -> tuple[list[Command], np.ndarray]:
    schema = getattr(X[0], "schema_id", None) if len(X) else None
    X = model.check_features(as_matrix(X), schema)
    win, score = _PREDICTORS[model.kind](model, model.standardizer.apply(X))
    return [model.labels[w] for w in win], np.asarray(score, dtype=float)


def predict(model: TrainedModel, features) -> tuple[Command, float]:
    """Classify one feature vector; returns the command and its score in [0, 1]."""
    schema = getattr(features, "schema_id", None)
    values = getattr(features, "values", features)
    X = model.check_features(values, schema)
    win, score = _PREDICTORS[model.kind](model, model.standardizer.apply(X))
    return model.labels[int(win[0])], float(score[0])


def _pct(x: float) -> str:
    if x != x:  # nan
        return "n/a"
    v = 100.0 * x
    return f"{v:.0f}%" if abs(v - round(v)) < 1e-9 else f"{v:.1f}%"


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts indexed ``[truth, prediction]`` in command order."""

    counts: np.ndarray

    @classmethod
    def from_labels(cls, truth, predicted) -> "ConfusionMatrix":
        counts = np.zeros((len(COMMANDS), len(COMMANDS)), dtype=int)
        for t, p in zip(as_commands(truth), as_commands(predicted)):
            counts[t.index, p.index] += 1
        return cls(counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def overall_accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else float("nan")

    def row_total(self, cmd: Command) -> int:
        return int(self.counts[cmd.index].sum())

    def correct(self, cmd: Command) -> int:
        return int(self.counts[cmd.index, cmd.index])

    def accuracy(self, cmd: Command) -> float:
        n = self.row_total(cmd)
        return self.correct(cmd) / n if n else float("nan")

    def per_command_accuracy(self) -> dict[Command, float]:
        return {c: self.accuracy(c) for c in COMMANDS}

    def render_table(self, title: str = "") -> str:
        """Per-command correct counts and accuracies plus the overall row."""
        rows = [c for c in TABLE_ORDER if self.row_total(c)]
        totals = {self.row_total(c) for c in rows}
        uniform = len(totals) == 1
        middle = (f"Number of correct trials out of {next(iter(totals))}" if uniform
                  else "Number of correct trials")
        lines = [title] if title else []
        w0 = len("Overall Accuracy")
        w1 = len(middle)
        lines.append(f"{'Commands':<{w0}}  {middle:<{w1}}  Accuracy")
        for c in rows:
            cell = str(self.correct(c)) if uniform else f"{self.correct(c)}/{self.row_total(c)}"
            lines.append(f"{TABLE_NAMES[c]:<{w0}}  {cell:<{w1}}  {_pct(self.accuracy(c))}")
        lines.append(f"{'Overall Accuracy':<{w0}}  {'':<{w1}}  {_pct(self.overall_accuracy)}")
        return "\n".join(lines) + "\n"

    def table_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["command", "correct", "total", "accuracy"])
        for c in TABLE_ORDER:
            n = self.row_total(c)
            w.writerow([c.value, self.correct(c), n, repr(self.accuracy(c)) if n else ""])
        w.writerow(["OVERALL", int(np.trace(self.counts)), self.total, repr(self.overall_accuracy)])
        return buf.getvalue()

    def matrix_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["truth\\pred"] + [c.value for c in COMMANDS])
        for c in COMMANDS:
            w.writerow([c.value] + [int(v) for v in self.counts[c.index]])
        return buf.getvalue()


def evaluate(model: TrainedModel, X, y) -> ConfusionMatrix:
    pred, _ = predict_batch(model, X)
    return ConfusionMatrix.from_labels(y, pred)


# ---------------------------------------------------------------------------
# Four-way comparison
# ---------------------------------------------------------------------------

@dataclass
class ComparisonReport:
    accuracies: dict[str, float]
    confusions: dict[str, ConfusionMatrix]
    models: dict[str, TrainedModel] = field(default_factory=dict)

    def render(self) -> str:
        lines = ["Accuracy of different classifiers",
                 f"{'Classifier':<14}  {'Accuracy':>8}  {'Paper baseline':>14}"]
        for kind, acc in self.accuracies.items():
            lines.append(f"{DISPLAY_NAMES[kind]:<14}  {_pct(acc):>8}  {_pct(PUBLISHED_BASELINE[kind]):>14}")
        out = "\n".join(lines) + "\n"
        for kind, cm in self.confusions.items():
            out += "\n" + cm.render_table(f"[{DISPLAY_NAMES[kind]}]")
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["classifier", "accuracy", "paper_baseline"])
        for kind, acc in self.accuracies.items():
            w.writerow([kind, repr(acc), repr(PUBLISHED_BASELINE[kind])])
        return buf.getvalue()


def train_kind(kind: str, X, y, params: Optional[Mapping] = None, seed: int = 0,
               selected_channels: Sequence[str] = (), schema_id: str = "") -> TrainedModel:
    """Train one classifier kind with keyword overrides from ``params``."""
    params = dict(params or {})
    common = {"seed": seed, "selected_channels": selected_channels, "schema_id": schema_id}
    if kind == "svm":
        svm_params = params.pop("svm", None) or SvmParams(**params)
        return train_svm(X, y, svm_params, **common)
    if kind == "knn":
        return train_knn(X, y, **params, **common)
    if kind == "rf":
        return train_random_forest(X, y, **params, **common)
    if kind == "mlp":
        return train_mlp(X, y, **params, **common)
    raise ValueError(f"unknown classifier kind {kind!r}")


def compare_classifiers(X_train, y_train, X_test, y_test,
                        per_kind_params: Optional[Mapping[str, Mapping]] = None, seed: int = 0,
                        kinds: Sequence[str] = ("svm", "knn", "rf", "mlp"),
                        selected_channels: Sequence[str] = (), schema_id: str = "") -> ComparisonReport:
    """Train every kind on the same split and score it on the same test set."""
    per_kind_params = per_kind_params or {}
    accs, cms, models = {}, {}, {}
    for kind in kinds:
        model = train_kind(kind, X_train, y_train, per_kind_params.get(kind), seed,
                           selected_channels, schema_id)
        cm = evaluate(model, X_test, y_test)
        accs[kind], cms[kind], models[kind] = cm.overall_accuracy, cm, model
    return ComparisonReport(accs, cms, models)
