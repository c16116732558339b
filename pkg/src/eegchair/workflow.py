"""Session-level orchestration: clean -> split -> select -> features -> train.

These helpers are what the CLI runs; they are also the reference "offline"
path that the streaming runtime must agree with.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .classify import (ComparisonReport, ConfusionMatrix, TrainedModel, compare_classifiers,
                       evaluate, split_stratified, train_kind)
from .classify.evaluation import DISPLAY_NAMES
from .errors import ValidationError
from .preprocess import ArtifactVerdict, PreprocessConfig, clean_epoch
from .signal_io import Command, EegEpoch, SessionDataset
from .spectral import ChannelRanking, select_channels
from .wavelet import extract_features, schema_id


def dataset_fingerprint(session: SessionDataset) -> str:
    """SHA-256 over channel roster, trial ids, labels and raw sample bytes."""
    h = hashlib.sha256()
    h.update(",".join(session.channels).encode())
    for ep in session.trials:
        h.update(f"|{ep.trial_id}:{ep.label.value if ep.label else ''}:{ep.sample_rate}|".encode())
        h.update(np.ascontiguousarray(ep.samples, dtype="<f8").tobytes())
    return h.hexdigest()


@dataclass
class PreparedSession:
    session: SessionDataset          # cleaned, accepted trials only
    rejected: list[tuple[int, ArtifactVerdict]] = field(default_factory=list)

    @property
    def labels(self) -> list[Command]:
        return [ep.label for ep in self.session.trials]

    @property
    def trial_ids(self) -> list[int]:
        return [ep.trial_id for ep in self.session.trials]


def prepare_session(session: SessionDataset,
                    config: PreprocessConfig = PreprocessConfig()) -> PreparedSession:
    """Clean every trial and drop the artifact-rejected ones."""
    kept, rejected = [], []
    for ep in session.trials:
        cleaned, verdict = clean_epoch(ep, config, session.channels)
        if verdict.accepted:
            kept.append(cleaned)
        else:
            rejected.append((ep.trial_id, verdict))
    return PreparedSession(session.with_trials(kept), rejected)


def feature_matrix(epochs: Sequence[EegEpoch], selected: Sequence[str],
                   channels: Sequence[str], mode: str = "subbands") -> np.ndarray:
    return np.array([extract_features(ep, selected, channels, mode).values for ep in epochs])


@dataclass
class SplitFeatures:
    """Everything derived from one session under one seed, ready for training."""

    ranking: ChannelRanking
    schema: str
    X_train: np.ndarray
    y_train: list[Command]
    X_test: np.ndarray
    y_test: list[Command]
    train_ids: list[int]
    test_ids: list[int]
    rejected_ids: list[int]


def split_and_featurize(prepared: PreparedSession, seed: int = 0, k: int = 5,
                        train_fraction: float = 0.8, feature_mode: str = "subbands",
                        test_ids: Optional[Sequence[int]] = None) -> SplitFeatures:
    """Stratified trial split, channel selection on the training side, features.

    ``test_ids`` overrides the split with a recorded one.
    """
    sess = prepared.session
    if not sess.trials:
        raise ValidationError("no trials left after artifact rejection")
    if any(lbl is None for lbl in prepared.labels):
        raise ValidationError("training requires every trial to be labelled")
    ids = prepared.trial_ids
    if test_ids is None:
        tr, te = split_stratified(prepared.labels, train_fraction, seed)
    else:
        wanted = set(int(t) for t in test_ids)
        te = np.array([i for i, t in enumerate(ids) if t in wanted], dtype=int)
        tr = np.array([i for i, t in enumerate(ids) if t not in wanted], dtype=int)
    ranking = select_channels(sess.subset(tr), k)
    sel = ranking.selected
    X = feature_matrix(sess.trials, sel, sess.channels, feature_mode)
    labels = prepared.labels
    return SplitFeatures(
        ranking=ranking,
        schema=schema_id(sel, feature_mode),
        X_train=X[tr], y_train=[labels[i] for i in tr],
        X_test=X[te], y_test=[labels[i] for i in te],
        train_ids=[ids[i] for i in tr], test_ids=[ids[i] for i in te],
        rejected_ids=[t for t, _ in prepared.rejected],
    )


@dataclass
class TrainResult:
    model: TrainedModel
    confusion: ConfusionMatrix
    n_rejected: int


def train_from_session(session: SessionDataset, kind: str = "svm", seed: int = 0, k: int = 5,
                       train_fraction: float = 0.8,
                       preprocess: PreprocessConfig = PreprocessConfig(),
                       feature_mode: str = "subbands",
                       params: Optional[Mapping] = None) -> TrainResult:
    prepared = prepare_session(session, preprocess)
    sf = split_and_featurize(prepared, seed, k, train_fraction, feature_mode)
    model = train_kind(kind, sf.X_train, sf.y_train, params, seed, sf.ranking.selected, sf.schema)
    model = model.with_meta(
        seed=seed,
        dataset_fingerprint=dataset_fingerprint(session),
        train_fraction=train_fraction,
        train_trial_ids=sf.train_ids,
        test_trial_ids=sf.test_ids,
        rejected_trial_ids=sf.rejected_ids,
        preprocess=asdict(preprocess),
        feature_mode=feature_mode,
        channel_ranking=[[c, p] for c, p in sf.ranking.ranked],
    )
    cm = evaluate(model, sf.X_test, sf.y_test)
    return TrainResult(model, cm, len(sf.rejected_ids))


def preprocess_config_of(model: TrainedModel) -> PreprocessConfig:
    raw = model.train_meta.get("preprocess")
    if not raw:
        return PreprocessConfig()
    return PreprocessConfig(dc_removal=bool(raw["dc_removal"]),
                            notch_hz=tuple(float(f) for f in raw["notch_hz"]),
                            q_factor=float(raw["q_factor"]),
                            artifact_limit_uv=float(raw["artifact_limit_uv"]))


@dataclass
class EvalResult:
    confusion: ConfusionMatrix
    n_rejected: int
    held_out: bool  # True when the model's recorded test split was used


def evaluate_on_session(model: TrainedModel, session: SessionDataset) -> EvalResult:
    """Score ``model`` on ``session``.

    If the session is the one the model was trained on (fingerprint match),
    only the recorded held-out trials are used; otherwise every accepted
    trial is scored.
    """
    prepared = prepare_session(session, preprocess_config_of(model))
    meta = model.train_meta
    same = meta.get("dataset_fingerprint") == dataset_fingerprint(session)
    trials = prepared.session.trials
    if same:
        wanted = set(int(t) for t in meta.get("test_trial_ids", []))
        trials = tuple(ep for ep in trials if ep.trial_id in wanted)
    if not trials:
        raise ValidationError("no trials to evaluate")
    mode = meta.get("feature_mode", "subbands")
    X = feature_matrix(trials, model.selected_channels, session.channels, mode)
    cm = evaluate(model, X, [ep.label for ep in trials])
    n_rej = len(meta.get("rejected_trial_ids", [])) if same else len(prepared.rejected)
    return EvalResult(cm, n_rej, same)


def render_model_report(model: TrainedModel, cm: ConfusionMatrix, n_rejected: int) -> str:
    lines = [
        f"classifier: {DISPLAY_NAMES[model.kind]}",
        f"seed: {model.train_meta.get('seed')}",
        f"selected channels: {', '.join(model.selected_channels)}",
        f"artifact-rejected trials: {n_rejected}",
        f"test trials: {cm.total}",
        "",
    ]
    return "\n".join(lines) + cm.render_table("Accuracy Table of all commands")


def compare_on_session(session: SessionDataset, seed: int = 0, k: int = 5,
                       train_fraction: float = 0.8,
                       preprocess: PreprocessConfig = PreprocessConfig(),
                       feature_mode: str = "subbands",
                       per_kind_params: Optional[Mapping[str, Mapping]] = None) -> ComparisonReport:
    prepared = prepare_session(session, preprocess)
    sf = split_and_featurize(prepared, seed, k, train_fraction, feature_mode)
    return compare_classifiers(sf.X_train, sf.y_train, sf.X_test, sf.y_test, per_kind_params,
                               seed, selected_channels=sf.ranking.selected, schema_id=sf.schema)
