"""k-nearest-neighbour classifier over standardized features."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import ValidationError
from .base import Standardizer, TrainedModel, as_matrix, encode_labels, fit_standardizer, vote_winner


def train_knn(X, y, k: int = 5, standardize: bool = True, seed: int = 0,
              selected_channels: Sequence[str] = (), schema_id: str = "") -> TrainedModel:
    X = as_matrix(X)
    labels, codes = encode_labels(y)
    if not 1 <= k <= len(X):
        raise ValidationError(f"k={k} must lie in 1..{len(X)}")
    std = fit_standardizer(X) if standardize else Standardizer.identity(X.shape[1])
    params = {"k": int(k), "train_x": std.apply(X), "train_y": codes}
    return TrainedModel("knn", std, labels, params, tuple(selected_channels), schema_id,
                        {"seed": seed})


def predict_knn(model: TrainedModel, Xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Majority label among the ``k`` nearest training points (Euclidean).

    Equal distances keep the lower training index; equal votes go to the
    earlier command.  Score is the winning vote share.
    """
    k = int(model.params["k"])
    train_x = np.asarray(model.params["train_x"], dtype=float)
    train_y = np.asarray(model.params["train_y"], dtype=int)
    n_cls = len(model.labels)
    win = np.empty(len(Xs), dtype=int)
    score = np.empty(len(Xs))
    for q, x in enumerate(Xs):
        diff = train_x - x
        d2 = np.einsum("ij,ij->i", diff, diff)
        nearest = np.argsort(d2, kind="stable")[:k]
        votes = np.bincount(train_y[nearest], minlength=n_cls)
        w = int(vote_winner(votes[None, :])[0])
        win[q] = w
        score[q] = votes[w] / k
    return win, score
