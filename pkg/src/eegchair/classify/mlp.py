"""Fully connected ReLU network with a softmax output, trained by mini-batch
gradient descent on cross-entropy."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import TrainingError, ValidationError
from .base import Standardizer, TrainedModel, as_matrix, encode_labels, fit_standardizer


def init_layers(sizes: Sequence[int], rng: np.random.Generator) -> list[dict]:
    """He-initialised weights, zero biases; ``sizes`` runs input..output."""
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
        layers.append({"W": W, "b": np.zeros(fan_out)})
    return layers


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(layers: list[dict], X: np.ndarray) -> np.ndarray:
    """Class probabilities for each row of ``X``."""
    h = X
    for layer in layers[:-1]:
        h = np.maximum(h @ layer["W"] + layer["b"], 0.0)
    return softmax(h @ layers[-1]["W"] + layers[-1]["b"])


def loss_and_grads(layers: list[dict], X: np.ndarray, Y: np.ndarray) -> tuple[float, list[dict]]:
    """Mean cross-entropy against one-hot ``Y`` and its exact gradient."""
    acts = [X]
    pre = []
    h = X
    for layer in layers[:-1]:
        z = h @ layer["W"] + layer["b"]
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    logits = h @ layers[-1]["W"] + layers[-1]["b"]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_p = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    n = len(X)
    loss = float(-np.sum(Y * log_p) / n)

    delta = (np.exp(log_p) - Y) / n
    grads: list[dict] = [None] * len(layers)  # type: ignore[list-item]
    for li in range(len(layers) - 1, -1, -1):
        grads[li] = {"W": acts[li].T @ delta, "b": delta.sum(axis=0)}
        if li > 0:
            delta = (delta @ layers[li]["W"].T) * (pre[li - 1] > 0)
    return loss, grads


def train_mlp(X, y, hidden_sizes: Sequence[int] = (32,), epochs: int = 200,
              learning_rate: float = 0.01, batch_size: int = 16, seed: int = 0,
              standardize: bool = True, selected_channels: Sequence[str] = (),
              schema_id: str = "") -> TrainedModel:
    """Train with plain mini-batch gradient descent; batches reshuffle each epoch.

    Raises
    ------
    TrainingError
        If the loss becomes NaN or infinite.
    """
    hidden_sizes = [int(h) for h in hidden_sizes]
    if any(h < 1 for h in hidden_sizes):
        raise ValidationError("hidden layer sizes must be >= 1")
    if epochs < 1 or batch_size < 1 or not learning_rate > 0:
        raise ValidationError("epochs, batch_size and learning_rate must be positive")
    X = as_matrix(X)
    labels, codes = encode_labels(y)
    std = fit_standardizer(X) if standardize else Standardizer.identity(X.shape[1])
    Xs = std.apply(X)
    Y = np.eye(len(labels))[codes]
    rng = np.random.default_rng(seed)
    layers = init_layers([Xs.shape[1], *hidden_sizes, len(labels)], rng)
    loss = float("nan")
    for epoch in range(epochs):
        order = rng.permutation(len(Xs))
        for start in range(0, len(Xs), batch_size):
            batch = order[start:start + batch_size]
            with np.errstate(over="ignore", invalid="ignore"):  # divergence is checked below
                loss, grads = loss_and_grads(layers, Xs[batch], Y[batch])
            if not np.isfinite(loss):
                raise TrainingError(f"MLP training diverged at epoch {epoch} (loss={loss})")
            for layer, g in zip(layers, grads):
                layer["W"] -= learning_rate * g["W"]
                layer["b"] -= learning_rate * g["b"]
    params = {"hidden_sizes": hidden_sizes, "epochs": epochs, "learning_rate": learning_rate,
              "batch_size": batch_size, "layers": layers, "final_batch_loss": loss}
    return TrainedModel("mlp", std, labels, params, tuple(selected_channels), schema_id,
                        {"seed": seed})


def predict_mlp(model: TrainedModel, Xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    layers = [{"W": np.asarray(l["W"], dtype=float), "b": np.asarray(l["b"], dtype=float)}
              for l in model.params["layers"]]
    prob = forward(layers, Xs)
    win = np.argmax(prob, axis=1)
    return win, prob[np.arange(len(Xs)), win]
