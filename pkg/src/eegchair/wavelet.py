"""Periodized Daubechies DWT and subband feature extraction.

At 128 Hz a 5-level decomposition splits a channel into octaves that line
up roughly with the classic EEG bands::

    D1  32-64 Hz  gamma
    D2  16-32 Hz  beta
    D3   8-16 Hz  alpha
    D4   4-8  Hz  theta
    D5   2-4  Hz  delta
    A5   0-2  Hz  delta
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, sqrt
from typing import Sequence

import numpy as np

from .errors import SchemaError, ValidationError
from .signal_io import CHANNELS, EegEpoch

DEFAULT_LEVELS = 5
STATISTICS = ("mean_abs", "mean_square", "std")
FEATURE_MODES = ("subbands", "approximations")


@dataclass(frozen=True)
class WaveletFilterPair:
    lowpass: np.ndarray
    highpass: np.ndarray

    @property
    def length(self) -> int:
        return len(self.lowpass)


def daubechies(n_moments: int = 4) -> WaveletFilterPair:
    """Build the ``2 * n_moments``-tap Daubechies filter pair.

    The lowpass filter is the minimum-phase spectral factor of
    ``|H(w)|^2 = 2 cos^(2N)(w/2) P(sin^2(w/2))`` where ``P`` is the
    Daubechies polynomial of degree ``N - 1``.  The highpass is the
    quadrature mirror ``g[n] = (-1)^n h[L-1-n]``.
    """
    N = n_moments
    # P(y) = sum_k C(N-1+k, k) y^k ; np.roots wants the highest power first
    p = [comb(N - 1 + k, k) for k in range(N)][::-1]
    h = np.array([1.0 + 0j])
    for y in np.roots(p):
        # y = (2 - z - 1/z) / 4  ->  z^2 - (2 - 4y) z + 1 = 0
        z = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
        z_in = z[np.argmin(np.abs(z))]
        h = np.convolve(h, [1.0, -z_in])
    for _ in range(N):
        h = np.convolve(h, [0.5, 0.5])
    h = np.real(h)
    h *= sqrt(2.0) / h.sum()
    L = len(h)
    g = np.array([(-1) ** n * h[L - 1 - n] for n in range(L)])
    h.setflags(write=False)
    g.setflags(write=False)
    return WaveletFilterPair(h, g)


DB4 = daubechies(4)


@lru_cache(maxsize=64)
def _periodic_index(length: int, taps: int) -> np.ndarray:
    k = np.arange(length // 2)[:, None]
    n = np.arange(taps)[None, :]
    idx = (2 * k + n) % length
    idx.setflags(write=False)
    return idx


def _analysis_step(x: np.ndarray, pair: WaveletFilterPair) -> tuple[np.ndarray, np.ndarray]:
    win = x[..., _periodic_index(x.shape[-1], pair.length)]
    return win @ pair.lowpass, win @ pair.highpass


def _synthesis_step(a: np.ndarray, d: np.ndarray, pair: WaveletFilterPair) -> np.ndarray:
    L = 2 * a.shape[-1]
    idx = _periodic_index(L, pair.length)
    contrib = a[:, None] * pair.lowpass[None, :] + d[:, None] * pair.highpass[None, :]
    out = np.zeros(L)
    np.add.at(out, idx.ravel(), contrib.ravel())
    return out


@dataclass(frozen=True)
class WaveletDecomposition:
    details: tuple[np.ndarray, ...]  # D1 (finest) .. Dn
    approx: np.ndarray               # An

    @property
    def levels(self) -> int:
        return len(self.details)

    @property
    def level_lengths(self) -> tuple[int, ...]:
        return tuple(len(d) for d in self.details) + (len(self.approx),)

    def series(self) -> list[np.ndarray]:
        """``[D1, ..., Dn, An]``, a complete orthogonal partition."""
        return list(self.details) + [self.approx]

    def energy(self) -> float:
        return float(sum(np.dot(s, s) for s in self.series()))


def _check_length(n: int, levels: int) -> None:
    if levels < 1:
        raise ValidationError("levels must be >= 1")
    if n == 0 or n % (2**levels):
        raise ValidationError(f"signal length {n} is not divisible by 2**{levels}")


def dwt_decompose(signal, levels: int = DEFAULT_LEVELS,
                  pair: WaveletFilterPair = DB4) -> WaveletDecomposition:
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise ValidationError("dwt_decompose takes a 1-D signal")
    _check_length(x.size, levels)
    details = []
    a = x
    for _ in range(levels):
        a, d = _analysis_step(a, pair)
        details.append(d)
    return WaveletDecomposition(tuple(details), a)


def dwt_approximations(signal, levels: int = DEFAULT_LEVELS,
                       pair: WaveletFilterPair = DB4) -> list[np.ndarray]:
    """Approximation coefficients ``[A1, ..., An]`` of every level."""
    x = np.asarray(signal, dtype=float)
    _check_length(x.size, levels)
    out = []
    a = x
    for _ in range(levels):
        a, _d = _analysis_step(a, pair)
        out.append(a)
    return out


def idwt_reconstruct(decomp: WaveletDecomposition, pair: WaveletFilterPair = DB4) -> np.ndarray:
    """Exact inverse of :func:`dwt_decompose`."""
    details = [np.asarray(d, dtype=float) for d in decomp.details]
    a = np.asarray(decomp.approx, dtype=float)
    if not details:
        raise ValidationError("decomposition has no detail levels")
    if len(details[-1]) != len(a):
        raise ValidationError("approximation and coarsest detail lengths differ")
    for fine, coarse in zip(details, details[1:]):
        if len(fine) != 2 * len(coarse):
            raise ValidationError("detail lengths do not halve level to level")
    for d in reversed(details):
        a = _synthesis_step(a, d, pair)
    return a


# ---------------------------------------------------------------------------
# Features
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    schema_id: str


def series_names(mode: str = "subbands", levels: int = DEFAULT_LEVELS) -> list[str]:
    if mode == "subbands":
        return [f"D{i}" for i in range(1, levels + 1)] + [f"A{levels}"]
    if mode == "approximations":
        return [f"A{i}" for i in range(1, levels + 1)]
    raise ValidationError(f"unknown feature mode {mode!r}; expected one of {FEATURE_MODES}")


def schema_id(selected: Sequence[str], mode: str = "subbands", levels: int = DEFAULT_LEVELS) -> str:
    return f"db4-L{levels}-{mode}-{'+'.join(STATISTICS)}:{','.join(selected)}"


def feature_names(selected: Sequence[str], mode: str = "subbands",
                  levels: int = DEFAULT_LEVELS) -> list[str]:
    return [f"{ch}.{s}.{stat}" for ch in selected
            for s in series_names(mode, levels) for stat in STATISTICS]


def _series_stats(series: Sequence[np.ndarray]) -> list[float]:
    out = []
    for s in series:
        out += [float(np.mean(np.abs(s))), float(np.mean(s * s)), float(np.std(s))]
    return out


def extract_features(epoch: EegEpoch, selected: Sequence[str], channels: Sequence[str] = CHANNELS,
                     mode: str = "subbands", levels: int = DEFAULT_LEVELS) -> FeatureVector:
    """Per-channel DWT statistics, channels outer, series middle, statistics inner.

    For each selected channel and each series (``D1..D5, A5`` by default, or
    ``A1..A5`` with ``mode="approximations"``) three statistics are taken:
    mean absolute value, mean square and standard deviation.
    """
    names = series_names(mode, levels)  # validates mode
    index = {c: i for i, c in enumerate(channels)}
    missing = [c for c in selected if c not in index]
    if missing:
        raise SchemaError(f"selected channel(s) not in epoch: {missing}")
    _check_length(epoch.n_samples, levels)
    values = []
    for ch in selected:
        x = epoch.samples[index[ch]]
        if mode == "subbands":
            series = dwt_decompose(x, levels).series()
        else:
            series = dwt_approximations(x, levels)
        assert len(series) == len(names)
        values += _series_stats(series)
    return FeatureVector(np.array(values), schema_id(selected, mode, levels))
