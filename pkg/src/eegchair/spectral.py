"""Power spectral density, band powers and max-power channel selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .signal_io import SessionDataset

BAND_TABLE: dict[str, tuple[float, float]] = {
    "delta": (0.5, 4.0),
    "theta": (4.0, 8.0),
    "alpha": (8.0, 15.0),
    "beta": (15.0, 32.0),
    "gamma": (32.0, 45.0),
}
# Broadband range used for channel ranking: above drift, below the notches.
SELECTION_BAND = (0.5, 45.0)


@dataclass(frozen=True)
class PsdEstimate:
    freqs: np.ndarray
    power: np.ndarray
    bin_width: float
    params: dict = field(default_factory=dict)

    def total_power(self) -> float:
        return float(np.sum(self.power) * self.bin_width)


def _window(kind: str, n: int) -> np.ndarray:
    if kind == "hann":
        # periodic Hann, the usual choice for spectral averaging
        return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    if kind == "rect":
        return np.ones(n)
    raise ValidationError(f"unknown window {kind!r}")


def welch_psd(signal, sample_rate: float, segment_len: int = 256,
              overlap_fraction: float = 0.5, window: str = "hann") -> PsdEstimate:
    """One-sided Welch PSD in µV²/Hz.

    The signal mean is removed first; each segment is windowed, transformed,
    and scaled by ``1 / (fs * sum(w**2))`` so that ``sum(power) * bin_width``
    approximates the signal variance.  Segments start every
    ``segment_len - round(overlap * segment_len)`` samples; a trailing
    partial segment is dropped.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise ValidationError("welch_psd takes a single-channel vector")
    if x.size == 0:
        raise ValidationError("empty signal")
    if segment_len < 2 or segment_len % 2:
        raise ValidationError("segment_len must be even and >= 2")
    if segment_len > x.size:
        raise ValidationError(f"segment_len {segment_len} exceeds signal length {x.size}")
    if not 0 <= overlap_fraction < 1:
        raise ValidationError("overlap_fraction must lie in [0, 1)")

    x = x - x.mean()
    w = _window(window, segment_len)
    step = segment_len - int(round(overlap_fraction * segment_len))
    starts = np.arange(0, x.size - segment_len + 1, step)
    segs = x[starts[:, None] + np.arange(segment_len)[None, :]] * w
    spec = np.abs(np.fft.rfft(segs, axis=1)) ** 2
    power = spec.mean(axis=0) / (sample_rate * np.sum(w**2))
    power[1:-1] *= 2.0  # fold negative frequencies; DC and Nyquist appear once
    freqs = np.arange(segment_len // 2 + 1) * (sample_rate / segment_len)
    return PsdEstimate(freqs, power, sample_rate / segment_len,
                       {"segment_len": segment_len, "overlap_fraction": overlap_fraction,
                        "window_kind": window})


def band_power(psd: PsdEstimate, lo: float, hi: float) -> float:
    """Sum ``power * bin_width`` over bins whose centre lies in ``[lo, hi)``.

    ``hi`` may exceed Nyquist by up to one bin so the top bin can be covered.
    """
    nyquist = psd.freqs[-1]
    if not 0 <= lo < hi:
        raise ValidationError(f"invalid band [{lo}, {hi})")
    if lo > nyquist or hi > nyquist + psd.bin_width:
        raise ValidationError(f"band [{lo}, {hi}) outside 0..{nyquist} Hz")
    mask = (psd.freqs >= lo) & (psd.freqs < hi)
    return float(np.sum(psd.power[mask]) * psd.bin_width)


def band_powers(psd: PsdEstimate, table: dict[str, tuple[float, float]] = BAND_TABLE) -> dict[str, float]:
    return {name: band_power(psd, lo, hi) for name, (lo, hi) in table.items()}


@dataclass(frozen=True)
class ChannelRanking:
    ranked: tuple[tuple[str, float], ...]
    k: int

    @property
    def selected(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.ranked[: self.k])


def select_channels(dataset: SessionDataset, k: int = 5, segment_len: int = 256,
                    overlap_fraction: float = 0.5, window: str = "hann") -> ChannelRanking:
    """Rank channels by mean broadband (0.5-45 Hz) power and keep the top ``k``.

    Power is averaged over every epoch in ``dataset``, which should be the
    training split only.  Equal powers keep roster order.
    """
    if not dataset.trials:
        raise ValidationError("cannot select channels from an empty dataset")
    n_ch = len(dataset.channels)
    if not 1 <= k <= n_ch:
        raise ValidationError(f"k must lie in 1..{n_ch}")
    lo, hi = SELECTION_BAND
    per_trial = np.array([
        [band_power(welch_psd(ep.samples[c], ep.sample_rate, segment_len,
                              overlap_fraction, window), lo, hi)
         for c in range(n_ch)]
        for ep in dataset.trials
    ])
    # fsum makes the mean independent of trial order
    totals = np.array([math.fsum(col) for col in per_trial.T]) / len(dataset.trials)
    # stable sort on -power keeps roster order among ties
    order = np.argsort(-totals, kind="stable")
    ranked = tuple((dataset.channels[i], float(totals[i])) for i in order)
    return ChannelRanking(ranked, min(k, n_ch))
