"""Epoch cleaning: DC removal, power-line notch filtering, artifact rejection.

All filtering is causal and single-pass so that offline training and the
streaming runtime apply exactly the same arithmetic to a window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import ValidationError
from .signal_io import CHANNELS, SAMPLE_RATE, EegEpoch

DEFAULT_NOTCH_HZ: tuple[float, ...] = (50.0, 60.0)
DEFAULT_Q = 30.0
DEFAULT_ARTIFACT_LIMIT_UV = 100.0


@dataclass(frozen=True)
class NotchSpec:
    center_hz: float = 50.0
    q_factor: float = DEFAULT_Q
    sample_rate: float = SAMPLE_RATE

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ValidationError("sample_rate must be positive")
        if not 0 < self.center_hz < self.sample_rate / 2:
            raise ValidationError(
                f"notch center {self.center_hz} Hz must lie strictly between 0 and "
                f"Nyquist ({self.sample_rate / 2} Hz)")
        if not self.q_factor > 0:
            raise ValidationError("q_factor must be positive")

    def coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        """Normalised biquad ``(b, a)`` with ``a[0] == 1``.

        Zeros sit on the unit circle at the centre frequency; the poles share
        their angle at a radius set by the -3 dB bandwidth ``center / Q``.
        Gain is exactly one at DC and at Nyquist.
        """
        w0 = 2 * math.pi * self.center_hz / self.sample_rate
        bw = 2 * math.pi * (self.center_hz / self.q_factor) / self.sample_rate
        beta = math.tan(bw / 2)
        gain = 1.0 / (1.0 + beta)
        c = math.cos(w0)
        b = gain * np.array([1.0, -2.0 * c, 1.0])
        a = np.array([1.0, -2.0 * c * gain, 2.0 * gain - 1.0])
        return b, a


@dataclass(frozen=True)
class ArtifactVerdict:
    accepted: bool
    peak_abs_uv: float
    offending_channel: Optional[str] = None


def remove_dc(epoch: EegEpoch) -> EegEpoch:
    x = epoch.samples
    return epoch.replace_samples(x - x.mean(axis=1, keepdims=True))


def notch_filter(epoch: EegEpoch, spec: NotchSpec) -> EegEpoch:
    """Apply one notch section to every channel, starting from rest."""
    if spec.sample_rate != epoch.sample_rate:
        raise ValidationError(
            f"notch designed for {spec.sample_rate} Hz, epoch sampled at {epoch.sample_rate} Hz")
    b, a = spec.coefficients()
    return epoch.replace_samples(lfilter(b, a, epoch.samples, axis=1))


def artifact_check(epoch: EegEpoch, limit_uv: float = DEFAULT_ARTIFACT_LIMIT_UV,
                   channels: Sequence[str] = CHANNELS) -> ArtifactVerdict:
    """Reject the epoch iff some sample exceeds ``limit_uv`` in magnitude.

    A sample exactly at the limit is accepted.  ``offending_channel`` is the
    first channel (roster order) holding an over-limit sample.
    """
    if not limit_uv > 0:
        raise ValidationError("artifact limit must be positive")
    mag = np.abs(epoch.samples)
    peak = float(mag.max()) if mag.size else 0.0
    if peak <= limit_uv:
        return ArtifactVerdict(True, peak, None)
    row = int(np.argmax((mag > limit_uv).any(axis=1)))
    return ArtifactVerdict(False, peak, channels[row])


@dataclass(frozen=True)
class PreprocessConfig:
    """Toggleable stages of the cleaning chain."""

    dc_removal: bool = True
    notch_hz: tuple[float, ...] = DEFAULT_NOTCH_HZ
    q_factor: float = DEFAULT_Q
    artifact_limit_uv: float = DEFAULT_ARTIFACT_LIMIT_UV

    def notch_specs(self, sample_rate: float) -> list[NotchSpec]:
        return [NotchSpec(f, self.q_factor, sample_rate) for f in self.notch_hz]


def clean_epoch(epoch: EegEpoch, config: PreprocessConfig = PreprocessConfig(),
                channels: Sequence[str] = CHANNELS) -> tuple[EegEpoch, ArtifactVerdict]:
    """DC removal, then each notch in order, then the artifact check.

    Shared by training and the streaming runtime.
    """
    if config.dc_removal:
        epoch = remove_dc(epoch)
    for spec in config.notch_specs(epoch.sample_rate):
        epoch = notch_filter(epoch, spec)
    return epoch, artifact_check(epoch, config.artifact_limit_uv, channels)
