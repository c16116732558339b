"""Session and epoch data model, CSV persistence, synthetic EEG and replay.

A session is a sequence of labelled 14-channel epochs recorded at 128 Hz.
Each epoch is one 8 s trial (1024 samples per channel).  The CSV layout is::

    trial,label,t,AF3,F7,F3,FC5,T7,P7,O1,O2,P8,T8,FC6,F4,F8,AF4

with one row per sample, rows of a trial contiguous and ``t`` counting up
from zero.
"""

from __future__ import annotations

import csv
import enum
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Optional, Sequence

import numpy as np

from .errors import SchemaError, ValidationError

CHANNELS: tuple[str, ...] = (
    "AF3", "F7", "F3", "FC5", "T7", "P7", "O1",
    "O2", "P8", "T8", "FC6", "F4", "F8", "AF4",
)
CHANNEL_INDEX = {name: i for i, name in enumerate(CHANNELS)}

SAMPLE_RATE = 128.0
EPOCH_SECONDS = 8.0
EPOCH_SAMPLES = int(SAMPLE_RATE * EPOCH_SECONDS)  # 1024

CSV_HEADER: tuple[str, ...] = ("trial", "label", "t") + CHANNELS

BANDS: tuple[str, ...] = ("delta", "theta", "alpha", "beta", "gamma")
# Midpoints of the canonical bands; gamma capped at 40 Hz.
BAND_CENTERS_HZ = {"delta": 2.0, "theta": 6.0, "alpha": 11.5, "beta": 23.5, "gamma": 40.0}


class Command(enum.Enum):
    """The five wheelchair commands, in their fixed tie-breaking order."""

    LEFT = "LEFT"
    RIGHT = "RIGHT"
    FORWARD = "FORWARD"
    REVERSE = "REVERSE"
    STOP = "STOP"

    @property
    def index(self) -> int:
        return _COMMAND_ORDER.index(self)

    @classmethod
    def from_token(cls, token: str) -> "Command":
        try:
            return cls(token.strip().upper())
        except ValueError:
            raise SchemaError(f"unknown label token {token!r}") from None

    @classmethod
    def from_index(cls, i: int) -> "Command":
        return _COMMAND_ORDER[i]


_COMMAND_ORDER: tuple[Command, ...] = tuple(Command)
COMMANDS = _COMMAND_ORDER


def check_channels(channels: Sequence[str]) -> tuple[str, ...]:
    channels = tuple(channels)
    unknown = [c for c in channels if c not in CHANNEL_INDEX]
    if unknown:
        raise SchemaError(f"unknown channel(s): {', '.join(unknown)}")
    if len(set(channels)) != len(channels):
        raise SchemaError("duplicate channel names")
    return channels


@dataclass(frozen=True)
class EegEpoch:
    """One labelled trial: a ``channels x samples`` matrix in microvolts."""

    samples: np.ndarray
    sample_rate: float = SAMPLE_RATE
    label: Optional[Command] = None
    trial_id: int = 0

    def __post_init__(self):
        data = np.array(self.samples, dtype=float)
        if data.ndim != 2:
            raise ValidationError(f"epoch samples must be 2-D, got shape {data.shape}")
        if not self.sample_rate > 0:
            raise ValidationError("sample_rate must be positive")
        if not np.all(np.isfinite(data)):
            raise ValidationError(f"trial {self.trial_id}: non-finite sample values")
        data.setflags(write=False)
        object.__setattr__(self, "samples", data)

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    def replace_samples(self, samples: np.ndarray) -> "EegEpoch":
        return EegEpoch(samples, self.sample_rate, self.label, self.trial_id)


@dataclass(frozen=True)
class SessionDataset:
    channels: tuple[str, ...] = CHANNELS
    trials: tuple[EegEpoch, ...] = ()
    subject_tag: str = ""
    seed: Optional[int] = None

    def __post_init__(self):
        channels = check_channels(self.channels)
        trials = tuple(self.trials)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "trials", trials)
        if not trials:
            return
        rate = trials[0].sample_rate
        for ep in trials:
            if ep.n_channels != len(channels):
                raise SchemaError(
                    f"trial {ep.trial_id} has {ep.n_channels} channels, roster has {len(channels)}")
            if ep.sample_rate != rate:
                raise SchemaError("trials disagree on sample_rate")
            if ep.label is not None and not isinstance(ep.label, Command):
                raise SchemaError(f"trial {ep.trial_id}: invalid label {ep.label!r}")

    def __len__(self) -> int:
        return len(self.trials)

    @property
    def sample_rate(self) -> float:
        return self.trials[0].sample_rate if self.trials else SAMPLE_RATE

    def counts(self) -> dict[Command, int]:
        """Number of trials per command (every command present, zero if absent)."""
        out = {c: 0 for c in Command}
        for ep in self.trials:
            if ep.label is not None:
                out[ep.label] += 1
        return out

    def labels(self) -> list[Optional[Command]]:
        return [ep.label for ep in self.trials]

    def subset(self, indices: Sequence[int]) -> "SessionDataset":
        return SessionDataset(self.channels, tuple(self.trials[i] for i in indices),
                              self.subject_tag, self.seed)

    def with_trials(self, trials: Sequence[EegEpoch]) -> "SessionDataset":
        return SessionDataset(self.channels, tuple(trials), self.subject_tag, self.seed)

    def stream(self) -> np.ndarray:
        """All trials concatenated along time."""
        if not self.trials:
            return np.zeros((len(self.channels), 0))
        return np.concatenate([ep.samples for ep in self.trials], axis=1)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def save_session_csv(dataset: SessionDataset, path) -> None:
    """Write ``dataset`` in the session CSV layout.

    Values are written with ``repr`` so a subsequent load reproduces every
    float bit for bit.  Channel columns always follow the fixed roster order;
    a dataset with a partial roster writes only its own channels.
    """
    path = Path(path)
    header = ("trial", "label", "t") + tuple(dataset.channels)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for ep in dataset.trials:
            label = ep.label.value if ep.label is not None else ""
            prefix = f"{ep.trial_id},{label},"
            cols = ep.samples.T.tolist()
            fh.writelines(
                prefix + str(t) + "," + ",".join(map(repr, row)) + "\n"
                for t, row in enumerate(cols)
            )


def load_session_csv(path, sample_rate: float = SAMPLE_RATE,
                     expected_len: Optional[int] = None,
                     subject_tag: str = "") -> SessionDataset:
    """Read a session CSV.

    Parameters
    ----------
    path : path-like
        File in the session CSV layout.
    sample_rate : float
        Rate to attach to every epoch (the CSV does not carry it).
    expected_len : int, optional
        Required rows per trial.  Defaults to the first trial's length, so
        every trial must match it.

    Raises
    ------
    SchemaError
        Missing/unknown channel columns, non-numeric or non-finite cells,
        ragged or non-contiguous trials, unknown label tokens.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file (no header)") from None
        if header[:3] != ["trial", "label", "t"]:
            raise SchemaError(f"{path}: header must start with trial,label,t")
        chan_cols = header[3:]
        unknown = [c for c in chan_cols if c not in CHANNEL_INDEX]
        if unknown:
            raise SchemaError(f"{path}: unknown channel column(s) {unknown}")
        missing = [c for c in CHANNELS if c not in chan_cols]
        if missing:
            raise SchemaError(f"{path}: missing channel column(s) {missing}")
        if len(set(chan_cols)) != len(chan_cols):
            raise SchemaError(f"{path}: duplicate channel columns")
        order = [chan_cols.index(c) for c in CHANNELS]
        n_cols = len(header)

        trials: list[EegEpoch] = []
        seen: set[int] = set()
        cur_id: Optional[int] = None
        cur_label: Optional[Command] = None
        rows: list[list[float]] = []

        def flush():
            nonlocal expected_len
            if cur_id is None:
                return
            if expected_len is None:
                expected_len = len(rows)
            if len(rows) != expected_len:
                raise SchemaError(
                    f"{path}: trial {cur_id} has {len(rows)} rows, expected {expected_len}")
            data = np.asarray(rows, dtype=float).T[order]
            trials.append(EegEpoch(data, sample_rate, cur_label, cur_id))

        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != n_cols:
                raise SchemaError(f"{path}:{lineno}: expected {n_cols} cells, got {len(rec)}")
            try:
                trial_id = int(rec[0])
                t = int(rec[2])
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: non-integer trial or t") from None
            if trial_id < 0:
                raise SchemaError(f"{path}:{lineno}: negative trial id")
            label = Command.from_token(rec[1]) if rec[1].strip() else None
            if trial_id != cur_id:
                flush()
                if trial_id in seen:
                    raise SchemaError(f"{path}:{lineno}: trial {trial_id} is not contiguous")
                seen.add(trial_id)
                cur_id, cur_label, rows = trial_id, label, []
            elif label != cur_label:
                raise SchemaError(f"{path}:{lineno}: label changes within trial {trial_id}")
            if t != len(rows):
                raise SchemaError(f"{path}:{lineno}: t={t}, expected {len(rows)}")
            try:
                vals = [float(v) for v in rec[3:]]
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: non-numeric sample value") from None
            if not all(math.isfinite(v) for v in vals):
                raise SchemaError(f"{path}:{lineno}: non-finite sample value")
            rows.append(vals)
        flush()
    return SessionDataset(CHANNELS, tuple(trials), subject_tag)


# ---------------------------------------------------------------------------
# Synthetic sessions
# ---------------------------------------------------------------------------

_BASE = {"delta": 8.0, "theta": 5.0, "alpha": 6.0, "beta": 3.0, "gamma": 1.5}


def default_band_signature() -> dict[Command, dict[str, float]]:
    """Per-command band amplitudes (µV): Stop is the resting baseline and
    every movement command boosts one band."""
    boosts = {
        Command.LEFT: ("alpha", 12.0),
        Command.RIGHT: ("beta", 7.0),
        Command.FORWARD: ("theta", 10.0),
        Command.REVERSE: ("delta", 15.0),
        Command.STOP: (None, 0.0),
    }
    sig = {}
    for cmd, (band, amp) in boosts.items():
        amps = dict(_BASE)
        if band is not None:
            amps[band] = amp
        sig[cmd] = amps
    return sig


@dataclass(frozen=True)
class SynthSpec:
    trials_per_command: int = 50
    band_signature: Mapping[Command, Mapping[str, float]] = field(default_factory=default_band_signature)
    noise_amp: float = 6.0
    amplitude_jitter: float = 0.25
    seed: int = 0
    sample_rate: float = SAMPLE_RATE
    n_samples: int = EPOCH_SAMPLES
    commands: tuple[Command, ...] = COMMANDS

    def __post_init__(self):
        if self.trials_per_command < 1:
            raise ValidationError("trials_per_command must be >= 1")
        if not 0 <= self.amplitude_jitter < 1:
            raise ValidationError("amplitude_jitter must lie in [0, 1)")
        if self.noise_amp < 0:
            raise ValidationError("noise_amp must be >= 0")
        if not self.commands:
            raise ValidationError("at least one command is required")
        for cmd in self.commands:
            amps = self.band_signature.get(cmd)
            if amps is None:
                raise ValidationError(f"no band signature for {cmd.value}")
            for band in BANDS:
                if amps.get(band, 0.0) < 0:
                    raise ValidationError(f"negative amplitude for {cmd.value}/{band}")


def pink_noise(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    """Unit-RMS noise with a 1/f power spectrum along the last axis."""
    n = shape[-1]
    spec = np.fft.rfft(rng.standard_normal(shape), axis=-1)
    f = np.arange(spec.shape[-1], dtype=float)
    scale = np.zeros_like(f)
    scale[1:] = 1.0 / np.sqrt(f[1:])
    x = np.fft.irfft(spec * scale, n=n, axis=-1)
    rms = np.sqrt(np.mean(x**2, axis=-1, keepdims=True))
    return x / np.where(rms > 0, rms, 1.0)


def generate_synthetic_session(spec: SynthSpec = SynthSpec()) -> SessionDataset:
    """Build a labelled session from band-limited sinusoids plus 1/f noise.

    Trials cycle through ``spec.commands`` round-robin.  The output depends
    only on ``spec``.
    """
    rng = np.random.default_rng(spec.seed)
    n_ch = len(CHANNELS)
    t = np.arange(spec.n_samples) / spec.sample_rate
    freqs = np.array([BAND_CENTERS_HZ[b] for b in BANDS])
    carriers = 2 * np.pi * freqs[:, None] * t[None, :]  # bands x time

    trials = []
    n_total = spec.trials_per_command * len(spec.commands)
    for i in range(n_total):
        cmd = spec.commands[i % len(spec.commands)]
        amps = np.array([spec.band_signature[cmd].get(b, 0.0) for b in BANDS])
        jitter = 1.0 + spec.amplitude_jitter * rng.uniform(-1.0, 1.0, size=len(BANDS))
        phases = rng.uniform(0.0, 2 * np.pi, size=(n_ch, len(BANDS)))
        waves = np.sin(carriers[None, :, :] + phases[:, :, None])  # ch x band x time
        data = np.einsum("b,cbt->ct", amps * jitter, waves)
        if spec.noise_amp > 0:
            data = data + spec.noise_amp * pink_noise(rng, (n_ch, spec.n_samples))
        trials.append(EegEpoch(data, spec.sample_rate, cmd, i))
    return SessionDataset(CHANNELS, tuple(trials), subject_tag="synthetic", seed=spec.seed)


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------

def replay_frames(dataset: SessionDataset, chunk: int, realtime: bool = False,
                  sleep=time.sleep) -> Iterator[np.ndarray]:
    """Yield the session's concatenated samples as ``channels x chunk`` frames.

    The last frame may be shorter.  With ``realtime`` each frame is paced to
    ``chunk / sample_rate`` seconds after the previous one.
    """
    if chunk < 1:
        raise ValidationError("chunk must be >= 1")
    if not dataset.trials:
        return
    stream = dataset.stream()
    period = chunk / dataset.sample_rate
    deadline = time.monotonic()
    for start in range(0, stream.shape[1], chunk):
        if realtime:
            deadline += period
            delay = deadline - time.monotonic()
            if delay > 0:
                sleep(delay)
        yield stream[:, start:start + chunk].copy()
