"""Online pipeline: sample frames in, debounced command decisions out.

Every ``hop_samples`` (once a full window has arrived) the last
``window_samples`` raw samples are cleaned, featurized and classified with
exactly the code the offline trainer uses, then passed through a debouncer.
Each window is filtered from rest, so a window's prediction depends only on
its own raw samples and never on how the stream was chunked.
"""

from __future__ import annotations

import json
import socket
import time
from dataclasses import dataclass, replace
from typing import IO, Iterable, Iterator, Optional, Sequence

import numpy as np

from .classify import TrainedModel, predict
from .errors import SchemaError, ValidationError
from .preprocess import PreprocessConfig, clean_epoch
from .signal_io import CHANNELS, SAMPLE_RATE, Command, EegEpoch
from .wavelet import extract_features
from .workflow import preprocess_config_of


@dataclass(frozen=True)
class PipelineConfig:
    window_samples: int = 1024
    hop_samples: int = 512
    debounce_wins: int = 2
    stop_immediate: bool = True
    artifact_limit_uv: float = 100.0
    sample_rate: float = SAMPLE_RATE

    def __post_init__(self):
        if self.window_samples < 1 or self.hop_samples < 1:
            raise ValidationError("window and hop must be positive")
        if self.hop_samples > self.window_samples:
            raise ValidationError("hop_samples must not exceed window_samples")
        if self.debounce_wins < 1:
            raise ValidationError("debounce_wins must be >= 1")
        if not self.artifact_limit_uv > 0:
            raise ValidationError("artifact_limit_uv must be positive")


@dataclass(frozen=True)
class WindowPrediction:
    window_index: int
    t_end: int
    command: Optional[Command]  # None when the window was artifact-rejected
    score: float


@dataclass(frozen=True)
class CommandDecision:
    command: Command
    score: float
    window_index: int
    t_end: int
    suppressed_by_debounce: bool = False
    raw: Optional[Command] = None  # classifier output before debounce/safety

    def to_json(self) -> str:
        return json.dumps({"win": self.window_index, "cmd": self.command.value,
                           "score": self.score, "t_end": self.t_end})


def classify_window(model: TrainedModel, window: np.ndarray, preprocess: PreprocessConfig,
                    channels: Sequence[str] = CHANNELS,
                    sample_rate: float = SAMPLE_RATE) -> tuple[Optional[Command], float]:
    """Clean, featurize and classify one raw ``channels x window`` block."""
    epoch = EegEpoch(window, sample_rate)
    cleaned, verdict = clean_epoch(epoch, preprocess, channels)
    if not verdict.accepted:
        return None, 0.0
    mode = model.train_meta.get("feature_mode", "subbands")
    fv = extract_features(cleaned, model.selected_channels, channels, mode)
    return predict(model, fv)


def _window_preprocess(model: TrainedModel, config: PipelineConfig) -> PreprocessConfig:
    return replace(preprocess_config_of(model), artifact_limit_uv=config.artifact_limit_uv)


def window_predictions(model: TrainedModel, stream: np.ndarray,
                       config: PipelineConfig = PipelineConfig(),
                       channels: Sequence[str] = CHANNELS) -> list[WindowPrediction]:
    """Offline reference: slice a ``channels x T`` stream into hop-spaced windows."""
    pre = _window_preprocess(model, config)
    out = []
    W, H = config.window_samples, config.hop_samples
    for i, end in enumerate(range(W, stream.shape[1] + 1, H)):
        cmd, score = classify_window(model, stream[:, end - W:end], pre, channels, config.sample_rate)
        out.append(WindowPrediction(i, end, cmd, score))
    return out


class Debouncer:
    """Turns per-window predictions into decisions.

    A movement command is released once ``debounce_wins`` consecutive
    windows agree on it; Stop (with ``stop_immediate``) is released at once.
    An artifact-rejected window releases Stop with score 0 and breaks the
    streak.
    """

    def __init__(self, debounce_wins: int = 2, stop_immediate: bool = True):
        self.debounce_wins = debounce_wins
        self.stop_immediate = stop_immediate
        self.reset()

    def reset(self) -> None:
        self._last: Optional[Command] = None
        self._streak = 0

    def feed(self, pred: WindowPrediction) -> CommandDecision:
        if pred.command is None:
            self.reset()
            return CommandDecision(Command.STOP, 0.0, pred.window_index, pred.t_end, False, None)
        cmd = pred.command
        if cmd == self._last:
            self._streak += 1
        else:
            self._last, self._streak = cmd, 1
        if cmd == Command.STOP and self.stop_immediate:
            held = False
        else:
            held = self._streak < self.debounce_wins
        return CommandDecision(cmd, pred.score, pred.window_index, pred.t_end, held, cmd)


@dataclass(frozen=True)
class PipelineStats:
    windows_processed: int
    decisions_emitted: int
    latency_p50_ms: float
    latency_p95_ms: float


class Pipeline:
    """Single-owner streaming state: ring buffer, sample clock, debouncer."""

    def __init__(self, model: TrainedModel, config: PipelineConfig = PipelineConfig(),
                 channels: Sequence[str] = CHANNELS):
        self.model = model
        self.config = config
        self.channels = tuple(channels)
        self._pre = _window_preprocess(model, config)
        self.reset()

    def reset(self) -> None:
        W = self.config.window_samples
        self._ring = np.zeros((len(self.channels), W))
        self._pos = 0                # next write column in the ring
        self._total = 0              # samples received so far
        self._next_end = W           # sample clock of the next window end
        self._window_index = 0
        self._debounce = Debouncer(self.config.debounce_wins, self.config.stop_immediate)
        self._latencies: list[float] = []
        self._emitted = 0
        self.history: list[WindowPrediction] = []

    def _window(self) -> np.ndarray:
        # oldest sample sits at the write position once the ring is full
        return np.concatenate([self._ring[:, self._pos:], self._ring[:, :self._pos]], axis=1)

    def push(self, frame, channels: Optional[Sequence[str]] = None) -> list[CommandDecision]:
        """Append a ``channels x m`` frame; return decisions for completed windows.

        Suppressed (debounce-held) decisions are included with the flag set
        so callers can log every window.
        """
        if channels is not None and tuple(channels) != self.channels:
            raise SchemaError("frame channel roster does not match the pipeline roster")
        frame = np.asarray(frame, dtype=float)
        if frame.ndim != 2 or frame.shape[0] != len(self.channels):
            raise SchemaError(f"frame must be {len(self.channels)} x m, got {frame.shape}")
        if not np.all(np.isfinite(frame)):
            raise ValidationError("frame holds non-finite samples")
        W = self.config.window_samples
        out = []
        col = 0
        m = frame.shape[1]
        while col < m:
            take = min(m - col, self._next_end - self._total, W - self._pos)
            self._ring[:, self._pos:self._pos + take] = frame[:, col:col + take]
            self._pos = (self._pos + take) % W
            self._total += take
            col += take
            if self._total == self._next_end:
                out.append(self._classify())
                self._next_end += self.config.hop_samples
        return out

    def _classify(self) -> CommandDecision:
        t0 = time.perf_counter()
        cmd, score = classify_window(self.model, self._window(), self._pre, self.channels,
                                     self.config.sample_rate)
        pred = WindowPrediction(self._window_index, self._total, cmd, score)
        decision = self._debounce.feed(pred)
        self._latencies.append((time.perf_counter() - t0) * 1000.0)
        self.history.append(pred)
        self._window_index += 1
        if not decision.suppressed_by_debounce:
            self._emitted += 1
        return decision

    def stats(self) -> PipelineStats:
        if self._latencies:
            p50, p95 = np.percentile(self._latencies, [50, 95])
        else:
            p50 = p95 = 0.0
        return PipelineStats(self._window_index, self._emitted, float(p50), float(p95))


def pipeline_stats(pipeline: Pipeline) -> PipelineStats:
    return pipeline.stats()


# ---------------------------------------------------------------------------
# Stream mode
# ---------------------------------------------------------------------------

def parse_sample_lines(lines: Iterable[str], n_channels: int = len(CHANNELS),
                       batch: int = 64) -> Iterator[np.ndarray]:
    """Parse ``t,v1,...,v14`` records into ``channels x m`` frames.

    Blank lines and a leading header line starting with ``t,`` are skipped.
    """
    buf: list[list[float]] = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or (lineno == 1 and line.lower().startswith("t,")):
            continue
        parts = line.split(",")
        if len(parts) != n_channels + 1:
            raise SchemaError(f"line {lineno}: expected {n_channels + 1} fields, got {len(parts)}")
        try:
            vals = [float(v) for v in parts[1:]]
        except ValueError:
            raise SchemaError(f"line {lineno}: non-numeric value") from None
        buf.append(vals)
        if len(buf) >= batch:
            yield np.array(buf).T
            buf = []
    if buf:
        yield np.array(buf).T


def run_stream(pipeline: Pipeline, lines: Iterable[str], out: IO[str],
               wire_sink: Optional[IO[bytes]] = None, batch: int = 64) -> int:
    """Feed text records through ``pipeline`` and write one JSON line per
    released decision (and its wire frame, if a sink is given).

    Returns the number of decisions written.
    """
    from .vehicle import encode_command

    seq = 0
    written = 0
    for frame in parse_sample_lines(lines, len(pipeline.channels), batch):
        for d in pipeline.push(frame):
            if d.suppressed_by_debounce:
                continue
            out.write(d.to_json() + "\n")
            out.flush()
            if wire_sink is not None:
                wire_sink.write(encode_command(d.command, seq))
                wire_sink.flush()
                seq = (seq + 1) % 256
            written += 1
    return written


def tcp_lines(port: int, host: str = "127.0.0.1", ready=None) -> Iterator[str]:
    """Accept one TCP client and yield its newline-delimited records."""
    with socket.create_server((host, port)) as srv:
        if ready is not None:
            ready(srv.getsockname()[1])
        conn, _ = srv.accept()
        with conn, conn.makefile("r", encoding="utf-8", newline="\n") as fh:
            yield from fh
