"""Command wire protocol, ultrasonic safety gate and a pivot-turn
differential-drive simulator standing in for the motor controller.

Wire frame (5 bytes)::

    0xAA | seq | cmd | 0xAA ^ seq ^ cmd | 0x55

with ``cmd`` one of the ASCII codes L, R, F, B, S.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

from .errors import EegChairError, ValidationError
from .signal_io import Command

SYNC = 0xAA
TRAILER = 0x55
FRAME_LEN = 5

CMD_CODES = {
    Command.LEFT: ord("L"),
    Command.RIGHT: ord("R"),
    Command.FORWARD: ord("F"),
    Command.REVERSE: ord("B"),
    Command.STOP: ord("S"),
}
CODE_CMDS = {v: k for k, v in CMD_CODES.items()}


class FrameError(EegChairError, ValueError):
    """Base for wire-frame decoding failures."""


class FramingError(FrameError):
    """Bad sync or trailer byte, or a short frame."""


class ChecksumError(FrameError):
    pass


class UnknownCommandError(FrameError):
    pass


def checksum(seq: int, code: int) -> int:
    return SYNC ^ seq ^ code


def encode_command(cmd: Command, seq: int) -> bytes:
    if not 0 <= seq <= 255:
        raise ValidationError("seq must fit in one byte")
    code = CMD_CODES[cmd]
    return bytes((SYNC, seq, code, checksum(seq, code), TRAILER))


def decode_command(data: bytes) -> tuple[Command, int]:
    """Validate and decode the first five bytes of ``data``.

    Checks run in order: framing, checksum, command alphabet.
    """
    if len(data) < FRAME_LEN:
        raise FramingError(f"need {FRAME_LEN} bytes, got {len(data)}")
    sync, seq, code, chk, trailer = data[:FRAME_LEN]
    if sync != SYNC or trailer != TRAILER:
        raise FramingError(f"bad sync/trailer 0x{sync:02X}/0x{trailer:02X}")
    if chk != checksum(seq, code):
        raise ChecksumError(f"checksum 0x{chk:02X} != 0x{checksum(seq, code):02X}")
    try:
        return CODE_CMDS[code], seq
    except KeyError:
        raise UnknownCommandError(f"unknown command byte 0x{code:02X}") from None


# ---------------------------------------------------------------------------
# World and sensing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Rect:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def contains(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    def inside(self, other: "Rect") -> bool:
        return (other.xmin <= self.xmin and self.xmax <= other.xmax
                and other.ymin <= self.ymin and self.ymax <= other.ymax)


@dataclass(frozen=True)
class WorldSpec:
    bounds: Rect = Rect(-10.0, -10.0, 10.0, 10.0)
    obstacles: tuple[Rect, ...] = ()
    sensor_range: float = 4.0

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        for ob in self.obstacles:
            if not ob.inside(self.bounds):
                raise ValidationError(f"obstacle {ob} lies outside the world bounds")
        if not self.sensor_range > 0:
            raise ValidationError("sensor_range must be positive")


@dataclass(frozen=True)
class SafetyConfig:
    stop_distance_m: float = 0.3
    forward_speed: float = 0.5      # m/s
    reverse_speed: float = 0.3      # m/s
    turn_rate_deg: float = 45.0     # deg/s

    def __post_init__(self):
        if not self.stop_distance_m > 0:
            raise ValidationError("stop_distance_m must be positive")
        if not (self.forward_speed > 0 and self.reverse_speed > 0 and self.turn_rate_deg > 0):
            raise ValidationError("speeds must be positive")

    @property
    def turn_rate(self) -> float:
        return math.radians(self.turn_rate_deg)


def normalize_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    t = math.remainder(theta, 2 * math.pi)  # [-pi, pi]
    return math.pi if t == -math.pi else t


@dataclass(frozen=True)
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0
    active_command: Command = Command.STOP
    clock: float = 0.0


@dataclass(frozen=True)
class SensorReading:
    front_m: float
    rear_m: float


def _ray_exit(x, y, dx, dy, box: Rect) -> float:
    """Distance along the ray to the boundary of ``box`` from inside it."""
    t = math.inf
    if dx > 0:
        t = min(t, (box.xmax - x) / dx)
    elif dx < 0:
        t = min(t, (box.xmin - x) / dx)
    if dy > 0:
        t = min(t, (box.ymax - y) / dy)
    elif dy < 0:
        t = min(t, (box.ymin - y) / dy)
    return max(t, 0.0)


def _ray_hit(x, y, dx, dy, box: Rect) -> float:
    """Slab test: distance to the first point of ``box`` on the ray, or inf."""
    if box.contains(x, y):
        return 0.0
    t_lo, t_hi = 0.0, math.inf
    for p, d, lo, hi in ((x, dx, box.xmin, box.xmax), (y, dy, box.ymin, box.ymax)):
        if d == 0.0:
            if not lo <= p <= hi:
                return math.inf
            continue
        a, b = (lo - p) / d, (hi - p) / d
        if a > b:
            a, b = b, a
        t_lo, t_hi = max(t_lo, a), min(t_hi, b)
        if t_lo > t_hi:
            return math.inf
    return t_lo


def ray_distance(x: float, y: float, angle: float, world: WorldSpec) -> float:
    dx, dy = math.cos(angle), math.sin(angle)
    # drop floating residue so axis-aligned rays stay axis-aligned
    if abs(dx) < 1e-15:
        dx = 0.0
    if abs(dy) < 1e-15:
        dy = 0.0
    dist = _ray_exit(x, y, dx, dy, world.bounds)
    for ob in world.obstacles:
        dist = min(dist, _ray_hit(x, y, dx, dy, ob))
    return min(dist, world.sensor_range)


def sense(state: VehicleState, world: WorldSpec) -> SensorReading:
    """Front and rear ultrasonic ranges, clamped to the sensor range."""
    if not world.bounds.contains(state.x, state.y):
        raise ValidationError(f"vehicle at ({state.x}, {state.y}) is outside the world bounds")
    return SensorReading(ray_distance(state.x, state.y, state.heading, world),
                         ray_distance(state.x, state.y, state.heading + math.pi, world))


def safety_gate(cmd: Command, sensors: SensorReading, cfg: SafetyConfig = SafetyConfig(),
                lookahead_m: float = 0.0) -> Command:
    """Replace Forward/Reverse by Stop when the matching range is too short.

    ``lookahead_m`` adds the distance the next step would travel, so a
    command is also refused if executing it would end inside the stop zone.
    Turns and Stop pass through unchanged.
    """
    if sensors.front_m < 0 or sensors.rear_m < 0:
        raise ValidationError("sensor distances must be non-negative")
    if cmd == Command.FORWARD and sensors.front_m - lookahead_m < cfg.stop_distance_m:
        return Command.STOP
    if cmd == Command.REVERSE and sensors.rear_m - lookahead_m < cfg.stop_distance_m:
        return Command.STOP
    return cmd


def step(state: VehicleState, cmd: Command, dt: float, cfg: SafetyConfig = SafetyConfig()) -> VehicleState:
    """Advance one explicit Euler step; turns pivot in place (Left is CCW)."""
    if not dt > 0:
        raise ValidationError("dt must be positive")
    x, y, h = state.x, state.y, state.heading
    if cmd == Command.FORWARD:
        x += cfg.forward_speed * dt * math.cos(h)
        y += cfg.forward_speed * dt * math.sin(h)
    elif cmd == Command.REVERSE:
        x -= cfg.reverse_speed * dt * math.cos(h)
        y -= cfg.reverse_speed * dt * math.sin(h)
    elif cmd == Command.LEFT:
        h = normalize_angle(h + cfg.turn_rate * dt)
    elif cmd == Command.RIGHT:
        h = normalize_angle(h - cfg.turn_rate * dt)
    return VehicleState(x, y, h, cmd, state.clock + dt)


def step_distance(cmd: Command, dt: float, cfg: SafetyConfig) -> float:
    if cmd == Command.FORWARD:
        return cfg.forward_speed * dt
    if cmd == Command.REVERSE:
        return cfg.reverse_speed * dt
    return 0.0


# ---------------------------------------------------------------------------
# Episodes
# ---------------------------------------------------------------------------

LOG_HEADER = ("clock", "x", "y", "heading", "cmd", "front", "rear", "gated_cmd")


@dataclass(frozen=True)
class LogRow:
    clock: float
    x: float
    y: float
    heading: float
    cmd: Command
    front: float
    rear: float
    gated_cmd: Command

    def as_list(self) -> list:
        return [repr(self.clock), repr(self.x), repr(self.y), repr(self.heading),
                self.cmd.value, repr(self.front), repr(self.rear), self.gated_cmd.value]


@dataclass
class Episode:
    final: VehicleState
    log: list[LogRow] = field(default_factory=list)


def run_episode(state: VehicleState, commands: Iterable[Command], world: WorldSpec,
                cfg: SafetyConfig = SafetyConfig(), dt: float = 0.1) -> Episode:
    """Apply one requested command per step through sense -> gate -> step.

    Each log row holds the pre-step pose and sensor readings together with
    the requested and executed command.
    """
    log = []
    for cmd in commands:
        s = sense(state, world)
        gated = safety_gate(cmd, s, cfg, step_distance(cmd, dt, cfg))
        nxt = step(state, gated, dt, cfg)
        if gated in (Command.FORWARD, Command.REVERSE) and not _clear_after(nxt, gated, world, cfg):
            # rounding in the pose update can land a hair inside the stop zone
            gated = Command.STOP
            nxt = step(state, gated, dt, cfg)
        log.append(LogRow(state.clock, state.x, state.y, state.heading, cmd,
                          s.front_m, s.rear_m, gated))
        state = nxt
    return Episode(state, log)


def _clear_after(state: VehicleState, cmd: Command, world: WorldSpec, cfg: SafetyConfig) -> bool:
    if not world.bounds.contains(state.x, state.y):
        return False
    s = sense(state, world)
    dist = s.front_m if cmd == Command.FORWARD else s.rear_m
    return dist >= cfg.stop_distance_m


def write_episode_log(rows: Sequence[LogRow], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(LOG_HEADER)
    for r in rows:
        w.writerow(r.as_list())
