from __future__ import annotations

import io
import math

import pytest
from hypothesis import given, settings, strategies as st

from eegchair.signal_io import COMMANDS, Command
from eegchair.vehicle import (ChecksumError, FramingError, Rect, SafetyConfig, SensorReading,
                              UnknownCommandError, VehicleState, WorldSpec, decode_command,
                              encode_command, normalize_angle, run_episode, safety_gate, sense,
                              step, write_episode_log)

F, B, S, L, R = Command.FORWARD, Command.REVERSE, Command.STOP, Command.LEFT, Command.RIGHT


def test_encode_examples():
    assert encode_command(S, 3) == bytes([0xAA, 0x03, 0x53, 0xAA ^ 0x03 ^ 0x53, 0x55])
    assert encode_command(F, 0) == bytes([0xAA, 0x00, 0x46, 0xAA ^ 0x46, 0x55])
    assert all(len(encode_command(c, s)) == 5 for c in COMMANDS for s in (0, 255))


def test_decode_errors():
    good = bytearray(encode_command(L, 9))
    bad_chk = bytes(good[:3]) + bytes([good[3] ^ 0x01]) + bytes(good[4:])
    with pytest.raises(ChecksumError):
        decode_command(bad_chk)
    with pytest.raises(UnknownCommandError):
        decode_command(bytes([0xAA, 1, 0x58, 0xAA ^ 1 ^ 0x58, 0x55]))
    with pytest.raises(FramingError):
        decode_command(b"\xAA\x00")
    with pytest.raises(FramingError):
        decode_command(bytes([0xAB]) + bytes(good[1:]))


def test_sense_examples():
    empty = WorldSpec(Rect(-10, -10, 10, 10), (), 4.0)
    assert sense(VehicleState(), empty) == SensorReading(4.0, 4.0)
    wall = WorldSpec(Rect(-10, -10, 10, 10), (Rect(1.0, -10, 2.0, 10),), 4.0)
    assert sense(VehicleState(), wall).front_m == pytest.approx(1.0, abs=1e-12)
    diag = sense(VehicleState(heading=math.pi / 4), wall).front_m
    assert diag == pytest.approx(math.sqrt(2), abs=1e-9)


def test_gate_examples():
    cfg = SafetyConfig()
    assert safety_gate(F, SensorReading(0.2, 4.0), cfg) is S
    assert safety_gate(F, SensorReading(1.0, 4.0), cfg) is F
    assert safety_gate(L, SensorReading(0.05, 4.0), cfg) is L
    assert safety_gate(B, SensorReading(4.0, 0.1), cfg) is S


def test_step_examples():
    s0 = VehicleState()
    s = step(s0, S, 0.7)
    assert (s.x, s.y, s.heading, s.clock) == (0.0, 0.0, 0.0, 0.7)
    s = step(s0, F, 1.0)
    assert (s.x, s.y, s.heading) == pytest.approx((0.5, 0.0, 0.0))
    s = step(s0, L, 2.0)
    assert s.heading == pytest.approx(math.pi / 2, abs=1e-9) and (s.x, s.y) == (0.0, 0.0)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(COMMANDS), st.floats(0.001, 2.0), st.floats(-math.pi, math.pi),
       st.floats(-5, 5), st.floats(-5, 5))
def test_half_steps_compose(cmd, dt, h, x, y):
    s0 = VehicleState(x, y, normalize_angle(h))
    full = step(s0, cmd, dt)
    half = step(step(s0, cmd, dt / 2), cmd, dt / 2)
    assert full.x == pytest.approx(half.x, abs=1e-12)
    assert full.y == pytest.approx(half.y, abs=1e-12)
    assert abs(normalize_angle(full.heading - half.heading)) <= 1e-12


@settings(max_examples=200)
@given(st.floats(-100, 100, allow_nan=False))
def test_normalize_angle_range(t):
    a = normalize_angle(t)
    assert -math.pi < a <= math.pi
    assert math.isclose(math.cos(a), math.cos(t), abs_tol=1e-9)


def test_episode_deterministic_and_logged():
    world = WorldSpec(Rect(-2, -2, 2, 2), (), 4.0)
    cmds = [F] * 50 + [L] * 10 + [B] * 30
    a = run_episode(VehicleState(), cmds, world)
    b = run_episode(VehicleState(), cmds, world)
    assert a.final == b.final and a.log == b.log
    buf = io.StringIO()
    write_episode_log(a.log, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "clock,x,y,heading,cmd,front,rear,gated_cmd" and len(lines) == 91


def test_forward_into_wall_stops_short():
    world = WorldSpec(Rect(-1, -1, 1, 1), (), 4.0)
    ep = run_episode(VehicleState(), [F] * 100, world)
    assert ep.log[-1].gated_cmd is S
    assert sense(ep.final, world).front_m >= 0.3


def test_obstacle_must_be_inside_bounds():
    with pytest.raises(Exception):
        WorldSpec(Rect(0, 0, 1, 1), (Rect(0.5, 0.5, 2, 2),))
