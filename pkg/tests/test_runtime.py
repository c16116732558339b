from __future__ import annotations

import io
import socket
import threading

import numpy as np
import pytest

from eegchair.errors import SchemaError
from eegchair.runtime import (CommandDecision, Debouncer, Pipeline, PipelineConfig,
                              WindowPrediction, parse_sample_lines, pipeline_stats, run_stream,
                              tcp_lines, window_predictions)
from eegchair.signal_io import Command, replay_frames
from eegchair.vehicle import decode_command

F, S = Command.FORWARD, Command.STOP


def _preds(cmds):
    return [WindowPrediction(i, 1024 + 512 * i, c, 0.9) for i, c in enumerate(cmds)]


def test_debounce_forward_needs_two():
    d = Debouncer(2, True)
    out = [d.feed(p) for p in _preds([F, F])]
    assert [o.suppressed_by_debounce for o in out] == [True, False]


def test_stop_is_immediate():
    d = Debouncer(2, True)
    out = [d.feed(p) for p in _preds([F, S])]
    assert out[1].command is S and not out[1].suppressed_by_debounce
    d2 = Debouncer(2, False)
    assert [d2.feed(p).suppressed_by_debounce for p in _preds([F, S])] == [True, True]


def test_rejected_window_emits_stop_and_breaks_streak():
    d = Debouncer(2)
    outs = [d.feed(p) for p in _preds([F, None, F])]
    assert outs[1].command is S and outs[1].score == 0.0
    assert outs[2].suppressed_by_debounce


def test_no_movement_without_streak():
    rng = np.random.default_rng(0)
    cmds = [list(Command)[i] for i in rng.integers(0, 5, 300)]
    d = Debouncer(3)
    out = [d.feed(p) for p in _preds(cmds)]
    for i, o in enumerate(out):
        if o.command is not S and not o.suppressed_by_debounce:
            assert cmds[i - 2] == cmds[i - 1] == cmds[i]


def test_fresh_pipeline_and_hop_arithmetic(small_model, small_session):
    p = Pipeline(small_model)
    st = pipeline_stats(p)
    assert (st.windows_processed, st.decisions_emitted, st.latency_p50_ms) == (0, 0, 0.0)
    stream = small_session.stream()
    assert p.push(stream[:, :1023]) == []
    out = p.push(stream[:, 1023:2048])
    assert [d.t_end for d in out] == [1024, 1536, 2048]
    st = p.stats()
    assert st.windows_processed == 3 and st.latency_p50_ms <= st.latency_p95_ms


def test_reset_replays_identically(small_model, small_session):
    p = Pipeline(small_model)
    stream = small_session.stream()[:, :6000]
    first = p.push(stream)
    p.reset()
    assert pipeline_stats(p).windows_processed == 0
    assert [d.to_json() for d in p.push(stream)] == [d.to_json() for d in first]


def test_two_pipelines_agree_and_match_offline(small_model, small_session):
    stream = small_session.stream()[:, :8192]
    a, b = Pipeline(small_model), Pipeline(small_model)
    da = [d for f in replay_frames(small_session.with_trials(small_session.trials[:8]), 100)
          for d in a.push(f)]
    db = b.push(stream)
    assert [d.to_json() for d in da] == [d.to_json() for d in db]
    offline = window_predictions(small_model, stream)
    assert [(w.command, w.score) for w in offline] == [(w.command, w.score) for w in a.history]


def test_push_validates_frames(small_model):
    p = Pipeline(small_model)
    with pytest.raises(SchemaError):
        p.push(np.zeros((13, 4)))
    with pytest.raises(SchemaError):
        p.push(np.zeros((14, 4)), channels=tuple(reversed(p.channels)))


def test_decision_json_shape():
    d = CommandDecision(F, 0.75, 3, 2560)
    assert d.to_json() == '{"win": 3, "cmd": "FORWARD", "score": 0.75, "t_end": 2560}'


def _lines(stream):
    yield "t," + ",".join(f"c{i}" for i in range(14)) + "\n"
    for t, row in enumerate(stream.T.tolist()):
        yield f"{t}," + ",".join(map(repr, row)) + "\n"


def test_parse_sample_lines(small_session):
    stream = small_session.stream()[:, :200]
    frames = list(parse_sample_lines(_lines(stream), batch=64))
    assert [f.shape[1] for f in frames] == [64, 64, 64, 8]
    assert np.array_equal(np.concatenate(frames, axis=1), stream)
    with pytest.raises(SchemaError):
        list(parse_sample_lines(["0,1,2\n"]))


def test_run_stream_outputs_json_and_wire(small_model, small_session):
    stream = small_session.stream()[:, :8192]
    out, wire = io.StringIO(), io.BytesIO()
    n = run_stream(Pipeline(small_model), _lines(stream), out, wire)
    lines = out.getvalue().splitlines()
    assert n == len(lines) and n > 0
    raw = wire.getvalue()
    assert len(raw) == 5 * n
    for k in range(n):
        assert decode_command(raw[5 * k:5 * k + 5])[1] == k % 256


def test_tcp_listener_yields_lines():
    port_box = []
    ready = threading.Event()

    def on_ready(port):
        port_box.append(port)
        ready.set()

    got = []
    th = threading.Thread(target=lambda: got.extend(tcp_lines(0, ready=on_ready)))
    th.start()
    assert ready.wait(5)
    with socket.create_connection(("127.0.0.1", port_box[0])) as s:
        s.sendall(b"a\nb\n")
    th.join(5)
    assert got == ["a\n", "b\n"]


def test_config_validation():
    with pytest.raises(Exception):
        PipelineConfig(window_samples=256, hop_samples=512)
