"""Acceptance gates, one test per criterion.

Each test prints a ``PASS``/``FAIL`` line; the lines are repeated in the
pytest terminal summary.  Run directly with ``python3 tests/test_acceptance.py``
or through pytest.
"""

from __future__ import annotations

import csv
import io
import math
import re
import sys
import time
from contextlib import redirect_stdout

import numpy as np
import pytest

from eegchair.classify import SvmParams, predict, predict_batch, train_knn, train_svm
from eegchair.classify.mlp import init_layers, loss_and_grads
from eegchair.classify.svm import dual_objective, kernel_matrix, smo_solve
from eegchair.cli import main as cli_main
from eegchair.preprocess import NotchSpec, PreprocessConfig, notch_filter
from eegchair.runtime import Pipeline, window_predictions
from eegchair.signal_io import (CHANNELS, COMMANDS, Command, EegEpoch, SessionDataset, SynthSpec,
                                generate_synthetic_session, replay_frames)
from eegchair.spectral import select_channels, welch_psd
from eegchair.vehicle import (FrameError, Rect, SafetyConfig, VehicleState, WorldSpec,
                              decode_command, encode_command, run_episode, sense)
from eegchair.wavelet import dwt_decompose, idwt_reconstruct
from eegchair.workflow import train_from_session

from oracles import central_difference, knn_scan, qp_active_set_oracle

RESULTS: list[str] = []
FS = 128.0


def gate(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title} ({detail})"
    RESULTS.append(line)
    print(line)
    assert ok, line


def run_cli(*argv) -> tuple[int, str]:
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli_main([str(a) for a in argv])
    return code, buf.getvalue()


@pytest.fixture(scope="module")
def full_session():
    return generate_synthetic_session(SynthSpec(seed=0))


@pytest.fixture(scope="module")
def full_model(full_session):
    return train_from_session(full_session, "svm", seed=0).model


# -- 1-3: wavelet ------------------------------------------------------------

def test_01_dwt_round_trip():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        x = rng.normal(size=1024)
        y = idwt_reconstruct(dwt_decompose(x))
        worst = max(worst, np.linalg.norm(y - x) / np.linalg.norm(x))
    elapsed = time.perf_counter() - t0
    gate(1, "DWT round-trip", worst <= 1e-10 and elapsed < 5.0,
         f"max rel err {worst:.2e}, {elapsed:.2f} s")


def test_02_dwt_energy():
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(100):
        x = rng.normal(size=1024)
        e = x @ x
        worst = max(worst, abs(dwt_decompose(x).energy() - e) / e)
    gate(2, "DWT energy conservation", worst <= 1e-10, f"max rel err {worst:.2e}")


def test_03_subband_localization():
    t = np.arange(1024) / FS
    targets = {3.0: (4, 5), 6.0: (3,), 12.0: (2,), 24.0: (1,), 40.0: (0,)}
    shares = {}
    for f, idx in targets.items():
        series = dwt_decompose(np.sin(2 * np.pi * f * t)).series()
        energy = [s @ s for s in series]
        shares[f] = sum(energy[i] for i in idx) / sum(energy)
    ok = all(v >= 0.70 for v in shares.values())
    gate(3, "subband localization", ok,
         ", ".join(f"{f:g} Hz {100 * v:.1f}%" for f, v in shares.items()))


# -- 4-6: preprocessing and spectra -------------------------------------------

def _atten_db(freq, specs):
    t = np.arange(1024) / FS
    x = np.sin(2 * np.pi * freq * t)
    ep = EegEpoch(x[None, :], FS)
    for s in specs:
        ep = notch_filter(ep, s)
    tail = slice(512, None)
    return 20 * math.log10(np.sqrt(np.mean(x[tail] ** 2)) / np.sqrt(np.mean(ep.samples[0, tail] ** 2)))


def test_04_notch():
    chain = PreprocessConfig().notch_specs(FS)
    a50 = _atten_db(50.0, [NotchSpec(50.0)])
    a60 = _atten_db(60.0, [NotchSpec(60.0)])
    a10 = max(_atten_db(10.0, [NotchSpec(50.0)]), _atten_db(10.0, [NotchSpec(60.0)]),
              _atten_db(10.0, chain))
    gate(4, "notch attenuation", a50 >= 30 and a60 >= 30 and a10 <= 1.0,
         f"50 Hz {a50:.1f} dB, 60 Hz {a60:.1f} dB, 10 Hz {a10:.3f} dB")


def test_05_psd_parseval():
    x = np.sin(2 * np.pi * 10 * np.arange(1024) / FS)
    sine_err = abs(welch_psd(x, FS).total_power() - 0.5) / 0.5
    w = np.random.default_rng(5).normal(size=100_000)
    noise_err = abs(welch_psd(w, FS).total_power() - np.var(w)) / np.var(w)
    gate(5, "PSD Parseval", sine_err <= 0.01 and noise_err <= 0.02,
         f"sine {100 * sine_err:.3f}%, white noise {100 * noise_err:.3f}%")


def test_06_channel_selection():
    planted = {"O1", "O2", "P7", "P8", "T7"}
    rows = [CHANNELS.index(c) for c in planted]
    t = np.arange(1024) / FS
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        trials = []
        for i in range(4):
            x = rng.normal(0, 1, (14, 1024))
            freq = rng.uniform(2, 40)
            # 10x amplitude relative to the common unit-variance noise
            x[rows] += 10 * np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi, (5, 1)))
            trials.append(EegEpoch(x, FS, None, i))
        ranking = select_channels(SessionDataset(CHANNELS, tuple(trials)), 5)
        hits += set(ranking.selected) == planted
    gate(6, "planted channel recovery", hits == 100, f"{hits}/100 seeds")


# -- 7-9: classifiers -----------------------------------------------------------

def test_07_svm():
    L, R = Command.LEFT, Command.RIGHT
    notes, ok = [], True
    fixtures = {
        "separable": (np.array([[0, 0], [0, 1], [3, 0], [3, 1]], float),
                      SvmParams(kernel="linear", C=1.0, tol=1e-6)),
        "xor": (np.array([[0, 0], [1, 1], [0, 1], [1, 0]], float),
                SvmParams(kernel="rbf", C=1.0, gamma=1.0, tol=1e-6)),
    }
    for name, (X, params) in fixtures.items():
        model = train_svm(X, [L, L, R, R], params, standardize=False)
        acc = np.mean([predict(model, x)[0] == t for x, t in zip(X, [L, L, R, R])])
        m = model.params["machines"][0]
        a = np.asarray(m["alpha"])
        feasible = bool(np.all(a >= 0) and np.all(a <= params.C)
                        and abs(np.sum(m["coef"])) <= 1e-3)
        ok &= acc == 1.0 and feasible
        notes.append(f"{name} acc {acc:.0%} feasible={feasible}")
        if name == "separable":
            w = np.asarray(m["coef"]) @ np.asarray(m["support"])
            cross = -m["b"] / w[0]
            ok &= abs(cross - 1.5) <= 1e-3
            notes.append(f"boundary x={cross:.4f}")
    rng = np.random.default_rng(7)
    X = np.vstack([rng.normal(0, 1, (5, 2)), rng.normal(1.2, 1, (5, 2))])
    y = np.array([1.0] * 5 + [-1.0] * 5)
    K = kernel_matrix(X, X, "rbf", 0.5)
    res = smo_solve(K, y, 1.0, tol=1e-9)
    oracle, _ = qp_active_set_oracle(K, y, 1.0)
    gap = abs(dual_objective(res.alpha, y, K) - oracle)
    feas10 = bool(np.all(res.alpha >= 0) and np.all(res.alpha <= 1.0) and abs(res.alpha @ y) <= 1e-3)
    ok &= gap <= 1e-6 and feas10
    notes.append(f"10-point dual gap {gap:.1e}")
    gate(7, "SVM correctness", ok, "; ".join(notes))


def test_08_mlp_gradient():
    rng = np.random.default_rng(8)
    layers = init_layers([5, 4, 3], rng)
    for layer in layers:
        layer["b"] = rng.normal(size=layer["b"].shape)
    X = rng.normal(size=(8, 5))
    Y = np.eye(3)[rng.integers(0, 3, 8)]
    _, grads = loss_and_grads(layers, X, Y)
    params = [layer[k] for layer in layers for k in ("W", "b")]
    analytic = [g[k] for g in grads for k in ("W", "b")]
    numeric = central_difference(lambda: loss_and_grads(layers, X, Y)[0], params, h=1e-5)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    gate(8, "MLP gradient check", worst <= 1e-5, f"max rel err {worst:.2e}")


def test_09_knn_oracle():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(200, 10))
    codes = rng.integers(0, 5, 200)
    y = [COMMANDS[c] for c in codes]
    Q = rng.normal(size=(1000, 10))
    model = train_knn(X, y, k=5, standardize=False)
    pred, _ = predict_batch(model, Q)
    agree = sum(p is COMMANDS[knn_scan(X, codes, q, 5, 5)] for p, q in zip(pred, Q))
    gate(9, "KNN oracle equivalence", agree == 1000, f"{agree}/1000 queries")


# -- 10-12: pipeline --------------------------------------------------------------

def test_10_end_to_end(tmp_path):
    t0 = time.perf_counter()
    session_csv = tmp_path / "session.csv"
    code1, _ = run_cli("synth", "--seed", 0, "--out", session_csv)
    code2, text = run_cli("compare", "--seed", 0, "--session", session_csv,
                          "--report", tmp_path / "compare")
    elapsed = time.perf_counter() - t0
    rows = list(csv.DictReader((tmp_path / "compare.csv").open()))
    acc = {r["classifier"]: float(r["accuracy"]) for r in rows}
    n_lines = sum(1 for ln in session_csv.open()) - 1
    ok = (code1 == code2 == 0 and n_lines == 250 * 1024 and acc["svm"] >= 0.90
          and all(v >= 0.80 for v in acc.values()) and elapsed < 60
          and "Accuracy of different classifiers" in text and "Paper baseline" in text)
    gate(10, "end-to-end synthetic replication", ok,
         ", ".join(f"{k} {v:.0%}" for k, v in acc.items()) + f", {elapsed:.1f} s")


def test_11_streaming_parity(full_session, full_model):
    stream = full_session.stream()
    offline = [(w.window_index, w.t_end, w.command, w.score)
               for w in window_predictions(full_model, stream)]
    decisions = {}
    ok = True
    for chunk in (1, 128, 1024):
        pipe = Pipeline(full_model)
        out = [d for frame in replay_frames(full_session, chunk) for d in pipe.push(frame)]
        online = [(w.window_index, w.t_end, w.command, w.score) for w in pipe.history]
        ok &= online == offline
        decisions[chunk] = [d.to_json() + str(d.suppressed_by_debounce) for d in out]
    ok &= decisions[1] == decisions[128] == decisions[1024]
    gate(11, "streaming parity and chunk invariance", ok,
         f"{len(offline)} windows, chunks 1/128/1024")


def test_12_latency(full_model, tmp_path):
    from eegchair.classify import save_model
    save_model(full_model, tmp_path / "m.json")
    code, out = run_cli("bench", "--model", tmp_path / "m.json")
    m = re.search(r"p50=([\d.]+) p95=([\d.]+)", out)
    p50, p95 = float(m.group(1)), float(m.group(2))
    gate(12, "pipeline latency", code == 0 and p50 <= 100 and p95 <= 250,
         f"p50 {p50:.2f} ms, p95 {p95:.2f} ms")


# -- 13-15: vehicle, protocol, determinism -----------------------------------------

def _random_world(rng):
    half = rng.uniform(1.5, 6.0)
    bounds = Rect(-half, -half, half, half)
    obstacles = []
    for _ in range(rng.integers(0, 5)):
        w, h = rng.uniform(0.1, 1.5, 2)
        x0 = rng.uniform(-half, half - w)
        y0 = rng.uniform(-half, half - h)
        obstacles.append(Rect(x0, y0, x0 + w, y0 + h))
    return WorldSpec(bounds, tuple(obstacles), rng.uniform(1.0, 5.0))


def _free_start(rng, world):
    b = world.bounds
    while True:
        x, y = rng.uniform(b.xmin, b.xmax), rng.uniform(b.ymin, b.ymax)
        if not any(o.contains(x, y) for o in world.obstacles):
            return VehicleState(x, y, rng.uniform(-math.pi, math.pi))


def test_13_safety():
    rng = np.random.default_rng(13)
    cfg = SafetyConfig()
    weights = np.array([0.1, 0.1, 0.45, 0.3, 0.05])  # L, R, F, B, S
    violations, motion_steps, episodes = 0, 0, 10_000
    for _ in range(episodes):
        world = _random_world(rng)
        start = _free_start(rng, world)
        cmds = [COMMANDS[i] for i in rng.choice(5, size=40, p=weights)]
        dt = float(rng.uniform(0.05, 0.5))
        ep = run_episode(start, cmds, world, cfg, dt)
        after = [(r.front, r.rear) for r in ep.log[1:]]
        end = sense(ep.final, world)
        after.append((end.front_m, end.rear_m))
        for row, (front_after, rear_after) in zip(ep.log, after):
            if row.gated_cmd is Command.FORWARD:
                motion_steps += 1
                violations += row.front < cfg.stop_distance_m or front_after < cfg.stop_distance_m
            elif row.gated_cmd is Command.REVERSE:
                motion_steps += 1
                violations += row.rear < cfg.stop_distance_m or rear_after < cfg.stop_distance_m
    gate(13, "safety gate", violations == 0,
         f"{episodes} episodes, {motion_steps} motion steps, {violations} violations")


def test_14_wire_protocol():
    seen = set()
    roundtrip = 0
    for cmd in COMMANDS:
        for seq in range(256):
            frame = encode_command(cmd, seq)
            seen.add(frame)
            roundtrip += decode_command(frame) == (cmd, seq)
    detected = 0
    total = 0
    for cmd in COMMANDS:
        for seq in range(256):
            frame = bytearray(encode_command(cmd, seq))
            for bit in range(8):
                bad = bytearray(frame)
                bad[2] ^= 1 << bit
                total += 1
                try:
                    decode_command(bytes(bad))
                except FrameError:
                    detected += 1
    ok = roundtrip == 1280 and len(seen) == 1280 and detected == total
    gate(14, "wire protocol", ok,
         f"{roundtrip}/1280 round trips, {len(seen)} distinct frames, {detected}/{total} flips caught")


def test_15_determinism(tmp_path):
    digests = []
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        codes = [
            run_cli("synth", "--seed", 7, "--out", d / "s.csv")[0],
            run_cli("train", "--seed", 7, "--classifier", "svm", "--session", d / "s.csv",
                    "--model", d / "m.json", "--report", d / "train")[0],
            run_cli("eval", "--model", d / "m.json", "--session", d / "s.csv",
                    "--report", d / "eval")[0],
        ]
        files = sorted(p.name for p in d.iterdir())
        digests.append((codes, files, [(d / f).read_bytes() for f in files]))
    (ca, fa, ba), (cb, fb, bb) = digests
    ok = ca == cb == [0, 0, 0] and fa == fb and ba == bb
    gate(15, "determinism", ok, f"{len(fa)} artifacts compared byte for byte")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
