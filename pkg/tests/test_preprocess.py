from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import signal as sps

from eegchair.errors import ValidationError
from eegchair.preprocess import (NotchSpec, PreprocessConfig, artifact_check, clean_epoch,
                                 notch_filter, remove_dc)
from eegchair.signal_io import EegEpoch

FS = 128.0
T = np.arange(1024) / FS


def _sine_epoch(freq):
    return EegEpoch(np.tile(np.sin(2 * np.pi * freq * T), (14, 1)), FS)


def _steady_db(freq, center):
    out = notch_filter(_sine_epoch(freq), NotchSpec(center, 30.0, FS)).samples[0]
    ref = np.sin(2 * np.pi * freq * T)
    tail = slice(512, None)  # last 4 s of 8
    return 20 * np.log10(np.sqrt(np.mean(ref[tail] ** 2)) / np.sqrt(np.mean(out[tail] ** 2)))


def test_coefficients_match_scipy_design():
    for f0 in (50.0, 60.0):
        b, a = NotchSpec(f0, 30.0, FS).coefficients()
        b_ref, a_ref = sps.iirnotch(f0, 30.0, FS)
        assert np.allclose(b, b_ref, atol=1e-14) and np.allclose(a, a_ref, atol=1e-14)


@pytest.mark.parametrize("f0", [50.0, 60.0])
def test_notch_attenuates_center(f0):
    assert _steady_db(f0, f0) >= 30.0


@pytest.mark.parametrize("f0", [50.0, 60.0])
def test_notch_passes_alpha(f0):
    assert _steady_db(10.0, f0) <= 1.0


def test_unit_gain_at_dc_and_nyquist():
    b, a = NotchSpec(50.0).coefficients()
    assert abs(b.sum() / a.sum() - 1) < 1e-12
    alt = np.array([1, -1, 1])
    assert abs((b @ alt) / (a @ alt) - 1) < 1e-12


def test_zero_in_zero_out():
    z = EegEpoch(np.zeros((14, 1024)))
    assert not notch_filter(z, NotchSpec()).samples.any()


def test_notch_linear(rng):
    x, y = rng.normal(size=(14, 512)), rng.normal(size=(14, 512))
    spec = NotchSpec(60.0)
    f = lambda s: notch_filter(EegEpoch(s), spec).samples
    lhs = f(2.5 * x - 0.7 * y)
    rhs = 2.5 * f(x) - 0.7 * f(y)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * np.max(np.abs(rhs))


def test_notch_bibo_on_long_noise():
    x = np.random.default_rng(1).uniform(-1, 1, (1, 10**6))
    y = notch_filter(EegEpoch(x), NotchSpec(50.0)).samples
    assert np.max(np.abs(y)) <= 10


def test_notch_rejects_bad_center_and_rate():
    with pytest.raises(ValidationError):
        NotchSpec(70.0, 30.0, 128.0)
    with pytest.raises(ValidationError):
        notch_filter(EegEpoch(np.zeros((1, 8)), 256.0), NotchSpec(50.0))


def test_remove_dc_cases(rng):
    const = EegEpoch(np.full((14, 100), 5.0))
    assert np.array_equal(remove_dc(const).samples, np.zeros((14, 100)))
    z = EegEpoch(np.zeros((14, 10)))
    assert np.array_equal(remove_dc(z).samples, z.samples)
    r = remove_dc(EegEpoch(rng.normal(40, 10, (14, 1024))))
    assert np.max(np.abs(r.samples.mean(axis=1))) <= 1e-9


@settings(max_examples=30, deadline=None)
@given(st.floats(-1e4, 1e4), st.integers(0, 2**31 - 1))
def test_remove_dc_idempotent(offset, seed):
    ep = EegEpoch(np.random.default_rng(seed).normal(offset, 5, (3, 64)))
    once = remove_dc(ep)
    assert np.max(np.abs(remove_dc(once).samples - once.samples)) <= 1e-12 * max(1, abs(offset))


def test_artifact_thresholds():
    x = np.zeros((14, 64))
    x[4, 10] = 500.0
    v = artifact_check(EegEpoch(x))
    assert not v.accepted and v.peak_abs_uv == 500.0 and v.offending_channel == "T7"
    ok = np.random.default_rng(0).uniform(-50, 50, (14, 64))
    assert artifact_check(EegEpoch(ok)).accepted
    edge = np.zeros((14, 64))
    edge[0, 0] = -100.0
    assert artifact_check(EegEpoch(edge), 100.0).accepted


def test_artifact_check_does_not_mutate(rng):
    ep = EegEpoch(rng.normal(0, 80, (14, 64)))
    before = ep.samples.copy()
    artifact_check(ep)
    assert np.array_equal(ep.samples, before)


def test_clean_epoch_chain_order(rng):
    ep = EegEpoch(rng.normal(20, 5, (14, 1024)))
    out, verdict = clean_epoch(ep)
    manual = remove_dc(ep)
    for f0 in (50.0, 60.0):
        manual = notch_filter(manual, NotchSpec(f0))
    assert np.array_equal(out.samples, manual.samples) and verdict.accepted


def test_clean_epoch_stages_toggle(rng):
    ep = EegEpoch(rng.normal(20, 5, (14, 256)))
    out, _ = clean_epoch(ep, PreprocessConfig(dc_removal=False, notch_hz=()))
    assert np.array_equal(out.samples, ep.samples)
