from __future__ import annotations

import numpy as np
import pytest

from eegchair.signal_io import SynthSpec, generate_synthetic_session
from eegchair.workflow import train_from_session


@pytest.fixture(scope="session")
def small_session():
    return generate_synthetic_session(SynthSpec(trials_per_command=6, seed=3))


@pytest.fixture(scope="session")
def small_model(small_session):
    return train_from_session(small_session, "svm", seed=3).model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
