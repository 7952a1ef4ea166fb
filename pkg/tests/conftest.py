import sys
import warnings
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from premsynth.privacy import NoiseScaleClamped

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_clamp():
    # near-noiseless configurations clamp the monitor noise on purpose
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NoiseScaleClamped)
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
