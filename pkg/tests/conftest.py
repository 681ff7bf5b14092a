import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import acceptance_log  # noqa: E402
from rgrefine.model import ConfidenceMap, RgbImage  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def uniform_image(h, w, rgb=(120, 80, 200)):
    return RgbImage(np.broadcast_to(np.array(rgb, dtype=np.uint8), (h, w, 3)))


def const_map(h, w, value):
    return ConfidenceMap(np.full((h, w), float(value)))
