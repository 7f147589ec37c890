import time

import numpy as np
import pytest

from splinedyn import pipeline
from splinedyn.config import PipelineConfig

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def record_criterion(request):
    """Log one ``[PASS]``/``[FAIL]`` line per acceptance criterion."""
    lines = request.config.stash[_LINES]

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def default_cfg():
    return PipelineConfig()


@pytest.fixture(scope="session")
def experiment(default_cfg):
    """Default chirp training and step validation traces (untrimmed)."""
    return pipeline.generate(default_cfg)


@pytest.fixture(scope="session")
def default_fit(default_cfg, experiment):
    t0 = time.perf_counter()
    result = pipeline.fit(default_cfg, experiment[0])
    return result, time.perf_counter() - t0
