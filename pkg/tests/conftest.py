import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from beamzoom import SystemConfig, build_frequency_grid  # noqa: E402

_VERDICTS = []


@pytest.fixture
def ref_cfg():
    return SystemConfig(N=256, M=128, K=4, K_d=16, f_c=100e9, B=10e9, Q=10)


@pytest.fixture
def ref_grid(ref_cfg):
    return build_frequency_grid(ref_cfg)


@pytest.fixture
def verdict():
    """Record one acceptance line, then assert it."""

    def record(number, ok, detail):
        _VERDICTS.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
