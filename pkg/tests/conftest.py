from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rcmlab.environment import ConductanceLaw, LatticeSpec, generate

settings.register_profile(
    "rcm", deadline=None, max_examples=30, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("rcm")


def make_field(law="constant:1", d=2, side=8, boundary="torus", seed=0):
    lat = LatticeSpec.cube(d, side, boundary)
    return generate(lat, ConductanceLaw.parse(law), seed)


@pytest.fixture
def homogeneous():
    return make_field("constant:1", 2, 8)


@pytest.fixture
def pareto_field():
    return make_field("pareto:2", 2, 16, seed=7)


def se_of_mean(x):
    x = np.asarray(x, dtype=float)
    return x.std(ddof=1) / np.sqrt(len(x))


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d} {title}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
