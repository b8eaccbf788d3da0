import math

import pytest
from hypothesis import HealthCheck, settings

from softsync.plant import GripperModel
from softsync.synth import synthesize_feedforward, wire_feedback
from softsync.cli import step_reference

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

TWO_FINGER = [(7.831, 2.66, 3.61), (7.831, 2.45, 3.06)]
THREE_FINGER = [(7.831, 2.66, 3.61), (7.831, 2.76, 3.88), (7.831, 2.45, 3.06)]
BOUNDS = (0.143, 0.059)


@pytest.fixture(scope="session")
def two_finger():
    return GripperModel.from_triples(TWO_FINGER, BOUNDS)


@pytest.fixture(scope="session")
def three_finger():
    return GripperModel.from_triples(THREE_FINGER, BOUNDS)


@pytest.fixture(scope="session")
def two_finger_ctrl(two_finger):
    P = two_finger.plant()
    return wire_feedback(P, synthesize_feedforward(P, step_reference(math.pi / 3), 5.0))


def pytest_terminal_summary(terminalreporter):
    import sys

    acc = sys.modules.get("tests.test_acceptance")
    if acc is not None and acc.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acc.summary_lines():
            terminalreporter.write_line(line)
