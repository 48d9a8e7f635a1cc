import math

import numpy as np
import pytest

from contextlab.qstate import BlochState, DensityMatrix, StateSet, bloch_to_density

ZERO = BlochState(0.0)
ONE = BlochState(math.pi / 2)
PLUS = BlochState(math.pi / 4, 0.0)
MINUS = BlochState(math.pi / 4, math.pi)


def ket(*amps) -> DensityMatrix:
    return DensityMatrix.from_ket(np.array(amps, dtype=complex))


@pytest.fixture
def antipodes() -> StateSet:
    return StateSet.from_bloch([ZERO, ONE, PLUS, MINUS], ["0", "1", "+", "-"])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_hermitian(d, rng):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return a + a.conj().T


def random_bloch(rng) -> BlochState:
    # uniform on the sphere: cos(2 theta) uniform in [-1, 1]
    return BlochState(0.5 * math.acos(rng.uniform(-1, 1)), rng.uniform(0, 2 * math.pi))


__all__ = ["ZERO", "ONE", "PLUS", "MINUS", "ket", "random_hermitian", "random_bloch", "bloch_to_density"]


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
