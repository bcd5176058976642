import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# acceptance lines collected by test_acceptance.py, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def matrices(draw, min_rows=1, max_rows=6, min_cols=1, max_cols=6, elements=finite):
    m = draw(st.integers(min_rows, max_rows))
    n = draw(st.integers(min_cols, max_cols))
    return draw(arrays(np.float64, (m, n), elements=elements))


@st.composite
def gaussian_matrices(draw, min_rows=2, max_rows=10, min_cols=2, max_cols=16, wide=False):
    """Seeded Gaussian matrices; hypothesis chooses the shape and seed."""
    m = draw(st.integers(min_rows, max_rows))
    lo = max(min_cols, m + 1) if wide else min_cols
    n = draw(st.integers(lo, max(lo, max_cols)))
    seed = draw(st.integers(0, 2**32 - 1))
    return np.random.default_rng(seed).standard_normal((m, n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
