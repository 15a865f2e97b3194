import numpy as np
import pytest

from dysonflow.measures import GridDensity


def random_density(rng, m=1024, lo=-2.5, hi=2.5):
    """Mixture of one to three semicircle-shaped bumps on a fixed window."""
    k = rng.integers(1, 4)
    centers = rng.uniform(-1.2, 1.2, k)
    widths = rng.uniform(0.2, 1.0, k)
    weights = rng.uniform(0.2, 1.0, k)

    def f(x):
        out = np.zeros_like(x)
        for c, w, a in zip(centers, widths, weights):
            out += a * np.sqrt(np.clip(w * w - (x - c) ** 2, 0, None)) / w**2
        return out

    return GridDensity.from_function(f, lo, hi, m)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
