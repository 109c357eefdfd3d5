import numpy as np
import pytest
from hypothesis import settings

from mibci.data import EpochSet

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def make_epochs(n_epochs=8, n_channels=3, n_samples=175, seed=0, labels=None, subjects=None, fs=250.0):
    rng = np.random.default_rng(seed)
    if labels is None:
        labels = np.arange(n_epochs) % 4
    if subjects is None:
        subjects = np.arange(n_epochs) // max(1, n_epochs // 2)
    return EpochSet(
        rng.standard_normal((n_epochs, n_channels, n_samples)),
        fs,
        tuple(f"c{i}" for i in range(n_channels)),
        np.asarray(labels),
        np.asarray(subjects),
    )


@pytest.fixture
def epochs4():
    return make_epochs(n_epochs=16, n_channels=3)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
