import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("pullgeom", deadline=None, max_examples=40)
settings.load_profile("pullgeom")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
