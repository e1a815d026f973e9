import numpy as np
import pytest
from hypothesis import settings

from youden_drm.core import BasisSpec, TwoSampleData

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

LOG = BasisSpec(("log_x",))
LIN = BasisSpec(("x",))

# criterion id -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[str, tuple[str, str]] = {}


def lognormal_data(rng, n0=50, n1=50, a1=1.35):
    return TwoSampleData(np.exp(rng.standard_normal(n0)), np.exp(a1 + rng.standard_normal(n1)))


@pytest.fixture
def rng():
    return np.random.default_rng(20260915)


@pytest.fixture
def acceptance_record():
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key}: {status}  {detail}")
