import logging

import pytest


@pytest.fixture(autouse=True)
def _quiet_dynamics_log(caplog):
    # positivity diagnostics are expected to fire during collapse runs;
    # keep test output readable
    logging.getLogger("spinfilter.dynamics").setLevel(logging.ERROR)
    yield
