import numpy as np
import pytest

from apqfluid import ApqParams, erlang_ph, exp_ph

ACCEPTANCE_LINES = []


def mm1_departures_leaving_empty(lam, mu, n, seed):
    """Birth-death oracle: fraction of M/M/1 departures that leave the system empty."""
    rng = np.random.default_rng(seed)
    q, deps, empty = 0, 0, 0
    p_arr = lam / (lam + mu)
    u = rng.random(20 * n)
    k = 0
    while deps < n:
        if q == 0 or u[k] < p_arr:
            q += 1
        else:
            q -= 1
            deps += 1
            empty += q == 0
        k += 1
        if k == u.size:
            u, k = rng.random(20 * n), 0
    return empty / n


@pytest.fixture
def base_params():
    return ApqParams(0.3, 0.2, 2.0, 1.0, exp_ph(1.0))


@pytest.fixture
def erlang_params():
    return ApqParams(0.3, 0.2, 2.0, 1.0, erlang_ph(2, 2.0))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
