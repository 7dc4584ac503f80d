import numpy as np
import pytest

from cfpower.metrics import coefficients_from_beta
from cfpower.params import SystemParams
from cfpower.scenario import channel_stats, generate_scenario


def random_instance(K, L, seed, pilot_mode="orthogonal", tau_p=20):
    params = SystemParams(num_ues=K, num_aps=L, pilot_mode=pilot_mode, tau_p=max(tau_p, 1))
    s = generate_scenario(params, seed)
    return params, s, channel_stats(s, params)


def random_coeffs(K, L, seed, **kw):
    params, s, _ = random_instance(K, L, seed, **kw)
    return coefficients_from_beta(s.beta, s.pilot_xcorr, params)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance results, printed as one line per criterion at the end of the run
ACCEPTANCE_RESULTS = {}


def record_criterion(number: int, passed: bool, detail: str):
    ACCEPTANCE_RESULTS[number] = (passed, detail)
    print(f"CRITERION {number}: {'PASS' if passed else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"CRITERION {number}: {'PASS' if passed else 'FAIL'} - {detail}")
