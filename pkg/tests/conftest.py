import pytest

from tcvol.constvol import solve_zeroth
from tcvol.model import MarketParams

# Values produced by the shooting oracle (independent RK45 integration) and frozen here.
SHOOT_REAL = (0.030576268065816706, 5.253747131539607, 10.201301025340632)
SHOOT_COMPLEX = (0.015487970405632396, 1.3066464018776986, 2.1816721007742115)
# Adaptive-quadrature values of the fast delta1 ratio at V3 = -1.
QUAD_DELTA1_REAL = -1.0087888185057563
QUAD_DELTA1_COMPLEX = 0.06889776819423205
# eta-derivatives of the perturbed eigenproblem (delta1, l1, u1) at V3 = -1.
PERTURBED_REAL = (-1.0087888181267595, -4105.809659949984, -9400.942882318801)
PERTURBED_COMPLEX = (0.0688977682049748, -206.24959331080325, -359.3056509014943)


@pytest.fixture(scope="session")
def real_params():
    return MarketParams(mu=0.07, gamma=2.0, lam=0.01)


@pytest.fixture(scope="session")
def complex_params():
    return MarketParams(mu=0.05, gamma=2.0, lam=0.01)


@pytest.fixture(scope="session")
def real_sol(real_params):
    return solve_zeroth(real_params, 0.2)


@pytest.fixture(scope="session")
def complex_sol(complex_params):
    return solve_zeroth(complex_params, 0.2)


@pytest.fixture(scope="session", params=["real", "complex"])
def sol(request, real_sol, complex_sol):
    return real_sol if request.param == "real" else complex_sol


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo runs")


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(line)
