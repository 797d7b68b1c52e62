import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hetdelay.model import NetworkParams, TierSpec

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def two_tier(alpha=4.0, theta=1.0, p=0.5, lambda_u=5e-5, xi=(0.2, 0.3), beta=(18.0, 20.0),
             bias2=1.0) -> NetworkParams:
    return NetworkParams(
        tiers=(TierSpec.from_dbm(39.0, 1e-5), TierSpec.from_dbm(24.0, 5e-5, bias2)),
        alpha=alpha, theta=theta, p=p, lambda_u=lambda_u,
        xi_min=xi[0], xi_max=xi[1], beta_min=beta[0], beta_max=beta[1])


def one_tier(alpha=4.0, theta=1.0, p=0.5, density=1e-4, lambda_u=1e-3, xi=(0.2, 0.3),
             beta=(18.0, 20.0)) -> NetworkParams:
    return NetworkParams(tiers=(TierSpec(1.0, density),), alpha=alpha, theta=theta, p=p,
                         lambda_u=lambda_u, xi_min=xi[0], xi_max=xi[1],
                         beta_min=beta[0], beta_max=beta[1])


@pytest.fixture
def fig5_heavy():
    return two_tier()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per criterion, then assert it."""

    def report(n: int, ok: bool, detail: str):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
