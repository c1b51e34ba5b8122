import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from coarse_personalization import Population, TreatmentSpace
from coarse_personalization.synth import SynthConfig, generate_population

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def record_criterion():
    """Tests call ``record_criterion(key, detail)`` once their assertions
    pass; criteria never recorded are printed as FAIL."""
    def record(key, detail=""):
        _ACCEPTANCE[key] = detail
    return record


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import CRITERIA
    reports = [r for key in ("passed", "failed", "error") for r in terminalreporter.stats.get(key, [])]
    ran = any("test_acceptance" in getattr(r, "nodeid", "") for r in reports)
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for key, title in CRITERIA:
        if key in _ACCEPTANCE:
            terminalreporter.write_line(f"PASS  {key:>3}  {title}  {_ACCEPTANCE[key]}")
        else:
            terminalreporter.write_line(f"FAIL  {key:>3}  {title}")


def make_pop(n, seed, d=2, bounds=(5.0, 20.0)):
    """Random population with spread-out sensitivities (no covariates)."""
    rng = np.random.default_rng(seed)
    beta = np.exp(rng.normal(np.log([2.5, 0.9][:d] + [1.5] * max(0, d - 2)), 0.6, size=(n, d)))
    cost = np.ones((n, d))
    if d > 1:
        cost[:, 1:] = np.exp(rng.normal(np.log(15.0), 0.3, size=(n, 1))) / 100.0
    alpha = rng.normal(0.0, 0.1, size=(n, d))
    return Population(TreatmentSpace(tuple(bounds[:d]) + (5.0,) * max(0, d - len(bounds))),
                      np.array([f"i{i}" for i in range(n)]), alpha, beta, cost)


@pytest.fixture(scope="session")
def small_pop():
    return generate_population(SynthConfig(seed=11, n=600))


@pytest.fixture(scope="session")
def tiny_pop():
    return make_pop(25, seed=3)
