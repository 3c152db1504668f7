import pytest

from gpe_lab.harness import model_problem_1, model_problem_2, reference_solve
from gpe_lab.iterate import SchemeConfig, run
from gpe_lab.spectral import spectral_report

ACCEPTANCE_SEEDS = (0, 1, 2)


@pytest.fixture(scope="session")
def mp1():
    return model_problem_1()


@pytest.fixture(scope="session")
def mp2():
    return model_problem_2()


@pytest.fixture(scope="session")
def ref1(mp1):
    return reference_solve(mp1)


@pytest.fixture(scope="session")
def ref2(mp2):
    return reference_solve(mp2)


@pytest.fixture(scope="session")
def report1(mp1, ref1):
    return spectral_report(mp1, ref1, sharp=True)


@pytest.fixture(scope="session")
def report2(mp2, ref2):
    return spectral_report(mp2, ref2, sharp=True)


@pytest.fixture(scope="session")
def basic_runs_mp1(mp1, ref1):
    """Basic scheme at tol 1e-11, one run per acceptance seed."""
    return {s: run(mp1, SchemeConfig("basic", tol=1e-11, seed=s), reference=ref1) for s in ACCEPTANCE_SEEDS}


@pytest.fixture(scope="session")
def basic_run_mp2(mp2, ref2):
    return run(mp2, SchemeConfig("basic", tol=1e-10, seed=0), reference=ref2)
