import functools
import warnings

import pytest

from hybridjump.bvp import Formulation
from hybridjump.gel import GelConfig, solve_gel
from hybridjump.oracle import SweepConfig, sweep
from hybridjump.registry import IDENTICAL_MODES_SPEC, build_problem, registry_get, registry_names, registry_spec

PROBLEMS = registry_names()


@functools.lru_cache(maxsize=None)
def problem(name):
    if name == "identical-modes":
        return build_problem(IDENTICAL_MODES_SPEC)
    return registry_get(name)


@functools.lru_cache(maxsize=None)
def gel_result(name, formulation=Formulation.JUMP_MAGNITUDE):
    spec = IDENTICAL_MODES_SPEC if name == "identical-modes" else registry_spec(name)
    cfg = GelConfig(formulation=formulation, **spec.get("solver", {}))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return solve_gel(problem(name), cfg)


@functools.lru_cache(maxsize=None)
def oracle_result(name):
    """Full default sweep; tens of seconds for planar problems, so shared across modules."""
    return sweep(problem(name), SweepConfig())


@pytest.fixture(params=PROBLEMS)
def problem_name(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = next((m for k, m in sys.modules.items() if k.endswith("test_acceptance")), None)
    if mod is None:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, 10):
        terminalreporter.write_line(mod.RESULTS.get(k, f"CRITERION {k}: FAIL  (not run or raised before checking)"))
