import pytest

from lattice_agreement import (
    chain_space,
    nonnormal_chain_space,
    powerset_space,
    vector_clock_space,
)


@pytest.fixture
def chain10():
    return chain_space(10)


@pytest.fixture
def nonnormal():
    return nonnormal_chain_space()


@pytest.fixture
def wpowerset():
    return powerset_space({"a": 1, "b": 5})


@pytest.fixture
def vclock():
    return vector_clock_space(2, 3)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
