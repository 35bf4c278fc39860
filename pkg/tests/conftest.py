import numpy as np
import pytest
from hypothesis import settings

from tresca_lab.assembly import ProblemData, assemble_all
from tresca_lab.mesh import build_unit_square_mesh

settings.register_profile("fixed", derandomize=True, deadline=None, max_examples=50)
settings.load_profile("fixed")

_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance():
    def record(criterion, ok, detail=""):
        _ACCEPTANCE.append((criterion, bool(ok), detail))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {criterion} {detail}")


@pytest.fixture(scope="session")
def ops2():
    return assemble_all(build_unit_square_mesh(2, 2))


@pytest.fixture(scope="session")
def ops4():
    return assemble_all(build_unit_square_mesh(4, 4))


@pytest.fixture(scope="session")
def ops8():
    return assemble_all(build_unit_square_mesh(8, 8))


@pytest.fixture
def suite_data():
    return ProblemData()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
