import numpy as np
import pytest

from saturnq import fem, mesh

R_OUTER = 10.0
MEDIUM_N = 8
REFINED_N = 16


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_mesh():
    return mesh.cubed_sphere_shell(4, mesh.balanced_n_radial(4, R_OUTER), R_OUTER)


@pytest.fixture(scope="session")
def medium_mesh():
    return mesh.cubed_sphere_shell(MEDIUM_N, mesh.balanced_n_radial(MEDIUM_N, R_OUTER), R_OUTER)


@pytest.fixture(scope="session")
def refined_mesh():
    return mesh.cubed_sphere_shell(REFINED_N, mesh.balanced_n_radial(REFINED_N, R_OUTER), R_OUTER)


class _Solutions:
    """Solved fields cached per (mesh name, k) for the whole session."""

    def __init__(self, request):
        self.request = request
        self.cache = {}

    def get(self, mesh_name: str, k: float):
        key = (mesh_name, float(k))
        if key not in self.cache:
            m = self.request.getfixturevalue(mesh_name)
            system = fem.assemble(m, float(k))
            self.cache[key] = (fem.solve_exterior_problem(m, float(k), system=system), system)
        return self.cache[key]


@pytest.fixture(scope="session")
def solutions(request):
    return _Solutions(request)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
