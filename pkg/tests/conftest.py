import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from emsim import geometry, mesher, solver  # noqa: E402

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def data_path(name):
    return os.path.join(DATA_DIR, name)


@pytest.fixture(scope="session")
def table1_layout():
    """Single conductor at the origin with the reference parameters."""
    return geometry.ConductorLayout(centers=((0.0, 0.0),), radius_m=5.0e-3)


@pytest.fixture(scope="session")
def table1_mesh(table1_layout):
    return mesher.generate_mesh(table1_layout)


@pytest.fixture(scope="session")
def table1_problem(table1_mesh):
    return solver.FEProblem(mesh=table1_mesh)


@pytest.fixture(scope="session")
def table1_result(table1_problem):
    return solver.solve_problem(table1_problem)


@pytest.fixture(scope="session")
def dc_problem(table1_mesh):
    return solver.FEProblem(
        mesh=table1_mesh,
        excitation=geometry.ExcitationSpec(frequency_Hz=0.0))


@pytest.fixture(scope="session")
def dc_result(dc_problem):
    return solver.solve_problem(dc_problem)


@pytest.fixture(scope="session")
def grid9_problem():
    """3x3 conductor grid, solved once and shared; exercises proximity
    effect and gives the DSL tests regions up to Omega_c_9."""
    pts = [(i * 0.012, j * 0.012) for j in range(3) for i in range(3)]
    layout = geometry.ConductorLayout.from_points(pts, radius_m=5.0e-3)
    mesh = mesher.generate_mesh(layout)
    return solver.FEProblem(mesh=mesh)


@pytest.fixture(scope="session")
def grid9_result(grid9_problem):
    return solver.solve_problem(grid9_problem)
