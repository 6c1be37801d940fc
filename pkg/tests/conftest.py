import numpy as np
import pytest

from dispersive_cq.discretization import MaterialLayout, build_mesh, build_operators
from dispersive_cq.material import MaterialModel, PhysicalConstants, tissue_model


@pytest.fixture
def constants():
    return PhysicalConstants()


@pytest.fixture
def tissue():
    return tissue_model()


@pytest.fixture
def interface_materials():
    return {"air": MaterialModel.vacuum(), "tissue": tissue_model()}


@pytest.fixture
def interface_layout():
    return MaterialLayout.from_list([(-1, 0.5, "air"), (0.5, 0.7, "tissue"), (0.7, 1.0, "air")])


def interface_ops(n_cells, constants=None):
    mesh = build_mesh(-1.0, 1.0, n_cells)
    layout = MaterialLayout.from_list([(-1, 0.5, "air"), (0.5, 0.7, "tissue"), (0.7, 1.0, "air")])
    materials = {"air": MaterialModel.vacuum(), "tissue": tissue_model()}
    return build_operators(mesh, layout, materials, constants or PhysicalConstants()), layout, materials


def vacuum_ops(n_cells, z_min=-1.0, z_max=1.0, eps_inf_prime=0.0):
    mesh = build_mesh(z_min, z_max, n_cells)
    layout = MaterialLayout.uniform(mesh, "air")
    return build_operators(mesh, layout, {"air": MaterialModel("air", eps_inf_prime)})


def gaussian(z):
    return 10.0 * np.exp(-10.0 * np.asarray(z) ** 2)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
