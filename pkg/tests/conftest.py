import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from dlvmc.scf.hf import run_scf
from dlvmc.scf.integrals import compute_integrals
from dlvmc.system import Molecule


def bent_chain(angle_deg=77.0):
    """F-O-F style chain: F at the origin, O at 2.5 bohr, second F 2.7 bohr from O."""
    a = np.deg2rad(angle_deg)
    o = np.array([2.5, 0.0, 0.0])
    f2 = o + 2.7 * np.array([-np.cos(a), np.sin(a), 0.0])
    return Molecule.from_atoms([("F", (0.0, 0.0, 0.0)), ("O", tuple(o)), ("F", tuple(f2))])


def scf_of(mol, basis="sto-6g"):
    return run_scf(compute_integrals(mol, basis), mol)


def random_rotations(n, seed):
    return Rotation.random(n, random_state=seed).as_matrix()


@pytest.fixture(scope="session")
def chain():
    mol = bent_chain()
    return mol, scf_of(mol)


# filled by the acceptance tests, one line per criterion
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
