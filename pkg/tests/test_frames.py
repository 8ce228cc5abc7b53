import numpy as np
import pytest

from conftest import random_rotations, scf_of
from dlvmc.config import GEOMETRIES
from dlvmc.frames import FrameError, FrameSet, LocalFrames, MissingPShellError, compute_frames, p_block
from dlvmc.system import Molecule


def _check_orthonormal(frames):
    for u in frames.axes:
        np.testing.assert_allclose(u.T @ u, np.eye(3), atol=1e-10)
        assert np.linalg.det(u) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("sym", ["H", "N", "Ne", "Ar"])
def test_single_atom_identity(sym):
    mol = Molecule.from_atoms([(sym, (0.3, -0.2, 1.0))])
    frames = compute_frames(scf_of(mol), mol)
    np.testing.assert_array_equal(frames.axes[0], np.eye(3))


def test_neon_block_is_two_identity():
    mol = Molecule.from_atoms([("Ne", (0.0, 0.0, 0.0))])
    block = p_block(scf_of(mol), 0)
    np.testing.assert_allclose(block, 2 * np.eye(3), atol=1e-10)


def test_missing_p_shell():
    mol = Molecule.from_atoms([("H", (0, 0, 0))])
    with pytest.raises(MissingPShellError):
        p_block(scf_of(mol), 0)


def test_p_block_symmetric(chain):
    mol, scf = chain
    for J in range(mol.n_nuc):
        b = p_block(scf, J)
        assert np.array_equal(b, b.T)


def test_nitrogen_dimer():
    mol = Molecule.from_atoms(GEOMETRIES["n2"])
    scf = scf_of(mol)
    frames = compute_frames(scf, mol)
    _check_orthonormal(frames)
    for J, other in ((0, 1), (1, 0)):
        block = p_block(scf, J)
        assert abs(block[0, 0] - block[1, 1]) < 1e-8            # x, y degenerate
        np.testing.assert_allclose(block[:2, 2], 0.0, atol=1e-7)   # SCF density tol is 1e-8
        u = frames.axes[J]
        z_axes = [k for k in range(3) if abs(abs(u[2, k]) - 1) < 1e-10]
        assert len(z_axes) == 1
        toward = np.sign(mol.positions[other, 2] - mol.positions[J, 2])
        assert u[2, z_axes[0]] == pytest.approx(toward)
        assert frames.degenerate[J].any()


def test_frames_diagonalize_blocks(chain):
    mol, scf = chain
    frames = compute_frames(scf, mol)
    _check_orthonormal(frames)
    for J in range(mol.n_nuc):
        assert not frames.degenerate[J].any()
        d = frames.axes[J].T @ p_block(scf, J) @ frames.axes[J]
        np.testing.assert_allclose(d - np.diag(np.diag(d)), 0.0, atol=1e-10)
        assert np.all(np.diff(np.diag(d)) <= 1e-12)             # descending


def test_covariance_under_rotation(chain):
    mol, scf = chain
    frames = compute_frames(scf, mol)
    for q in random_rotations(3, seed=3):
        rot = mol.rotated(q)
        got = compute_frames(scf_of(rot), rot)
        np.testing.assert_allclose(got.axes, frames.rotated(q).axes, atol=1e-8)


def test_determinism(chain):
    mol, scf = chain
    a = compute_frames(scf, mol)
    b = compute_frames(scf_of(mol), mol)
    assert np.array_equal(a.axes, b.axes)


def test_hydrogen_copies_neighbor_frame():
    mol = Molecule.from_atoms([("Li", (0, 0, 0)), ("H", (0.3, 0.2, 3.0))])
    frames = compute_frames(scf_of(mol), mol)
    np.testing.assert_array_equal(frames.axes[1], frames.axes[0])
    assert np.isnan(frames.eigenvalues[1]).all()


def test_hydrogen_only_molecule_identity():
    mol = Molecule.from_atoms(GEOMETRIES["h2"])
    frames = compute_frames(scf_of(mol), mol)
    np.testing.assert_array_equal(frames.axes, np.tile(np.eye(3), (2, 1, 1)))


def test_non_converged_scf_rejected():
    from dlvmc.scf.hf import run_scf
    from dlvmc.scf.integrals import compute_integrals
    mol = Molecule.from_atoms(GEOMETRIES["n2"])
    scf = run_scf(compute_integrals(mol), mol, max_iter=2)
    with pytest.raises(FrameError):
        compute_frames(scf, mol)


def test_dump_format(chain):
    mol, scf = chain
    text = compute_frames(scf, mol).dumps()
    rows = [r for r in text.splitlines() if not r.startswith("#")]
    assert len(rows) == mol.n_nuc
    assert all(len(r.split()) == 1 + 9 + 3 for r in rows)


def test_estimator_transform(chain):
    mol, scf = chain
    est = LocalFrames().fit(mol, scf)
    vec = np.random.default_rng(0).normal(size=(5, mol.n_nuc, 3))
    local = est.transform(vec)
    np.testing.assert_allclose(np.linalg.norm(local, axis=-1), np.linalg.norm(vec, axis=-1))
    assert isinstance(est.frames_, FrameSet)
