import jax
import jax.numpy as jnp
import numpy as np
import pytest

from conftest import random_rotations
from dlvmc.features import FEATURE_MODES, FeatureBuilder, build_features, feature_dims
from dlvmc.frames import FrameSet, compute_frames
from dlvmc.system import Molecule


@pytest.fixture(scope="module")
def chain_frames(chain):
    mol, scf = chain
    return mol, compute_frames(scf, mol)


def _feats(mol, frames, r, mode="local_frames"):
    return build_features(jnp.asarray(mol.positions), jnp.asarray(frames.axes), jnp.asarray(r), mode)


@pytest.mark.parametrize("mode", FEATURE_MODES)
def test_shapes(mode, chain_frames):
    mol, frames = chain_frames
    r = np.random.default_rng(0).normal(size=(5, 3))
    f = _feats(mol, frames, r, mode)
    d_h, d_v, d_g = feature_dims(mode, mol.n_nuc)
    assert f.h0.shape == (5, d_h) and f.v0.shape == (5, 3, d_v) and f.g0.shape == (5, 5, d_g)
    assert d_h == (mol.n_nuc if mode == "distances_only" else 4 * mol.n_nuc)
    if mode != "raw_diffs":
        assert (d_v, d_g) == ((1 if mode == "distances_only" else 4), 1)


def test_unknown_mode():
    with pytest.raises(ValueError):
        feature_dims("polar", 2)


def test_electron_on_nucleus(chain_frames):
    mol, frames = chain_frames
    r = np.array([mol.positions[1], [1.0, 2.0, 3.0]])
    f = _feats(mol, frames, r)
    assert float(f.rho_norm[0, 1]) == 0.0
    assert np.all(np.asarray(f.v0[0, 1]) == 0.0)


def test_single_atom_modes_coincide():
    mol = Molecule.from_atoms([("C", (0.1, 0.2, 0.3))])
    frames = FrameSet.identity(1)
    r = np.random.default_rng(1).normal(size=(6, 3))
    a = _feats(mol, frames, r, "local_frames")
    b = _feats(mol, frames, r, "raw_diffs")
    assert np.array_equal(a.h0, b.h0) and np.array_equal(a.v0, b.v0)
    assert np.array_equal(a.g0[..., 0], b.g0[..., 0])


def test_distance_matrix_properties(chain_frames):
    mol, frames = chain_frames
    r = np.random.default_rng(2).normal(size=(6, 3))
    f = _feats(mol, frames, r)
    g = np.asarray(f.g0[..., 0])
    assert np.array_equal(g, g.T) and np.all(np.diag(g) == 0.0)
    assert np.all(np.asarray(f.rho_norm) >= 0)
    np.testing.assert_allclose(np.linalg.norm(f.v0[..., 1:], axis=-1), f.rho_norm, atol=1e-10)


@pytest.mark.parametrize("mode", FEATURE_MODES)
def test_translation_invariance(mode, chain_frames):
    mol, frames = chain_frames
    r = np.random.default_rng(3).normal(size=(4, 3))
    shift = np.array([0.7, -1.3, 2.2])
    a = _feats(mol, frames, r, mode)
    b = _feats(mol.translated(shift), frames, r + shift, mode)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, atol=1e-12)


def test_rotation_invariance(chain_frames):
    mol, frames = chain_frames
    r = np.random.default_rng(4).normal(size=(5, 3)) * 1.5
    a = _feats(mol, frames, r)
    for q in random_rotations(10, seed=5):
        b = _feats(mol.rotated(q), frames.rotated(q), r @ q.T)
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, atol=1e-8)


def test_raw_diffs_not_rotation_invariant(chain_frames):
    mol, frames = chain_frames
    r = np.random.default_rng(4).normal(size=(3, 3))
    q = random_rotations(1, seed=6)[0]
    a = _feats(mol, frames, r, "raw_diffs")
    b = _feats(mol.rotated(q), frames.rotated(q), r @ q.T, "raw_diffs")
    assert not np.allclose(a.h0, b.h0)


@pytest.mark.parametrize("mode", FEATURE_MODES)
def test_permutation_equivariance(mode, chain_frames):
    mol, frames = chain_frames
    r = np.random.default_rng(7).normal(size=(5, 3))
    perm = np.array([3, 0, 4, 1, 2])
    a = _feats(mol, frames, r, mode)
    b = _feats(mol, frames, r[perm], mode)
    np.testing.assert_array_equal(b.h0, a.h0[perm])
    np.testing.assert_array_equal(b.v0, a.v0[perm])
    np.testing.assert_array_equal(b.g0, a.g0[perm][:, perm])


def test_finite_gradients_at_coincidence(chain_frames):
    mol, frames = chain_frames
    r = jnp.array([[0.0, 0.0, 0.0], [0.5, 0.5, 0.5], [0.5, 0.5, 0.5]])

    def total(x):
        f = _feats(mol, frames, x)
        return jnp.sum(f.h0) + jnp.sum(f.g0) + jnp.sum(f.v0)

    assert np.all(np.isfinite(jax.grad(total)(r)))


def test_feature_builder_batches(chain_frames):
    mol, frames = chain_frames
    fb = FeatureBuilder().fit(Molecule(mol.positions, mol.charges, 2, 1), frames)
    r = np.random.default_rng(8).normal(size=(4, 3, 3))
    batch = fb.transform(r)
    assert batch.h0.shape == (4, 3, 12)
    np.testing.assert_array_equal(batch.h0[2], fb.transform(r[2]).h0)
    with pytest.raises(ValueError):
        FeatureBuilder().fit(mol)
