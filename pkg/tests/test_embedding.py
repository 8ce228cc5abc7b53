import jax
import jax.numpy as jnp
import numpy as np
import pytest

from dlvmc.embedding import VARIANTS, EmbeddingConfigError, EmbeddingShape, embed, init_embedding
from dlvmc.features import build_features, feature_dims
from dlvmc.frames import FrameSet
from dlvmc.system import Molecule

MOL = Molecule.from_atoms([("Li", (0, 0, 0)), ("H", (0, 0, 3.0))])   # n_up=2, n_dn=2


def setup(variant, mol=MOL, mode="local_frames", n_iter=3, widths=(12, 5), seed=0):
    shape = EmbeddingShape(variant, n_iter, widths[0], widths[1], *feature_dims(mode, mol.n_nuc),
                           mol.n_nuc)
    params = init_embedding(jax.random.PRNGKey(seed), shape)
    axes = jnp.asarray(FrameSet.identity(mol.n_nuc).axes)
    feats = lambda r: build_features(jnp.asarray(mol.positions), axes, jnp.asarray(r), mode)
    return shape, params, feats


def ref_embed(params, feats, n_up, shape, kernels="learned"):
    """Straight numpy transcription of the residual-stream update, loop by loop."""
    t = lambda p, x: np.tanh(np.asarray(x) @ np.asarray(p["w"]) + np.asarray(p["b"]))
    h, v, g = (np.asarray(x, dtype=np.float64) for x in (feats.h0, feats.v0, feats.g0))
    n = h.shape[0]
    spin = np.arange(n) < n_up
    for l in range(shape.n_iter):
        P = lambda k: params[f"{l}/{k}"]
        up = h[:n_up].mean(0) if n_up else np.zeros(h.shape[1])
        dn = h[n_up:].mean(0) if n > n_up else np.zeros(h.shape[1])
        rows = []
        for i in range(n):
            s_el = 0.0
            for j in range(n):
                same = spin[i] == spin[j]
                if kernels == "identity":            # B = id, C = 1
                    s_el = s_el + g[i, j]
                else:
                    b = t(P("b_same" if same else "b_diff"), g[i, j])
                    c = t(P("c_same" if same else "c_diff"), h[j])
                    s_el = s_el + b * c
            parts = [h[i], up, dn, s_el] if shape.variant != "paulinet_like" else [s_el]
            if kernels != "identity":
                s_nuc = sum(t(P("b_nuc"), v[i, I]) * t(P("c_nuc"), params["z_emb"][I])
                            for I in range(v.shape[1]))
                parts.append(s_nuc)
            rows.append(np.concatenate(parts))
        f = np.stack(rows)
        new = t(P("one"), f)
        h_new = new + h if new.shape == h.shape else new
        if shape.variant != "paulinet_like" and l < shape.n_iter - 1:
            gs = np.where(spin[:, None, None] == spin[None, :, None], t(P("g_same"), g), t(P("g_diff"), g))
            g = gs + g if gs.shape == g.shape else gs
            if shape.variant == "combined":
                vn = t(P("v_nuc"), v)
                v = vn + v if vn.shape == v.shape else vn
        h = h_new
    return h


@pytest.mark.parametrize("variant", ["combined", "paulinet_like"])
def test_matches_reference(variant):
    shape, params, feats = setup(variant)
    r = np.random.default_rng(0).normal(size=(4, 3))
    f = feats(r)
    np.testing.assert_allclose(embed(params, f, 2, shape), ref_embed(params, f, 2, shape), atol=1e-12)


def test_ferminet_like_is_combined_skeleton_with_trivial_kernels():
    shape, params, feats = setup("ferminet_like")
    r = np.random.default_rng(1).normal(size=(4, 3))
    f = feats(r)
    ref = ref_embed(params, f, 2, shape, kernels="identity")
    np.testing.assert_allclose(embed(params, f, 2, shape), ref, atol=1e-10)


@pytest.mark.parametrize("variant", VARIANTS)
def test_same_spin_equivariance(variant):
    shape, params, feats = setup(variant)
    r = np.random.default_rng(2).normal(size=(4, 3))
    h = embed(params, feats(r), 2, shape)
    for perm in ([1, 0, 2, 3], [0, 1, 3, 2], [1, 0, 3, 2]):
        hp = embed(params, feats(r[perm]), 2, shape)
        np.testing.assert_allclose(hp, h[np.array(perm)], atol=1e-12)


def test_opposite_spin_swap_is_not_a_symmetry():
    shape, params, feats = setup("combined")
    r = np.random.default_rng(3).normal(size=(4, 3))
    h = embed(params, feats(r), 2, shape)
    hp = embed(params, feats(r[[2, 1, 0, 3]]), 2, shape)
    assert not np.allclose(hp, np.asarray(h)[[2, 1, 0, 3]])


@pytest.mark.parametrize("variant", VARIANTS)
def test_no_spin_down_electrons(variant):
    mol = Molecule.from_atoms([("H", (0, 0, 0))])
    shape, params, feats = setup(variant, mol)
    h = embed(params, feats(np.array([[0.3, 0.1, -0.2]])), 1, shape)
    assert h.shape == (1, 12) and np.all(np.isfinite(h))


@pytest.mark.parametrize("variant", VARIANTS)
def test_identical_electrons_identical_rows(variant):
    shape, params, feats = setup(variant)
    r = np.array([[0.4, 0.2, 0.1], [0.4, 0.2, 0.1], [1.0, -1.0, 0.5], [0.0, 0.0, 3.0]])
    h = embed(params, feats(r), 2, shape)
    assert np.all(np.isfinite(h))          # coincident electron and nucleus too
    np.testing.assert_array_equal(h[0], h[1])


def test_bad_configuration_rejected_at_construction():
    with pytest.raises(EmbeddingConfigError):
        EmbeddingShape("transformer", 2, 8, 4, 4, 4, 1, 1)
    with pytest.raises(EmbeddingConfigError):
        EmbeddingShape("combined", 0, 8, 4, 4, 4, 1, 1)


def test_initialization_statistics():
    shape = EmbeddingShape("combined", 2, 256, 32, 8, 4, 1, 2)
    params = init_embedding(jax.random.PRNGKey(0), shape)
    w = np.asarray(params["1/one"]["w"])
    fan_in = shape.f_dim(1)
    assert w.shape == (fan_in, 256)
    assert np.var(w) * fan_in == pytest.approx(1.0, rel=0.05)
    assert np.all(np.asarray(params["1/one"]["b"]) == 0.0)
    assert params["z_emb"].shape == (2, 32)


def test_residual_only_when_widths_match():
    shape = EmbeddingShape("combined", 3, 16, 4, 8, 4, 1, 2)
    assert shape.layer_shapes()["0/one"] == (3 * 8 + 2 * 4, 16)
    assert shape.layer_shapes()["1/one"] == (3 * 16 + 2 * 4, 16)
    assert "2/g_same" not in shape.layer_shapes()
