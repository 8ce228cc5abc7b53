"""Determinant ansatz with exponential envelopes."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import jax
import jax.numpy as jnp
import numpy as np

from .embedding import EmbeddingShape, embed, init_embedding
from .features import build_features, feature_dims
from .frames import FrameSet

DET_MODES = ("dense", "block")
ENVELOPE_INITS = ("z_over_n", "ones")


class LogPsi(NamedTuple):
    sign: jnp.ndarray
    log_abs: jnp.ndarray


@dataclass(frozen=True)
class ModelConfig:
    feature_mode: str = "local_frames"
    embedding_variant: str = "combined"
    det_mode: str = "dense"
    envelope_init: str = "z_over_n"
    n_det: int = 32
    width_one: int = 256
    width_aux: int = 32
    n_iter: int = 4

    def __post_init__(self):
        if self.det_mode not in DET_MODES:
            raise ValueError(f"det_mode must be one of {DET_MODES}, got {self.det_mode!r}")
        if self.envelope_init not in ENVELOPE_INITS:
            raise ValueError(f"envelope_init must be one of {ENVELOPE_INITS}")
        if self.n_det < 1:
            raise ValueError("n_det must be positive")


def principal_quantum_number(k):
    """Shell index for 1-based orbital ``k`` with hydrogen-like capacities 1, 4, 9, ..."""
    if k < 1:
        raise ValueError("orbital index is 1-based")
    n, filled = 1, 1
    while filled < k:
        n += 1
        filled += n * n
    return n


def orbital_counts(cfg, mol):
    """Number of orbitals per spin channel ``(up, dn)``."""
    if cfg.det_mode == "dense":
        return mol.n_el, mol.n_el
    return mol.n_up, mol.n_dn


def aufbau_index(k, mol, det_mode):
    """1-based position of orbital row ``k`` within its spin block.

    Block determinants index orbitals per spin channel directly. Dense
    determinants stack the spin-down orbitals below the ``n_up`` spin-up ones,
    so row ``k > n_up`` restarts the count.
    """
    if det_mode == "dense" and k > mol.n_up:
        return k - mol.n_up
    return k


def envelope_exponents(cfg, mol):
    """Initial ``omega[d, k, I]`` per spin channel: ``Z_I / n_k`` or all ones."""
    out = []
    for n_orb in orbital_counts(cfg, mol):
        if cfg.envelope_init == "ones":
            w = np.ones((n_orb, mol.n_nuc))
        else:
            n_k = np.array([principal_quantum_number(aufbau_index(k, mol, cfg.det_mode))
                            for k in range(1, n_orb + 1)], dtype=np.float64)
            w = mol.charges[None, :].astype(np.float64) / n_k[:, None]
        out.append(jnp.asarray(np.broadcast_to(w, (cfg.n_det,) + w.shape).copy()))
    return out


class Ansatz:
    """Static description of the wavefunction for one molecule and frame set.

    Parameters live in a separate pytree so every method is a pure function of
    ``(params, r)`` for a single configuration ``r`` of shape ``(n_el, 3)``.
    """

    def __init__(self, mol, frames, cfg=ModelConfig()):
        self.mol = mol
        self.cfg = cfg
        self.frames = frames if frames is not None else FrameSet.identity(mol.n_nuc)
        d_h, d_v, d_g = feature_dims(cfg.feature_mode, mol.n_nuc)
        self.shape = EmbeddingShape(cfg.embedding_variant, cfg.n_iter, cfg.width_one,
                                    cfg.width_aux, d_h, d_v, d_g, mol.n_nuc)
        self.nuc_pos = jnp.asarray(mol.positions)
        self.charges = jnp.asarray(mol.charges, dtype=jnp.float64)
        self.axes = jnp.asarray(self.frames.axes)
        self.n_up, self.n_dn = mol.n_up, mol.n_dn

    def init_params(self, seed):
        key = jax.random.PRNGKey(seed) if isinstance(seed, int) else seed
        k_emb, k_up, k_dn = jax.random.split(key, 3)
        width = self.cfg.width_one
        n_orb = orbital_counts(self.cfg, self.mol)
        omega = envelope_exponents(self.cfg, self.mol)
        params = {"embedding": init_embedding(k_emb, self.shape)}
        for ch, k, n, w in (("up", k_up, n_orb[0], omega[0]), ("dn", k_dn, n_orb[1], omega[1])):
            params[ch] = {
                "w": jax.random.normal(k, (self.cfg.n_det, n, width)) / np.sqrt(width),
                "pi": jnp.ones((self.cfg.n_det, n, self.mol.n_nuc)),
                "omega": w,
            }
        return params

    def features(self, r):
        return build_features(self.nuc_pos, self.axes, r, self.cfg.feature_mode)

    @staticmethod
    def envelopes(pi, omega, rho_norm):
        """``Omega[d, k, i] = sum_I pi[d,k,I] exp(-|omega[d,k,I]| |rho_iI|)``."""
        return jnp.einsum("dkI,dkiI->dki", pi,
                          jnp.exp(-jnp.abs(omega)[:, :, None, :] * rho_norm[None, None]))

    def orbitals(self, params, r):
        """Orbital matrices ``(M_up, M_dn)`` of shape ``(n_det, n_orb, n_up|n_dn)``.

        Rows are orbitals, columns electrons of the given spin.
        """
        feats = self.features(r)
        h = embed(params["embedding"], feats, self.n_up, self.shape)
        out = []
        for ch, sl in (("up", slice(0, self.n_up)), ("dn", slice(self.n_up, None))):
            p = params[ch]
            lam = jnp.einsum("dkw,iw->dki", p["w"], h[sl])
            out.append(lam * self.envelopes(p["pi"], p["omega"], feats.rho_norm[sl]))
        return tuple(out)

    def log_psi(self, params, r):
        """Signed log amplitude ``(sign, log|psi|)``; ``(0, -inf)`` on the nodal set."""
        m_up, m_dn = self.orbitals(params, r)
        if self.cfg.det_mode == "dense":
            sign, logdet = jnp.linalg.slogdet(jnp.concatenate([m_up, m_dn], axis=-1))
        else:
            sign, logdet = jnp.linalg.slogdet(m_up)
            if self.n_dn > 0:
                s2, l2 = jnp.linalg.slogdet(m_dn)
                sign, logdet = sign * s2, logdet + l2
        return signed_logsumexp(sign, logdet)

    def log_abs(self, params, r):
        return self.log_psi(params, r).log_abs


def signed_logsumexp(signs, logs):
    """``log|sum_d s_d exp(l_d)|`` and its sign, shifted by the max for overflow safety."""
    finite = jnp.isfinite(logs)
    shift = jnp.max(jnp.where(finite, logs, -jnp.inf))
    shift = jnp.where(jnp.isfinite(shift), jax.lax.stop_gradient(shift), 0.0)
    total = jnp.sum(jnp.where(finite, signs * jnp.exp(logs - shift), 0.0))
    sign = jnp.sign(total)
    log_abs = jnp.where(total == 0.0, -jnp.inf, jnp.log(jnp.abs(jnp.where(total == 0.0, 1.0, total))) + shift)
    return LogPsi(sign, log_abs)


def count_params(params):
    """Total number of trainable scalars."""
    return int(sum(np.size(x) for x in jax.tree_util.tree_leaves(params)))


def flatten_params(params, prefix=""):
    """``{"a/b/c": array}`` view of a nested parameter dict."""
    out = {}
    for k, v in params.items():
        name = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten_params(v, name + "/"))
        else:
            out[name] = np.asarray(v)
    return out


def unflatten_params(flat):
    out = {}
    for name, arr in flat.items():
        node = out
        parts = name.split("/")
        # embedding layer keys look like "embedding/0/one/w": keep "0/one" joined
        if parts[0] == "embedding" and len(parts) == 4:
            parts = [parts[0], f"{parts[1]}/{parts[2]}", parts[3]]
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = jnp.asarray(arr)
    return out


def hydrogen_exact_params(params, omega=1.0, bias=1.0):
    """Parameters whose orbitals are constant times ``exp(-omega r)``.

    All embedding weights are zeroed so ``h^L`` no longer depends on ``r``; with
    ``omega = Z`` this is the exact one-electron ground state of a single nucleus.
    """
    emb = {}
    for name, layer in params["embedding"].items():
        if name == "z_emb":
            emb[name] = layer
        else:
            emb[name] = {"w": jnp.zeros_like(layer["w"]), "b": jnp.full_like(layer["b"], bias)}
    out = {"embedding": emb}
    for ch in ("up", "dn"):
        p = params[ch]
        out[ch] = {"w": p["w"], "pi": jnp.ones_like(p["pi"]), "omega": jnp.full_like(p["omega"], omega)}
    return out

