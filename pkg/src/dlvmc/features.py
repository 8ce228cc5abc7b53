"""Network input features from electron and nuclear coordinates."""
from __future__ import annotations

from typing import NamedTuple

import jax.numpy as jnp
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .validation import check_positions

FEATURE_MODES = ("local_frames", "raw_diffs", "distances_only")


class FeatureBatch(NamedTuple):
    h0: jnp.ndarray        # (n_el, d_h)
    v0: jnp.ndarray        # (n_el, n_nuc, d_v)
    g0: jnp.ndarray        # (n_el, n_el, d_g)
    rho_norm: jnp.ndarray  # (n_el, n_nuc), used by the envelopes


def feature_dims(mode, n_nuc):
    """``(d_h, d_v, d_g)`` for a feature mode."""
    if mode == "distances_only":
        return n_nuc, 1, 1
    if mode == "local_frames":
        return 4 * n_nuc, 4, 1
    if mode == "raw_diffs":
        return 4 * n_nuc, 4, 4
    raise ValueError(f"unknown feature mode {mode!r}; expected one of {FEATURE_MODES}")


def safe_norm(x, axis=-1):
    """Euclidean norm whose derivative is finite at the origin when the input is masked."""
    sq = jnp.sum(x * x, axis=axis)
    zero = sq == 0.0
    return jnp.where(zero, 0.0, jnp.sqrt(jnp.where(zero, 1.0, sq)))


def build_features(nuc_pos, axes, r, mode="local_frames"):
    """Features for one configuration ``r`` of shape ``(n_el, 3)``.

    ``axes`` holds per-nucleus frames with local axes as columns; the local
    difference vector is ``axes[I].T @ (r_i - R_I)``.
    """
    n_el = r.shape[0]
    n_nuc = nuc_pos.shape[0]
    rho = r[:, None, :] - nuc_pos[None, :, :]
    rho_norm = safe_norm(rho)
    if mode == "local_frames":
        rho_t = jnp.einsum("iIa,Iab->iIb", rho, axes)
    else:
        rho_t = rho
    diff = r[:, None, :] - r[None, :, :]
    eye = jnp.eye(n_el, dtype=bool)
    # diagonal kept at exactly zero without passing sqrt(0) to autodiff
    rij = jnp.where(eye, 0.0, safe_norm(jnp.where(eye[..., None], 1.0, diff)))
    if mode == "distances_only":
        h0 = rho_norm
        v0 = rho_norm[..., None]
        g0 = rij[..., None]
    else:
        v0 = jnp.concatenate([rho_norm[..., None], rho_t], axis=-1)
        h0 = v0.reshape(n_el, 4 * n_nuc)
        if mode == "raw_diffs":
            g0 = jnp.concatenate([rij[..., None], diff], axis=-1)
        else:
            g0 = rij[..., None]
    if mode not in FEATURE_MODES:
        raise ValueError(f"unknown feature mode {mode!r}")
    return FeatureBatch(h0, v0, g0, rho_norm)


class FeatureBuilder(TransformerMixin, BaseEstimator):
    """``fit(mol, frames)`` then ``transform(r)`` for one or many configurations."""

    def __init__(self, mode="local_frames"):
        self.mode = mode

    def fit(self, mol, frames=None):
        feature_dims(self.mode, mol.n_nuc)
        if self.mode == "local_frames" and frames is None:
            raise ValueError("local_frames mode needs a FrameSet")
        self.nuc_pos_ = jnp.asarray(mol.positions)
        self.axes_ = jnp.asarray(frames.axes if frames is not None else np.tile(np.eye(3), (mol.n_nuc, 1, 1)))
        self.n_el_ = mol.n_el
        return self

    def transform(self, r):
        check_is_fitted(self, "nuc_pos_")
        r = check_positions(r, self.n_el_)
        if r.ndim == 2:
            return build_features(self.nuc_pos_, self.axes_, jnp.asarray(r), self.mode)
        rows = [build_features(self.nuc_pos_, self.axes_, jnp.asarray(x), self.mode) for x in r]
        return FeatureBatch(*(jnp.stack(f) for f in zip(*rows)))
