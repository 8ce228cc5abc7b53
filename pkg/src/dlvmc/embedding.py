"""Electron embedding: a one-electron residual stream fed by convolution-like
aggregation over electron-electron and electron-nucleus streams.

Variants:

``combined``
    ``f_i = [h_i, mean_up h, mean_dn h, s_el_i, s_nuc_i]`` with learned kernels
    ``s_el_i = sum_j B_s(g_ij) * C_s(h_j)`` (s = same/diff spin) and
    ``s_nuc_i = sum_I B_nuc(v_iI) * C_nuc(Zemb_I)``.
``ferminet_like``
    ``B = identity``, ``C = 1``, no electron-nucleus stream.
``paulinet_like``
    ``f_i = [s_el_i, s_nuc_i]``; kernels act on the input distances, the
    auxiliary streams are not updated.
"""
from __future__ import annotations

from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

VARIANTS = ("combined", "ferminet_like", "paulinet_like")


class EmbeddingConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingShape:
    """Static layer sizes for one molecule and variant."""
    variant: str
    n_iter: int
    width_one: int
    width_aux: int
    d_h: int
    d_v: int
    d_g: int
    n_nuc: int

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise EmbeddingConfigError(f"unknown embedding variant {self.variant!r}")
        if min(self.n_iter, self.width_one, self.width_aux) < 1:
            raise EmbeddingConfigError("n_iter and widths must be positive")

    def h_dim(self, l):
        return self.d_h if l == 0 else self.width_one

    def g_dim(self, l):
        if self.variant == "paulinet_like":
            return self.d_g
        return self.d_g if l == 0 else self.width_aux

    def v_dim(self, l):
        if self.variant == "paulinet_like":
            return self.d_v
        return self.d_v if l == 0 else self.width_aux

    def f_dim(self, l):
        h, a = self.h_dim(l), self.width_aux
        if self.variant == "combined":
            return 3 * h + 2 * a
        if self.variant == "ferminet_like":
            return 3 * h + self.g_dim(l)
        return 2 * a

    def layer_shapes(self):
        """``{name: (fan_in, fan_out)}`` for every affine map, keyed ``"l/name"``."""
        out = {}
        a = self.width_aux
        for l in range(self.n_iter):
            out[f"{l}/one"] = (self.f_dim(l), self.width_one)
            if self.variant != "paulinet_like" and l < self.n_iter - 1:
                out[f"{l}/g_same"] = (self.g_dim(l), a)
                out[f"{l}/g_diff"] = (self.g_dim(l), a)
                if self.variant == "combined":
                    out[f"{l}/v_nuc"] = (self.v_dim(l), a)
            if self.variant != "ferminet_like":
                out[f"{l}/b_same"] = (self.g_dim(l), a)
                out[f"{l}/b_diff"] = (self.g_dim(l), a)
                out[f"{l}/c_same"] = (self.h_dim(l), a)
                out[f"{l}/c_diff"] = (self.h_dim(l), a)
                out[f"{l}/b_nuc"] = (self.v_dim(l), a)
                out[f"{l}/c_nuc"] = (a, a)
        return out


def init_embedding(key, shape):
    """Weights ~ N(0, 1/fan_in), zero biases; nucleus embeddings ~ N(0, 1)."""
    params = {}
    layers = shape.layer_shapes()
    keys = jax.random.split(key, len(layers) + 1)
    for k, (name, (fan_in, fan_out)) in zip(keys[1:], sorted(layers.items())):
        params[name] = {
            "w": jax.random.normal(k, (fan_in, fan_out)) / np.sqrt(fan_in),
            "b": jnp.zeros((fan_out,)),
        }
    if shape.variant != "ferminet_like":
        params["z_emb"] = jax.random.normal(keys[0], (shape.n_nuc, shape.width_aux))
    return params


def _dense(p, x):
    return jnp.tanh(x @ p["w"] + p["b"])


def _residual(new, old):
    return new + old if new.shape == old.shape else new


def _spin_mean(h, n_up):
    n_el = h.shape[0]
    up = jnp.mean(h[:n_up], axis=0) if n_up > 0 else jnp.zeros(h.shape[1:])
    dn = jnp.mean(h[n_up:], axis=0) if n_el > n_up else jnp.zeros(h.shape[1:])
    return jnp.broadcast_to(up, h.shape), jnp.broadcast_to(dn, h.shape)


def _pair_map(p_same, p_diff, x, same):
    return jnp.where(same[..., None], _dense(p_same, x), _dense(p_diff, x))


def embed(params, feats, n_up, shape):
    """Final one-electron embeddings ``h^L`` of shape ``(n_el, width_one)``."""
    h, v, g = feats.h0, feats.v0, feats.g0
    n_el = h.shape[0]
    spin = jnp.arange(n_el) < n_up
    same = spin[:, None] == spin[None, :]
    variant = shape.variant
    for l in range(shape.n_iter):
        p = lambda name: params[f"{l}/{name}"]
        up, dn = _spin_mean(h, n_up)
        if variant == "ferminet_like":
            s_el = jnp.sum(g, axis=1)
            f = jnp.concatenate([h, up, dn, s_el], axis=-1)
        else:
            b = _pair_map(p("b_same"), p("b_diff"), g, same)
            c_same, c_diff = _dense(p("c_same"), h), _dense(p("c_diff"), h)
            s_el = jnp.sum(jnp.where(same[..., None], b * c_same[None], b * c_diff[None]), axis=1)
            s_nuc = jnp.sum(_dense(p("b_nuc"), v) * _dense(p("c_nuc"), params["z_emb"])[None], axis=1)
            if variant == "combined":
                f = jnp.concatenate([h, up, dn, s_el, s_nuc], axis=-1)
            else:
                f = jnp.concatenate([s_el, s_nuc], axis=-1)
        h_new = _residual(_dense(p("one"), f), h)
        if variant != "paulinet_like" and l < shape.n_iter - 1:
            g = _residual(_pair_map(p("g_same"), p("g_diff"), g, same), g)
            if variant == "combined":
                v = _residual(_dense(p("v_nuc"), v), v)
        h = h_new
    return h
