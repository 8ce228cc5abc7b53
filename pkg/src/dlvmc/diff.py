"""Coordinate derivatives of log|psi| and the local energy."""
from __future__ import annotations

from typing import NamedTuple

import jax
import jax.numpy as jnp
import numpy as np

COINCIDENCE_TOL = 1e-12


class RejectedConfigurationError(ValueError):
    """Two particles closer than the coincidence tolerance."""


class NodalSetError(ValueError):
    """Derivatives requested where psi vanishes."""


class LocalEnergyParts(NamedTuple):
    e_kin: jnp.ndarray
    v_ee: jnp.ndarray
    v_en: jnp.ndarray
    v_nn: jnp.ndarray

    @property
    def e_local(self):
        return self.e_kin + self.v_ee + self.v_en + self.v_nn


def grad_log_psi(log_abs_fn, params, r):
    """Gradient of ``log|psi|`` with respect to electron positions, shape of ``r``."""
    return jax.grad(log_abs_fn, argnums=1)(params, r)


def grad_and_laplacian(log_abs_fn, params, r):
    """``(grad, laplacian)`` of ``log|psi|``.

    The Laplacian is the trace of the Hessian, assembled one coordinate at a
    time by a forward-mode derivative of the reverse-mode gradient.
    """
    shape = r.shape
    x = r.reshape(-1)
    f = lambda y: log_abs_fn(params, y.reshape(shape))
    grad_f = jax.grad(f)
    eye = jnp.eye(x.size, dtype=x.dtype)

    def body(i, acc):
        g, dg = jax.jvp(grad_f, (x,), (eye[i],))
        return acc[0] + dg[i], g

    lap, g = jax.lax.fori_loop(0, x.size, lambda i, c: body(i, c), (0.0, jnp.zeros_like(x)))
    return g.reshape(shape), lap


def laplacian_log_psi(log_abs_fn, params, r):
    """Sum over all electrons and directions of second derivatives of ``log|psi|``."""
    return grad_and_laplacian(log_abs_fn, params, r)[1]


def potential_terms(nuc_pos, charges, r):
    """``(v_ee, v_en, v_nn)`` Coulomb energies for one configuration."""
    n_el = r.shape[0]
    rho = jnp.linalg.norm(r[:, None, :] - nuc_pos[None], axis=-1)
    v_en = -jnp.sum(charges[None] / rho)
    iu = np.triu_indices(n_el, 1)
    rij = jnp.linalg.norm(r[:, None, :] - r[None], axis=-1)[iu]
    v_ee = jnp.sum(1.0 / rij)
    n_nuc = nuc_pos.shape[0]
    ju = np.triu_indices(n_nuc, 1)
    rnn = jnp.linalg.norm(nuc_pos[:, None] - nuc_pos[None], axis=-1)[ju]
    v_nn = jnp.sum((charges[:, None] * charges[None])[ju] / rnn)
    return v_ee, v_en, v_nn


def make_local_energy(log_abs_fn, mol):
    """Return ``f(params, r) -> LocalEnergyParts`` for one configuration (jittable)."""
    nuc_pos = jnp.asarray(mol.positions)
    charges = jnp.asarray(mol.charges, dtype=jnp.float64)

    def local_energy(params, r):
        g, lap = grad_and_laplacian(log_abs_fn, params, r)
        e_kin = -0.5 * (lap + jnp.sum(g * g))
        v_ee, v_en, v_nn = potential_terms(nuc_pos, charges, r)
        return LocalEnergyParts(e_kin, v_ee, v_en, v_nn)

    return local_energy


def min_separation(mol, r):
    """Smallest electron-nucleus or electron-electron distance in ``r`` (numpy)."""
    r = np.asarray(r)
    d = np.linalg.norm(r[:, None] - mol.positions[None], axis=-1).min()
    if len(r) > 1:
        iu = np.triu_indices(len(r), 1)
        d = min(d, np.linalg.norm(r[:, None] - r[None], axis=-1)[iu].min())
    return float(d)


def local_energy(log_abs_fn, params, mol, r):
    """Checked single-configuration local energy; raises on particle coincidences."""
    r = jnp.asarray(r, dtype=jnp.float64)
    if min_separation(mol, r) < COINCIDENCE_TOL:
        raise RejectedConfigurationError("particles coincide within 1e-12 bohr")
    if not np.isfinite(float(log_abs_fn(params, r))):
        raise NodalSetError("psi vanishes at this configuration")
    return make_local_energy(log_abs_fn, mol)(params, r)
