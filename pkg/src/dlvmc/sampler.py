"""Metropolis-Hastings sampling of |psi|^2 with a shared adaptive step size."""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import partial

import jax
import jax.numpy as jnp
import numpy as np

TARGET_ACCEPTANCE = 0.5
ADAPT_RATE = 0.02
EMA_DECAY = 0.9
STEPSIZE_BOUNDS = (1e-4, 10.0)
NUCLEUS_TOL = 1e-12
MOVES = ("all_electron", "one_electron")


@jax.tree_util.register_dataclass
@dataclass(frozen=True)
class WalkerBatch:
    """Walker positions ``(N, n_el, 3)`` with cached ``log|psi|`` and chain state."""
    positions: jnp.ndarray
    log_abs: jnp.ndarray
    stepsize: jnp.ndarray
    acc_ema: jnp.ndarray
    key: jnp.ndarray
    step: jnp.ndarray

    @property
    def n_walkers(self):
        return self.positions.shape[0]


def acceptance_probability(log_new, log_old):
    """``min(1, |psi'|^2 / |psi|^2)`` from log amplitudes."""
    return jnp.minimum(1.0, jnp.exp(2.0 * (log_new - log_old)))


def electron_assignment(mol):
    """Nucleus index for each electron (spin-up block first).

    Each nucleus receives ``Z`` electrons with alternating spins, starting with
    whichever spin has fewer electrons so far.
    """
    up, dn = [], []
    for nuc, z in enumerate(mol.charges):
        start_up = len(up) <= len(dn)
        for j in range(int(z)):
            want_up = start_up == (j % 2 == 0)
            if (want_up and len(up) < mol.n_up) or len(dn) >= mol.n_dn:
                if len(up) < mol.n_up:
                    up.append(nuc)
            else:
                dn.append(nuc)
    # charged species: leftover electrons go to the heaviest nucleus
    heavy = int(np.argmax(mol.charges))
    up += [heavy] * (mol.n_up - len(up))
    dn += [heavy] * (mol.n_dn - len(dn))
    return np.array(up + dn, dtype=np.int64)


def init_walkers(mol, log_abs_batch, params, n_walkers, seed, stepsize=0.1, sigma=1.0):
    """Electrons placed around their assigned nucleus with Gaussian noise of width ``sigma``."""
    if n_walkers < 1:
        raise ValueError("n_walkers must be >= 1")
    key = jax.random.PRNGKey(seed)
    key, sub = jax.random.split(key)
    centers = jnp.asarray(mol.positions[electron_assignment(mol)])
    pos = centers[None] + sigma * jax.random.normal(sub, (n_walkers, mol.n_el, 3))
    return WalkerBatch(pos, log_abs_batch(params, pos), jnp.asarray(stepsize, dtype=jnp.float64),
                       jnp.asarray(TARGET_ACCEPTANCE, dtype=jnp.float64), key, jnp.asarray(0, dtype=jnp.int64))


def _too_close(pos, nuc_pos):
    d = jnp.linalg.norm(pos[..., :, None, :] - nuc_pos, axis=-1)
    return jnp.any(d < NUCLEUS_TOL, axis=(-1, -2))


def _metropolis(log_abs_batch, params, nuc_pos, pos, log_abs, proposal, key):
    new_log = log_abs_batch(params, proposal)
    u = jax.vmap(lambda k: jax.random.uniform(k, dtype=jnp.float64))(key)
    ok = jnp.isfinite(new_log) & ~_too_close(proposal, nuc_pos)
    accept = ok & (jnp.log(u) < 2.0 * (new_log - log_abs))
    pos = jnp.where(accept[:, None, None], proposal, pos)
    log_abs = jnp.where(accept, new_log, log_abs)
    return pos, log_abs, jnp.mean(accept.astype(jnp.float64))


def _walker_keys(key, step, n, salt):
    k = jax.random.fold_in(jax.random.fold_in(key, step), salt)
    return jax.vmap(lambda i: jax.random.fold_in(k, i))(jnp.arange(n))


def mh_step(log_abs_batch, params, batch, nuc_pos, move="all_electron"):
    """One Metropolis-Hastings sweep; returns ``(batch', acceptance fraction)``.

    Random numbers come from per-walker keys derived from ``(key, step, walker)``,
    so trajectories do not depend on how walkers are partitioned.
    """
    n, n_el, _ = batch.positions.shape
    pos, log_abs = batch.positions, batch.log_abs
    if move == "all_electron":
        keys = _walker_keys(batch.key, batch.step, n, 0)
        kp, ku = jax.vmap(jax.random.split, out_axes=1)(keys)
        noise = jax.vmap(lambda k: jax.random.normal(k, (n_el, 3)))(kp)
        pos, log_abs, acc = _metropolis(log_abs_batch, params, nuc_pos, pos, log_abs,
                                        pos + batch.stepsize * noise, ku)
    elif move == "one_electron":
        accs = []
        for i in range(n_el):
            keys = _walker_keys(batch.key, batch.step, n, i)
            kp, ku = jax.vmap(jax.random.split, out_axes=1)(keys)
            noise = jax.vmap(lambda k: jax.random.normal(k, (3,)))(kp)
            prop = pos.at[:, i].add(batch.stepsize * noise)
            pos, log_abs, a = _metropolis(log_abs_batch, params, nuc_pos, pos, log_abs, prop, ku)
            accs.append(a)
        acc = jnp.mean(jnp.stack(accs))
    else:
        raise ValueError(f"unknown move {move!r}; expected one of {MOVES}")
    ema = EMA_DECAY * batch.acc_ema + (1 - EMA_DECAY) * acc
    return replace(batch, positions=pos, log_abs=log_abs, acc_ema=ema, step=batch.step + 1), acc


def adapt_stepsize(batch):
    """``stepsize * exp(0.02 (acc - 0.5))`` clamped to ``[1e-4, 10]`` bohr."""
    new = batch.stepsize * jnp.exp(ADAPT_RATE * (batch.acc_ema - TARGET_ACCEPTANCE))
    return replace(batch, stepsize=jnp.clip(new, *STEPSIZE_BOUNDS))


def make_decorrelate(log_abs_batch, nuc_pos, n_steps, move="all_electron", adapt=True):
    """Jitted ``f(params, batch) -> (batch', mean acceptance)`` applying ``n_steps`` MH steps."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")

    def one(carry, _):
        params, batch = carry
        batch, acc = mh_step(log_abs_batch, params, batch, nuc_pos, move)
        if adapt:
            batch = adapt_stepsize(batch)
        return (params, batch), acc

    @jax.jit
    def run(params, batch):
        (_, batch), accs = jax.lax.scan(one, (params, batch), None, length=n_steps)
        return batch, jnp.mean(accs)

    return run


def decorrelate(log_abs_batch, params, batch, nuc_pos, n_steps=20, move="all_electron", adapt=True):
    return make_decorrelate(log_abs_batch, nuc_pos, n_steps, move, adapt)(params, batch)


def batched(log_abs_fn):
    """Vectorize a single-configuration ``log|psi|`` over walkers."""
    return jax.vmap(log_abs_fn, in_axes=(None, 0))


@partial(jax.jit, static_argnums=0)
def refresh_log_abs(log_abs_batch, params, batch):
    return replace(batch, log_abs=log_abs_batch(params, batch.positions))
