"""HF pretraining, variational optimization and frozen-parameter evaluation."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, replace

import jax
import jax.numpy as jnp
import numpy as np
import optax

from .diff import make_local_energy
from .sampler import batched, init_walkers, make_decorrelate
from .scf.hf import ao_values, pack_basis

log = logging.getLogger(__name__)

LOG_COLUMNS = ("step", "energy_mean", "energy_var", "acceptance", "stepsize", "lr",
               "clip_fraction", "grad_norm")


class NumericAbort(RuntimeError):
    """Non-finite energy or gradient during optimization."""

    def __init__(self, message, step, params=None, walkers=None):
        super().__init__(message)
        self.step = step
        self.params = params
        self.walkers = walkers


@dataclass(frozen=True)
class TrainConfig:
    n_walkers: int = 2048
    n_decorrelation: int = 20
    burn_in: int = 500
    move: str = "all_electron"
    init_stepsize: float = 0.1
    n_pretrain: int = 1000
    pretrain_lr: float = 3e-3
    n_opt: int = 50000
    lr0: float = 1e-3
    decay_time: float = 6000.0
    norm_constraint: float = 1.0
    clip_window: float = 5.0
    eval_steps: int = 10000
    eval_decorrelation: int = 20
    checkpoint_every: int = 1000

    def __post_init__(self):
        for name in ("n_walkers", "n_decorrelation", "eval_decorrelation", "checkpoint_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("burn_in", "n_pretrain", "n_opt", "eval_steps"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.lr0 <= 0 or self.decay_time <= 0 or self.norm_constraint <= 0:
            raise ValueError("lr0, decay_time and norm_constraint must be positive")


def learning_rate(t, lr0, decay_time=6000.0):
    """``lr0 / (1 + t / decay_time)``."""
    return lr0 / (1.0 + t / decay_time)


def clip_local_energy(e, window=5.0):
    """Clip to ``median +/- window * mean|e - median|``; returns ``(clipped, fraction clipped)``."""
    median = jnp.median(e)
    dev = jnp.mean(jnp.abs(e - median))
    lo, hi = median - window * dev, median + window * dev
    clipped = jnp.clip(e, lo, hi)
    return clipped, jnp.mean((e < lo) | (e > hi))


def vmc_gradient(log_abs_batch, params, positions, e_local):
    """``2 <(E_L - <E_L>) grad_theta log|psi|>`` over the batch."""
    n = e_local.shape[0]
    # shifting by one sample first makes a constant batch center to exactly zero
    shifted = e_local - e_local[0]
    centered = shifted - jnp.mean(shifted)
    _, vjp = jax.vjp(lambda p: log_abs_batch(p, positions), params)
    return vjp(2.0 * centered / n)[0]


def make_optimizer(cfg):
    schedule = lambda t: learning_rate(t, cfg.lr0, cfg.decay_time)
    return optax.chain(optax.clip_by_global_norm(cfg.norm_constraint), optax.scale_by_adam(),
                       optax.scale_by_schedule(lambda t: -schedule(t)))


def _nan_to_inf(x):
    return jnp.where(jnp.isnan(x), jnp.inf, x)


@dataclass
class EnergyEstimate:
    mean: float
    stderr: float
    variance: float
    n_samples: int
    autocorrelation_time: float
    naive_stderr: float

    def to_dict(self):
        return asdict(self)


def blocking_stderr(series, min_blocks=16):
    """Autocorrelation-corrected standard error by successive pair averaging.

    Returns ``(stderr, naive_stderr, tau)``; ``stderr`` is the largest blocked
    estimate over levels that keep at least ``min_blocks`` blocks, so it is
    never below the naive value.
    """
    x = np.asarray(series, dtype=np.float64)
    n = len(x)
    if n < 2:
        return 0.0, 0.0, 1.0
    naive = float(np.std(x, ddof=1) / np.sqrt(n))
    best = naive
    while len(x) >= 2 * min_blocks:
        x = 0.5 * (x[: len(x) // 2 * 2:2] + x[1: len(x) // 2 * 2:2])
        best = max(best, float(np.std(x, ddof=1) / np.sqrt(len(x))))
    tau = (best / naive) ** 2 if naive > 0 else 1.0
    return best, naive, tau


class VMC:
    """Pretraining, optimization and evaluation for one ansatz.

    All stochastic state lives in :class:`~dlvmc.sampler.WalkerBatch` objects
    and optimizer states passed explicitly; the object itself only caches
    compiled functions.
    """

    def __init__(self, ansatz, cfg=TrainConfig()):
        self.ansatz = ansatz
        self.cfg = cfg
        self.mol = ansatz.mol
        self.log_abs_batch = batched(ansatz.log_abs)
        self.local_energy_batch = jax.vmap(make_local_energy(ansatz.log_abs, ansatz.mol),
                                           in_axes=(None, 0))
        self.optimizer = make_optimizer(cfg)
        self._decorrelate = make_decorrelate(self.log_abs_batch, ansatz.nuc_pos,
                                             cfg.n_decorrelation, cfg.move, adapt=True)
        self._eval_decorrelate = make_decorrelate(self.log_abs_batch, ansatz.nuc_pos,
                                                  cfg.eval_decorrelation, cfg.move, adapt=False)
        self._train_step = jax.jit(self._train_step_impl)
        self._eval_step = jax.jit(self._eval_step_impl)

    # -- walkers -------------------------------------------------------------
    def init_walkers(self, params, seed):
        return init_walkers(self.mol, jax.jit(self.log_abs_batch), params, self.cfg.n_walkers,
                            seed, self.cfg.init_stepsize)

    def burn_in(self, params, walkers, n_steps=None):
        n_steps = self.cfg.burn_in if n_steps is None else n_steps
        if n_steps <= 0:
            return walkers
        run = make_decorrelate(self.log_abs_batch, self.ansatz.nuc_pos, n_steps, self.cfg.move)
        return run(params, walkers)[0]

    # -- pretraining ------------------------------------------------------------
    def pretrain(self, params, scf, walkers, seed=0, n_steps=None, callback=None):
        """Fit orbital matrices to HF orbitals; envelope parameters stay fixed.

        Returns ``(params, walkers, losses)``. Walkers for the ``|psi|^2`` half of
        the batch are returned for reuse in the variational phase.
        """
        n_steps = self.cfg.n_pretrain if n_steps is None else n_steps
        if n_steps == 0:
            return params, walkers, []
        if not scf.converged:
            raise RuntimeError("refusing to pretrain against a non-converged SCF")
        step_fn, hf_walkers, opt_state = self._make_pretrain(params, scf, seed)
        train = {k: params[k] for k in ("embedding",)}
        train["w_up"], train["w_dn"] = params["up"]["w"], params["dn"]["w"]
        losses = []
        for t in range(n_steps):
            train, opt_state, walkers, hf_walkers, loss = step_fn(params, train, opt_state,
                                                                   walkers, hf_walkers)
            losses.append(float(loss))
            if callback is not None:
                callback(t, losses[-1])
        params = _merge_pretrained(params, train)
        walkers = replace(walkers, log_abs=jax.jit(self.log_abs_batch)(params, walkers.positions))
        return params, walkers, losses

    def _make_pretrain(self, params, scf, seed):
        ans = self.ansatz
        packed = tuple(jnp.asarray(a) for a in pack_basis(scf.basis))
        c_up = jnp.asarray(scf.occupied("up"))
        c_dn = jnp.asarray(scf.occupied("dn"))
        n_up, n_dn = ans.n_up, ans.n_dn
        dense = ans.cfg.det_mode == "dense"

        def hf_orbitals(r):
            ao = ao_values(packed, r, jnp)
            return (ao[:n_up] @ c_up).T, (ao[n_up:] @ c_dn).T    # (orbital, electron)

        def hf_log_abs(_, r):
            up, dn = hf_orbitals(r)
            out = jnp.linalg.slogdet(up)[1]
            if n_dn:
                out = out + jnp.linalg.slogdet(dn)[1]
            return out

        def targets(r):
            up, dn = hf_orbitals(r)
            if dense:
                up = jnp.concatenate([up, jnp.zeros((n_dn, n_up))], axis=0)
                dn = jnp.concatenate([jnp.zeros((n_up, n_dn)), dn], axis=0)
            return up, dn

        def loss_fn(train, fixed, r):
            p = _merge_pretrained(fixed, train)
            m_up, m_dn = ans.orbitals(p, r)
            t_up, t_dn = targets(r)
            sq = jnp.sum((m_up - t_up[None]) ** 2) + jnp.sum((m_dn - t_dn[None]) ** 2)
            return sq / (m_up.size + m_dn.size)

        hf_batch = jax.vmap(hf_log_abs, in_axes=(None, 0))
        hf_walkers = init_walkers(self.mol, jax.jit(hf_batch), None, self.cfg.n_walkers,
                                  seed + 7919, self.cfg.init_stepsize)
        psi_mh = make_decorrelate(self.log_abs_batch, ans.nuc_pos, 1, self.cfg.move)
        hf_mh = make_decorrelate(hf_batch, ans.nuc_pos, 1, self.cfg.move)
        opt = optax.adam(self.cfg.pretrain_lr)
        train0 = {"embedding": params["embedding"], "w_up": params["up"]["w"],
                  "w_dn": params["dn"]["w"]}
        opt_state = opt.init(train0)
        batch_loss = lambda tr, fixed, rs: jnp.mean(jax.vmap(loss_fn, in_axes=(None, None, 0))(tr, fixed, rs))
        half = self.cfg.n_walkers // 2

        @jax.jit
        def step(fixed, train, opt_state, walkers, hf_walkers):
            p = _merge_pretrained(fixed, train)
            walkers = replace(walkers, log_abs=self.log_abs_batch(p, walkers.positions))
            walkers, _ = psi_mh(p, walkers)
            hf_walkers, _ = hf_mh(None, hf_walkers)
            rs = jnp.concatenate([walkers.positions[:self.cfg.n_walkers - half],
                                  hf_walkers.positions[:half]], axis=0)
            loss, grads = jax.value_and_grad(batch_loss)(train, fixed, rs)
            updates, opt_state = opt.update(grads, opt_state, train)
            return optax.apply_updates(train, updates), opt_state, walkers, hf_walkers, loss

        return step, hf_walkers, opt_state

    # -- optimization -------------------------------------------------------------
    def init_opt_state(self, params):
        return self.optimizer.init(params)

    def _train_step_impl(self, params, opt_state, walkers, t):
        walkers, acc = self._decorrelate(params, walkers)
        parts = self.local_energy_batch(params, walkers.positions)
        e = _nan_to_inf(parts.e_local)
        e_clip, frac = clip_local_energy(e, self.cfg.clip_window)
        grads = vmc_gradient(self.log_abs_batch, params, walkers.positions, e_clip)
        gnorm = optax.tree.norm(grads)
        updates, opt_state = self.optimizer.update(grads, opt_state, params)
        new_params = optax.apply_updates(params, updates)
        walkers = replace(walkers, log_abs=self.log_abs_batch(new_params, walkers.positions))
        stats = {
            "energy_mean": jnp.mean(e), "energy_var": jnp.var(e), "acceptance": acc,
            "stepsize": walkers.stepsize, "lr": learning_rate(t, self.cfg.lr0, self.cfg.decay_time),
            "clip_fraction": frac, "grad_norm": gnorm,
        }
        return new_params, opt_state, walkers, stats

    def optimize(self, params, walkers, opt_state=None, n_steps=None, start_step=0,
                 callback=None, checkpoint_fn=None):
        """Variational optimization; returns ``(params, opt_state, walkers, log_rows)``.

        ``callback(row)`` receives each log row; ``checkpoint_fn(step, params,
        opt_state, walkers)`` is called every ``checkpoint_every`` steps.
        """
        n_steps = self.cfg.n_opt if n_steps is None else n_steps
        if opt_state is None:
            opt_state = self.init_opt_state(params)
        rows = []
        for t in range(start_step, start_step + n_steps):
            new_params, new_opt, new_walkers, stats = self._train_step(
                params, opt_state, walkers, jnp.asarray(t, dtype=jnp.float64))
            stats = {k: float(v) for k, v in stats.items()}
            if not (np.isfinite(stats["energy_mean"]) and np.isfinite(stats["grad_norm"])):
                if checkpoint_fn is not None:
                    checkpoint_fn(t, params, opt_state, walkers)
                raise NumericAbort(f"non-finite energy or gradient at step {t}", t, params, walkers)
            params, opt_state, walkers = new_params, new_opt, new_walkers
            row = {"step": t, **stats}
            rows.append(row)
            if callback is not None:
                callback(row)
            if checkpoint_fn is not None and (t + 1) % self.cfg.checkpoint_every == 0:
                checkpoint_fn(t + 1, params, opt_state, walkers)
        return params, opt_state, walkers, rows

    # -- evaluation ---------------------------------------------------------------
    def _eval_step_impl(self, params, walkers):
        walkers, acc = self._eval_decorrelate(params, walkers)
        e = self.local_energy_batch(params, walkers.positions).e_local
        return walkers, e, acc

    def evaluate(self, params, walkers, n_steps=None):
        """Frozen-parameter energy estimate; returns ``(EnergyEstimate, walkers, per-step means)``."""
        n_steps = self.cfg.eval_steps if n_steps is None else n_steps
        means, total, total_sq, count = [], 0.0, 0.0, 0
        for _ in range(n_steps):
            walkers, e, _ = self._eval_step(params, walkers)
            e = np.asarray(e)
            means.append(float(np.mean(e)))
            total += float(np.sum(e))
            total_sq += float(np.sum(e * e))
            count += e.size
        mean = total / count
        var = max(total_sq / count - mean * mean, 0.0)
        stderr, naive, tau = blocking_stderr(means)
        return EnergyEstimate(mean, stderr, var, count, tau, naive), walkers, np.asarray(means)


def _merge_pretrained(params, train):
    out = dict(params)
    out["embedding"] = train["embedding"]
    out["up"] = dict(params["up"], w=train["w_up"])
    out["dn"] = dict(params["dn"], w=train["w_dn"])
    return out
