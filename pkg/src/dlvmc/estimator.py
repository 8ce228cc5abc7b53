"""Estimator-style front end over the functional wavefunction code."""
from __future__ import annotations

import jax
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .diff import make_local_energy
from .frames import FrameSet, compute_frames
from .scf.hf import run_scf
from .scf.integrals import compute_integrals
from .train import TrainConfig, VMC
from .validation import check_positions
from .wavefunction import Ansatz, ModelConfig


class NeuralWavefunction(BaseEstimator):
    """Fit a neural wavefunction to a :class:`~dlvmc.system.Molecule`.

    ``fit`` runs SCF, frame construction, pretraining and variational
    optimization; ``predict`` returns ``log|psi|`` for electron configurations
    and ``score`` the evaluated energy (higher is worse, so it returns ``-E``).

    Examples
    --------
    >>> from dlvmc import Molecule, NeuralWavefunction
    >>> mol = Molecule.from_atoms([("H", (0.0, 0.0, 0.0))])
    >>> wf = NeuralWavefunction(n_opt=10, n_pretrain=5, n_walkers=64).fit(mol)  # doctest: +SKIP
    """

    def __init__(self, feature_mode="local_frames", embedding_variant="combined",
                 det_mode="dense", envelope_init="z_over_n", n_det=4, width_one=64,
                 width_aux=16, n_iter=2, basis="sto-6g", n_walkers=256, n_decorrelation=10,
                 burn_in=200, n_pretrain=300, n_opt=2000, lr0=1e-3, eval_steps=1000, seed=0):
        self.feature_mode = feature_mode
        self.embedding_variant = embedding_variant
        self.det_mode = det_mode
        self.envelope_init = envelope_init
        self.n_det = n_det
        self.width_one = width_one
        self.width_aux = width_aux
        self.n_iter = n_iter
        self.basis = basis
        self.n_walkers = n_walkers
        self.n_decorrelation = n_decorrelation
        self.burn_in = burn_in
        self.n_pretrain = n_pretrain
        self.n_opt = n_opt
        self.lr0 = lr0
        self.eval_steps = eval_steps
        self.seed = seed

    def _configs(self):
        model = ModelConfig(self.feature_mode, self.embedding_variant, self.det_mode,
                            self.envelope_init, self.n_det, self.width_one, self.width_aux,
                            self.n_iter)
        train = TrainConfig(n_walkers=self.n_walkers, n_decorrelation=self.n_decorrelation,
                            burn_in=self.burn_in, n_pretrain=self.n_pretrain, n_opt=self.n_opt,
                            lr0=self.lr0, eval_steps=max(self.eval_steps, 0))
        return model, train

    def fit(self, mol, y=None):
        model, train = self._configs()
        scf = run_scf(compute_integrals(mol, self.basis), mol)
        frames = (compute_frames(scf, mol) if model.feature_mode == "local_frames"
                  else FrameSet.identity(mol.n_nuc))
        ansatz = Ansatz(mol, frames, model)
        vmc = VMC(ansatz, train)
        params = ansatz.init_params(self.seed)
        walkers = vmc.burn_in(params, vmc.init_walkers(params, self.seed))
        params, walkers, losses = vmc.pretrain(params, scf, walkers, seed=self.seed)
        walkers = vmc.burn_in(params, walkers)
        params, _, walkers, rows = vmc.optimize(params, walkers)
        self.mol_ = mol
        self.scf_ = scf
        self.frames_ = frames
        self.ansatz_ = ansatz
        self.params_ = params
        self.walkers_ = walkers
        self.pretrain_losses_ = np.asarray(losses)
        self.history_ = rows
        self._vmc = vmc
        self.energy_ = None
        if self.eval_steps > 0:
            self.energy_, self.walkers_, _ = vmc.evaluate(params, walkers)
        return self

    def predict(self, r):
        """``log|psi|`` for configurations of shape ``(n_el, 3)`` or ``(N, n_el, 3)``."""
        check_is_fitted(self, "params_")
        r = check_positions(r, self.mol_.n_el)
        out = np.asarray(self._vmc.log_abs_batch(self.params_, r.reshape(-1, *r.shape[-2:])))
        return out if r.ndim == 3 else out[0]

    def local_energy(self, r):
        check_is_fitted(self, "params_")
        r = check_positions(r, self.mol_.n_el)
        fn = jax.vmap(make_local_energy(self.ansatz_.log_abs, self.mol_), in_axes=(None, 0))
        out = np.asarray(fn(self.params_, r.reshape(-1, *r.shape[-2:])).e_local)
        return out if r.ndim == 3 else out[0]

    def evaluate(self, n_steps=None):
        """Fresh frozen-parameter estimate continuing from the stored walkers."""
        check_is_fitted(self, "params_")
        est, self.walkers_, _ = self._vmc.evaluate(self.params_, self.walkers_, n_steps)
        return est

    def score(self, mol=None, y=None):
        check_is_fitted(self, "params_")
        est = self.energy_ if self.energy_ is not None else self.evaluate()
        return -est.mean
