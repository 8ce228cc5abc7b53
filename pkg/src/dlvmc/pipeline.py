"""End-to-end run orchestration shared by the CLI and the estimator."""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .frames import FrameSet, compute_frames
from .scf.hf import run_scf
from .scf.integrals import compute_integrals
from .train import LOG_COLUMNS, VMC, NumericAbort
from .wavefunction import Ansatz, count_params

log = logging.getLogger(__name__)


@dataclass
class System:
    mol: object
    scf: object
    frames: FrameSet


def build_system(cfg):
    """Molecule, converged SCF and local frames for a :class:`~dlvmc.config.RunConfig`."""
    mol = cfg.molecule()
    tables = compute_integrals(mol, cfg.scf.basis)
    scf = run_scf(tables, mol, cfg.scf.max_iter, cfg.scf.density_mix, cfg.scf.tol)
    if cfg.model.feature_mode == "local_frames":
        frames = compute_frames(scf, mol, cfg.frames.tol_degenerate)
    else:
        frames = FrameSet.identity(mol.n_nuc)
    return System(mol, scf, frames)


def make_run_dir(cfg, run_dir=None):
    if run_dir is None:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        run_dir = Path(cfg.output_dir) / f"{cfg.name}-{stamp}"
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(cfg.dumps())
    return run_dir


class CsvLog:
    """Training log with ``repr`` float formatting so reruns compare bit-exactly."""

    def __init__(self, path):
        self.fh = open(path, "w", newline="", encoding="utf-8")
        self.writer = csv.writer(self.fh)
        self.writer.writerow(LOG_COLUMNS)

    def __call__(self, row):
        self.writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in LOG_COLUMNS])

    def close(self):
        self.fh.close()


def train_run(cfg, run_dir=None, *, do_pretrain=True, do_optimize=True, do_evaluate=True,
              checkpoint=None, progress=None):
    """Run (a subset of) pretrain -> optimize -> evaluate and write all artifacts.

    Returns a dict with the run directory, the energy estimate (if evaluated)
    and final parameters.
    """
    run_dir = make_run_dir(cfg, run_dir)
    system = build_system(cfg)
    ansatz = Ansatz(system.mol, system.frames, cfg.model)
    vmc = VMC(ansatz, cfg.train)
    start = 0
    opt_state = None
    if checkpoint is not None:
        state = load_checkpoint(checkpoint, vmc.init_opt_state(ansatz.init_params(cfg.seed)))
        params, walkers, opt_state, start = (state["params"], state["walkers"], state["opt_state"],
                                             state["step"])
        if walkers is None:
            walkers = vmc.init_walkers(params, cfg.seed)
    else:
        params = ansatz.init_params(cfg.seed)
        walkers = vmc.init_walkers(params, cfg.seed)
    info = {"name": cfg.name, "n_params": count_params(params), "hf_energy": system.scf.energy,
            "scf_converged": system.scf.converged, "n_el": system.mol.n_el}
    if do_pretrain and checkpoint is None:
        walkers = vmc.burn_in(params, walkers)
        params, walkers, losses = vmc.pretrain(params, system.scf, walkers, seed=cfg.seed)
        info["pretrain_loss_first"] = losses[0] if losses else None
        info["pretrain_loss_last"] = losses[-1] if losses else None
        with open(run_dir / "pretrain.csv", "w", encoding="utf-8") as fh:
            fh.write("step,loss\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(losses)))
        save_checkpoint(run_dir / "pretrained.npz", params, walkers, step=0)
    if do_optimize:
        if checkpoint is None:
            walkers = vmc.burn_in(params, walkers)
        csv_log = CsvLog(run_dir / "log.csv")

        def ckpt(step, p, o, w):
            save_checkpoint(run_dir / f"checkpoint_{step:06d}.npz", p, w, o, step)

        def on_row(row):
            csv_log(row)
            if progress is not None:
                progress(row)

        try:
            params, opt_state, walkers, _ = vmc.optimize(params, walkers, opt_state, start_step=start,
                                                         callback=on_row, checkpoint_fn=ckpt)
        except NumericAbort as exc:
            save_checkpoint(run_dir / "abort.npz", exc.params, exc.walkers, None, exc.step)
            (run_dir / "abort.json").write_text(json.dumps({"step": exc.step, "error": str(exc)}))
            raise
        finally:
            csv_log.close()
        start += cfg.train.n_opt
        save_checkpoint(run_dir / "final.npz", params, walkers, opt_state, start)
    estimate = None
    if do_evaluate and cfg.train.eval_steps > 0:
        estimate, walkers, means = vmc.evaluate(params, walkers)
        result = {**info, **estimate.to_dict()}
        (run_dir / "energy.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
        np.savetxt(run_dir / "eval_means.txt", means)
    (run_dir / "summary.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    return {"run_dir": run_dir, "estimate": estimate, "params": params, "walkers": walkers,
            "system": system, "vmc": vmc}


def evaluate_run(cfg, checkpoint, run_dir=None):
    """Evaluate frozen parameters from ``checkpoint``; writes ``energy.json``."""
    if not Path(checkpoint).exists():
        raise FileNotFoundError(f"checkpoint {checkpoint} does not exist")
    return train_run(cfg, run_dir, do_pretrain=False, do_optimize=False, do_evaluate=True,
                     checkpoint=checkpoint)
