"""Command-line runner: ``dlvmc {scf,frames,pretrain,train,evaluate,ablate,report}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import CheckpointError
from .config import ABLATION_SYSTEMS, PRESETS, ConfigError, ablation_cells, load_config
from .pipeline import build_system, evaluate_run, make_run_dir, train_run
from .report import report
from .scf.basis import UnsupportedBasisError
from .system import GeometryError
from .train import NumericAbort

log = logging.getLogger("dlvmc")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


def _add_config_args(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="start from a shipped preset")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted override, e.g. train.lr0=1e-3 (repeatable)")
    p.add_argument("--run-dir", help="output directory (default: timestamped under output_dir)")


def build_parser():
    parser = argparse.ArgumentParser(prog="dlvmc", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scf", help="run Hartree-Fock and report the energy")
    _add_config_args(p)
    p.add_argument("--dump-integrals", metavar="PATH", help="write S, T, V, ERI and densities (.npz)")

    p = sub.add_parser("frames", help="compute local frames")
    _add_config_args(p)
    p.add_argument("--dump-frames", metavar="PATH", help="write frames as a plain-text table")

    for name, text in (("pretrain", "HF pretraining only"), ("train", "pretrain, optimize, evaluate")):
        p = sub.add_parser(name, help=text)
        _add_config_args(p)
        p.add_argument("--resume", metavar="CHECKPOINT", help="continue optimization from a checkpoint")

    p = sub.add_parser("evaluate", help="evaluate frozen parameters from a checkpoint")
    _add_config_args(p)
    p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("ablate", help="run an ablation preset matrix")
    _add_config_args(p)
    p.add_argument("--ablation", default="waterfall-lite", choices=sorted(ABLATION_SYSTEMS))
    p.add_argument("--systems", nargs="+", help="system presets (default depends on --ablation)")

    p = sub.add_parser("report", help="merge finished runs into a table and SVG chart")
    p.add_argument("runs", nargs="+", help="run directories")
    p.add_argument("--out", default="report", help="output directory")
    return parser


def _config(args):
    return load_config(args.config, args.set, args.preset)


def _progress(row):
    if row["step"] % 100 == 0:
        log.info("step %d  E=%.6f  var=%.4g  acc=%.3f", row["step"], row["energy_mean"],
                 row["energy_var"], row["acceptance"])


def cmd_scf(args):
    cfg = _config(args)
    run_dir = make_run_dir(cfg, args.run_dir)
    system = build_system(cfg)
    scf = system.scf
    trace = float(np.trace(scf.density @ scf.overlap))
    result = {"energy": scf.energy, "converged": scf.converged, "n_iter": scf.n_iter,
              "trace_DS": trace, "n_el": system.mol.n_el, "basis": cfg.scf.basis}
    (run_dir / "scf.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    if args.dump_integrals:
        t = scf.tables
        np.savez(args.dump_integrals, format_version=np.int64(1), S=t.S, T=t.T, V=t.V, eri=t.eri,
                 density_up=scf.density_up, density_dn=scf.density_dn, e_nuc=np.float64(t.e_nuc))
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


def cmd_frames(args):
    cfg = _config(args)
    run_dir = make_run_dir(cfg, args.run_dir)
    # frames are always computed here, whatever the feature mode
    cfg_frames = load_config(args.config, list(args.set) + ['model.feature_mode="local_frames"'],
                             args.preset)
    text = build_system(cfg_frames).frames.dumps()
    (run_dir / "frames.txt").write_text(text)
    if args.dump_frames:
        Path(args.dump_frames).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _print_result(out):
    est = out["estimate"]
    msg = {"run_dir": str(out["run_dir"])}
    if est is not None:
        msg.update(energy=est.mean, stderr=est.stderr)
    print(json.dumps(msg, sort_keys=True))


def cmd_pretrain(args):
    cfg = _config(args)
    _print_result(train_run(cfg, args.run_dir, do_optimize=False, do_evaluate=False))
    return EXIT_OK


def cmd_train(args):
    cfg = _config(args)
    out = train_run(cfg, args.run_dir, checkpoint=args.resume, progress=_progress)
    _print_result(out)
    return EXIT_OK


def cmd_evaluate(args):
    cfg = _config(args)
    if not Path(args.checkpoint).is_file():
        raise ConfigError(f"checkpoint {args.checkpoint} does not exist")
    _print_result(evaluate_run(cfg, args.checkpoint, args.run_dir))
    return EXIT_OK


def cmd_ablate(args):
    systems = args.systems or ABLATION_SYSTEMS[args.ablation]
    cells = ablation_cells(args.ablation)
    # validate every cell before spending compute on any of them
    configs = [(s, name, load_config(args.config, ov + list(args.set), s))
               for s in systems for name, ov in cells]
    stamp = time.strftime("%Y%m%d-%H%M%S")
    root = Path(args.run_dir or Path(configs[0][2].output_dir) / f"ablate-{args.ablation}-{stamp}")
    root.mkdir(parents=True, exist_ok=True)
    dirs = []
    for system, name, cfg in configs:
        d = root / f"{system}__{name.replace('+', 'plus_').replace('-', 'minus_')}"
        log.info("ablation cell %s / %s", system, name)
        train_run(cfg, d, progress=_progress)
        dirs.append(d)
    report(dirs, root / "report")
    print(json.dumps({"run_dir": str(root), "cells": len(dirs)}))
    return EXIT_OK


def cmd_report(args):
    records = report(args.runs, args.out)
    print(json.dumps({"rows": len(records), "out": args.out}))
    return EXIT_OK


COMMANDS = {"scf": cmd_scf, "frames": cmd_frames, "pretrain": cmd_pretrain, "train": cmd_train,
            "evaluate": cmd_evaluate, "ablate": cmd_ablate, "report": cmd_report}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, GeometryError, UnsupportedBasisError, CheckpointError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericAbort as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
