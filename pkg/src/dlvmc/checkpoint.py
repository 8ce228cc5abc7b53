"""Versioned checkpoint container (numpy ``.npz``) with bit-exact round trips."""
from __future__ import annotations

import json

import jax
import jax.numpy as jnp
import numpy as np

from .sampler import WalkerBatch
from .wavefunction import flatten_params, unflatten_params

FORMAT_VERSION = 1


class CheckpointError(IOError):
    pass


def save_checkpoint(path, params, walkers=None, opt_state=None, step=0, meta=None):
    arrays = {f"params/{k}": v for k, v in flatten_params(params).items()}
    if walkers is not None:
        for name in ("positions", "log_abs", "stepsize", "acc_ema", "key", "step"):
            arrays[f"walkers/{name}"] = np.asarray(getattr(walkers, name))
    if opt_state is not None:
        for i, leaf in enumerate(jax.tree_util.tree_leaves(opt_state)):
            arrays[f"opt/{i:05d}"] = np.asarray(leaf)
    header = {"format_version": FORMAT_VERSION, "step": int(step), **(meta or {})}
    arrays["header"] = np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path, opt_template=None):
    """Return ``{"params", "walkers", "opt_state", "step", "meta"}``.

    ``opt_state`` is rebuilt only when ``opt_template`` (a freshly initialized
    optimizer state of the same structure) is given.
    """
    try:
        data = np.load(path)
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    with data:
        if "header" not in data.files:
            raise CheckpointError(f"{path} is not a checkpoint (missing header)")
        header = json.loads(data["header"].tobytes().decode())
        if header.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {header.get('format_version')}")
        params = unflatten_params({k[len("params/"):]: data[k] for k in data.files
                                   if k.startswith("params/")})
        walkers = None
        if "walkers/positions" in data.files:
            walkers = WalkerBatch(*(jnp.asarray(data[f"walkers/{n}"]) for n in
                                    ("positions", "log_abs", "stepsize", "acc_ema", "key", "step")))
        opt_state = None
        opt_keys = sorted(k for k in data.files if k.startswith("opt/"))
        if opt_template is not None and opt_keys:
            treedef = jax.tree_util.tree_structure(opt_template)
            opt_state = jax.tree_util.tree_unflatten(treedef, [jnp.asarray(data[k]) for k in opt_keys])
    return {"params": params, "walkers": walkers, "opt_state": opt_state,
            "step": header["step"], "meta": header}
