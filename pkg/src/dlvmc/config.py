"""Run configuration: JSON files, dotted overrides and shipped presets."""
from __future__ import annotations

import copy
import dataclasses
import json
from dataclasses import dataclass, field

from .system import Molecule, parse_geometry, read_geometry
from .train import TrainConfig
from .wavefunction import ModelConfig


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key path."""


@dataclass(frozen=True)
class GeometryConfig:
    preset: str | None = None
    path: str | None = None
    xyz: str | None = None
    unit: str = "bohr"
    charge: int = 0
    spin: int | None = None


@dataclass(frozen=True)
class ScfConfig:
    basis: str = "sto-6g"
    max_iter: int = 500
    density_mix: float = 0.5
    tol: float = 1e-8


@dataclass(frozen=True)
class FramesConfig:
    tol_degenerate: float = 1e-6


@dataclass(frozen=True)
class RunConfig:
    name: str = "run"
    seed: int = 0
    output_dir: str = "runs"
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    scf: ScfConfig = field(default_factory=ScfConfig)
    frames: FramesConfig = field(default_factory=FramesConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self):
        return dataclasses.asdict(self)

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def molecule(self):
        g = self.geometry
        sources = [s for s in (g.preset, g.path, g.xyz) if s is not None]
        if len(sources) != 1:
            raise ConfigError("geometry: exactly one of preset, path, xyz must be set")
        if g.preset is not None:
            if g.preset not in GEOMETRIES:
                raise ConfigError(f"geometry.preset: unknown preset {g.preset!r}")
            if g.preset not in GEOMETRIES:
                raise ConfigError(f"geometry.preset: unknown preset {g.preset!r}")
            return Molecule.from_atoms(GEOMETRIES[g.preset], charge=g.charge, spin=g.spin)
        if g.path is not None:
            return read_geometry(g.path, g.unit, g.charge, g.spin)
        return parse_geometry(g.xyz, g.unit, g.charge, g.spin)


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or '<root>'}: expected an object, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"unknown key {where}{unknown[0]}")
    kwargs = {}
    for name, value in data.items():
        sub = _SECTIONS.get((cls, name))
        key = f"{path}.{name}" if path else name
        if sub is not None:
            kwargs[name] = _build(sub, value, key)
        else:
            kwargs[name] = _coerce(value, fields[name], key)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or '<root>'}: {exc}") from None


def _coerce(value, f, key):
    default = f.default
    if value is None or default is None or default is dataclasses.MISSING:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"{key}: expected a string, got {value!r}")
    return value


_SECTIONS = {
    (RunConfig, "geometry"): GeometryConfig,
    (RunConfig, "model"): ModelConfig,
    (RunConfig, "scf"): ScfConfig,
    (RunConfig, "frames"): FramesConfig,
    (RunConfig, "train"): TrainConfig,
}


def config_from_dict(data):
    return _build(RunConfig, data, "")


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data, overrides):
    """Apply ``["train.lr0=1e-3", ...]`` to a nested dict (returns a copy)."""
    data = copy.deepcopy(data)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key.path=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"{key}: {p} is not a section")
        node[parts[-1]] = _parse_value(raw)
    return data


def load_config(path=None, overrides=(), preset=None):
    """Resolve a config from an optional preset, an optional JSON file and overrides."""
    if preset and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")
    data = copy.deepcopy(PRESETS[preset]) if preset else {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            try:
                file_data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        data = _deep_merge(data, file_data)
    return config_from_dict(apply_overrides(data, overrides))


def _deep_merge(a, b):
    out = copy.deepcopy(a)
    for k, v in b.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


GEOMETRIES = {
    "hydrogen": [("H", (0.0, 0.0, 0.0))],
    "helium": [("He", (0.0, 0.0, 0.0))],
    "lithium": [("Li", (0.0, 0.0, 0.0))],
    "h2": [("H", (0.0, 0.0, 0.0)), ("H", (0.0, 0.0, 1.4))],
    "lih": [("Li", (0.0, 0.0, 0.0)), ("H", (0.0, 0.0, 3.015))],
    "n2": [("N", (0.0, 0.0, 0.0)), ("N", (0.0, 0.0, 2.068))],
}

# Desk-scale network used by the small-system presets.
_SMALL_MODEL = {"n_det": 4, "width_one": 64, "width_aux": 16, "n_iter": 2}
_DESK_TRAIN = {"n_walkers": 256, "n_decorrelation": 10, "burn_in": 200, "n_pretrain": 300,
               "eval_steps": 2000, "eval_decorrelation": 5, "checkpoint_every": 500}

PRESETS = {
    "hydrogen": {"name": "hydrogen", "geometry": {"preset": "hydrogen"}, "model": _SMALL_MODEL,
                 "train": {**_DESK_TRAIN, "n_walkers": 512, "n_opt": 1000}},
    "helium": {"name": "helium", "geometry": {"preset": "helium"}, "model": _SMALL_MODEL,
               "train": {**_DESK_TRAIN, "n_opt": 4000}},
    "lithium": {"name": "lithium", "geometry": {"preset": "lithium"}, "model": _SMALL_MODEL,
                "train": {**_DESK_TRAIN, "n_opt": 3000}},
    "h2": {"name": "h2", "geometry": {"preset": "h2"}, "model": _SMALL_MODEL,
           "train": {**_DESK_TRAIN, "n_opt": 4000}},
    "lih": {"name": "lih", "geometry": {"preset": "lih"}, "model": _SMALL_MODEL,
            "train": {**_DESK_TRAIN, "n_opt": 5000}},
    # full-size network and budget; not run in CI
    "n2": {"name": "n2", "geometry": {"preset": "n2"},
           "train": {"n_opt": 50000}},
}

# Ablation axes in the order the improvements are stacked.
ABLATION_AXES = (
    ("dense_det", "model.det_mode", "block", "dense"),
    ("embedding", "model.embedding_variant", "ferminet_like", "combined"),
    ("local_features", "model.feature_mode", "raw_diffs", "local_frames"),
    ("envelope_init", "model.envelope_init", "ones", "z_over_n"),
)


def ablation_cells(kind="waterfall-lite"):
    """``[(cell_name, overrides), ...]`` for an ablation preset.

    ``waterfall-lite`` starts from a FermiNet-like baseline with every axis
    degraded and switches improvements on one at a time; ``single-axis`` starts
    from the full model and degrades one axis per cell.
    """
    if kind == "waterfall-lite":
        state = {key: old for _, key, old, _ in ABLATION_AXES}
        cells = [("baseline", dict(state))]
        for name, key, _, new in ABLATION_AXES:
            state[key] = new
            cells.append((f"+{name}", dict(state)))
    elif kind == "single-axis":
        full = {key: new for _, key, _, new in ABLATION_AXES}
        cells = [("full", dict(full))]
        for name, key, old, _ in ABLATION_AXES:
            cells.append((f"-{name}", {**full, key: old}))
    else:
        raise ConfigError(f"unknown ablation preset {kind!r}")
    return [(name, [f"{k}={json.dumps(v)}" for k, v in ov.items()]) for name, ov in cells]


ABLATION_SYSTEMS = {"waterfall-lite": ("lithium", "h2"), "single-axis": ("lithium",)}
