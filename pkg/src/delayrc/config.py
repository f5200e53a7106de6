"""Experiment configuration files.

A config is a YAML mapping with the sections ``reservoir``, ``task``,
``training``, ``sweep``, ``output`` and the scalar ``master_seed``.  Physical
quantities carry their unit in the field name (``node_duration_ns``,
``nu_ro_ghz``); phases are in radians and may be written as multiples of pi
(``"pi/4"``, ``"0.1*pi"``).  Unknown fields are rejected by name.
"""

from __future__ import annotations

import copy
import hashlib
import itertools
import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from .definitions import CHANNEL_DISTORTION
from .dde import FeedbackTap
from .errors import ConfigError
from .experiment import derive_seed
from .reservoir import Mode, ReservoirConfig, double_delay_config, make_config
from .tasks import TaskDataset, channel_eq, mc_probe, narma10, santa_fe_load, santa_fe_surrogate

#: Environment variable naming the default output directory.
OUT_ENV = "DELAYRC_OUT"

TASKS = ("narma10", "channel_eq", "santa_fe", "santa_fe_surrogate", "mc")

# field -> (kind, default)
RESERVOIR_FIELDS: Dict[str, Tuple[str, Any]] = {
    "engine": ("str", "map"),
    "n_nodes": ("int", 50),
    "desync": ("int", 1),
    "response_time_ns": ("float", 1.0),
    "node_duration_ns": ("float", 100.0),
    "nonlinearity": ("str", "sin2"),
    "beta": ("float", 0.5),
    "phi0_rad": ("float", 0.0),
    "rho": ("float", 1.0),
    "mu": ("float", 1.0),
    "mask_kind": ("str", "binary"),
    "mask_seed": ("opt_int", None),
    "mask_levels": ("opt_int", None),
    "mask_tones": ("tones", None),
    "mask_bipolar": ("bool", True),
    "edm_sublayers": ("int", 1),
    "readout_desync": ("float", 0.0),
    "sampling_rule": ("str", "end"),
    "step_ns": ("opt_float", None),
    "scheme": ("str", "rk4"),
    "extra_taps": ("taps", ()),
    "nu_ro_ghz": ("opt_float", None),
}
TASK_FIELDS: Dict[str, Tuple[str, Any]] = {
    "name": ("str", "narma10"),
    "length": ("int", 5000),
    "seed": ("opt_int", None),
    "snr_db": ("float", 28.0),
    "decision_delay": ("int", 0),
    "distortion": ("bool", True),
    "path": ("opt_str", None),
    "n_train": ("int", 10_000),
    "n_test": ("int", 2_000),
    "max_lag": ("opt_int", None),
}
TRAINING_FIELDS: Dict[str, Tuple[str, Any]] = {
    "lambda": ("opt_float", None),
    "bias": ("bool", True),
    "folds": ("int", 1),
    "train_fraction": ("opt_float", None),
    "washout_steps": ("opt_int", None),
}
OUTPUT_FIELDS: Dict[str, Tuple[str, Any]] = {
    "dir": ("opt_str", None),
    "format": ("str", "csv"),
    "log": ("bool", False),
}
SECTIONS = {"reservoir": RESERVOIR_FIELDS, "task": TASK_FIELDS, "training": TRAINING_FIELDS,
            "output": OUTPUT_FIELDS}
SWEEPABLE_KINDS = ("int", "float", "bool", "str", "opt_int", "opt_float", "opt_str")

_PI_EXPR = re.compile(r"^\s*([-+])?\s*(\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+)?\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?\s*$")


def parse_number(value, where: str = "value") -> float:
    """Float from a number or a string such as ``"0.5"``, ``"pi/20"`` or ``"0.1*pi"``."""
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            pass
        m = _PI_EXPR.match(value.replace("π", "pi"))
        if m:
            sign = -1.0 if m.group(1) == "-" else 1.0
            coef = float(m.group(2)) if m.group(2) else 1.0
            den = float(m.group(3)) if m.group(3) else 1.0
            return sign * coef * math.pi / den
    raise ConfigError(f"{where}: expected a number, got {value!r}")


def _coerce(kind: str, value, where: str):
    if value is None and (kind.startswith("opt_") or kind in ("tones", "taps")):
        return None if kind != "taps" else ()
    if kind in ("float", "opt_float"):
        return parse_number(value, where)
    if kind in ("int", "opt_int"):
        x = parse_number(value, where)
        if x != int(x):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return int(x)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true or false, got {value!r}")
        return value
    if kind in ("str", "opt_str"):
        if not isinstance(value, (str, int, float)) or isinstance(value, bool):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return str(value)
    if kind == "tones":
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise ConfigError(f"{where}: expected two integers [p, q]")
        return [_coerce("int", v, where) for v in value]
    if kind == "taps":
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list of {{delay_ns, gain}} mappings")
        taps = []
        for i, item in enumerate(value):
            if not isinstance(item, dict):
                raise ConfigError(f"{where}[{i}]: expected a mapping")
            unknown = set(item) - {"delay_ns", "gain"}
            if unknown:
                raise ConfigError(f"unknown field '{where}[{i}].{sorted(unknown)[0]}'")
            if set(item) != {"delay_ns", "gain"}:
                raise ConfigError(f"{where}[{i}]: needs delay_ns and gain")
            taps.append([parse_number(item["delay_ns"], where), parse_number(item["gain"], where)])
        return taps
    raise AssertionError(kind)


def _read_yaml(path: Path) -> dict:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        problem = getattr(exc, "problem", None) or str(exc)
        if mark is not None:
            raise ConfigError(f"{path}: syntax error at line {mark.line + 1}, column {mark.column + 1}: "
                              f"{problem}") from None
        raise ConfigError(f"{path}: syntax error: {problem}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def _sweep_values(name: str, spec) -> list:
    where = f"sweep.{name}"
    if isinstance(spec, list):
        values = list(spec)
    elif isinstance(spec, dict):
        keys = set(spec)
        if keys == {"start", "stop", "step"}:
            start, stop, step = (parse_number(spec[k], where) for k in ("start", "stop", "step"))
            if not step > 0:
                raise ConfigError(f"{where}: step must be > 0")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = [start + i * step for i in range(max(count, 0))]
        elif keys == {"start", "stop", "num"}:
            start, stop = parse_number(spec["start"], where), parse_number(spec["stop"], where)
            num = _coerce("int", spec["num"], where)
            values = [float(v) for v in np.linspace(start, stop, num)] if num > 0 else []
        else:
            raise ConfigError(f"{where}: use a list, {{start, stop, step}} or {{start, stop, num}}")
    else:
        values = [spec]
    if not values:
        raise ConfigError(f"{where}: sweep grid is empty")
    return values


def _resolve_sweep_name(name: str) -> Tuple[str, str]:
    if "." in name:
        section, key = name.split(".", 1)
        fields = SECTIONS.get(section) if section != "output" else None
        if fields is None or key not in fields:
            raise ConfigError(f"sweep field '{name}' does not name a config field")
        matches = [(section, key)]
    else:
        matches = [(s, name) for s in ("reservoir", "task", "training") if name in SECTIONS[s]]
        if not matches:
            raise ConfigError(f"sweep field '{name}' does not name a config field")
        if len(matches) > 1:
            raise ConfigError(f"sweep field '{name}' is ambiguous; qualify it as section.{name}")
    section, key = matches[0]
    if SECTIONS[section][key][0] not in SWEEPABLE_KINDS or key == "name":
        raise ConfigError(f"sweep field '{name}' is not a scalar parameter")
    return section, key


@dataclass(frozen=True)
class Point:
    """One resolved grid point."""

    index: int
    seed: int
    swept: Dict[str, Any]
    settings: Dict[str, Dict[str, Any]]

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.settings)


def fingerprint(settings) -> str:
    """SHA-256 of the canonical JSON encoding of a resolved configuration."""
    blob = json.dumps(settings, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class ExperimentConfig:
    """Parsed config: defaults filled in, sweep expanded lazily into :class:`Point` objects."""

    reservoir: Dict[str, Any]
    task: Dict[str, Any]
    training: Dict[str, Any]
    output: Dict[str, Any]
    sweep: List[Tuple[str, Tuple[str, str], list]] = field(default_factory=list)
    master_seed: int = 0
    source: Optional[Path] = None

    @classmethod
    def from_dict(cls, data: dict, source: Optional[Path] = None) -> "ExperimentConfig":
        allowed = set(SECTIONS) | {"sweep", "master_seed"}
        for key in data:
            if key not in allowed:
                raise ConfigError(f"unknown field '{key}'")
        sections = {}
        for name, fields in SECTIONS.items():
            raw = data.get(name) or {}
            if not isinstance(raw, dict):
                raise ConfigError(f"section '{name}' must be a mapping")
            resolved = {}
            for key, (kind, default) in fields.items():
                if key in raw:
                    resolved[key] = _coerce(kind, raw[key], f"{name}.{key}")
                else:
                    resolved[key] = copy.deepcopy(list(default) if isinstance(default, tuple) else default)
            for key in raw:
                if key not in fields:
                    raise ConfigError(f"unknown field '{name}.{key}'")
            sections[name] = resolved
        sweep_raw = data.get("sweep") or {}
        if not isinstance(sweep_raw, dict):
            raise ConfigError("section 'sweep' must be a mapping of field -> values")
        sweep = []
        for name, spec in sweep_raw.items():
            section, key = _resolve_sweep_name(str(name))
            kind = SECTIONS[section][key][0]
            values = [_coerce(kind, v, f"sweep.{name}") for v in _sweep_values(str(name), spec)]
            sweep.append((str(name), (section, key), values))
        seed = _coerce("int", data.get("master_seed", 0), "master_seed")
        if seed < 0:
            raise ConfigError("master_seed must be >= 0")
        cfg = cls(sections["reservoir"], sections["task"], sections["training"], sections["output"],
                  sweep, seed, source)
        if cfg.task["name"] not in TASKS:
            raise ConfigError(f"task.name must be one of {', '.join(TASKS)}, got {cfg.task['name']!r}")
        if cfg.output["format"] != "csv":
            raise ConfigError("output.format must be 'csv'")
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_dict(_read_yaml(path), path)

    @property
    def n_points(self) -> int:
        return int(np.prod([len(v) for _, _, v in self.sweep])) if self.sweep else 1

    def with_overrides(self, *, engine: Optional[str] = None, master_seed: Optional[int] = None,
                       task: Optional[Dict[str, Any]] = None) -> "ExperimentConfig":
        cfg = copy.deepcopy(self)
        if engine is not None:
            cfg.reservoir["engine"] = Mode(engine).value
            cfg.sweep = [s for s in cfg.sweep if s[1] != ("reservoir", "engine")]
        if master_seed is not None:
            cfg.master_seed = int(master_seed)
        if task is not None:
            cfg.task.update(task)
        return cfg

    def to_dict(self) -> dict:
        return {"reservoir": self.reservoir, "task": self.task, "training": self.training,
                "master_seed": self.master_seed,
                "sweep": {name: values for name, _, values in self.sweep}}

    def points(self) -> List[Point]:
        """Grid points in row-major order of the sweep axes (last axis fastest)."""
        axes = [values for _, _, values in self.sweep]
        out = []
        for index, combo in enumerate(itertools.product(*axes)):
            settings = {"reservoir": dict(self.reservoir), "task": dict(self.task),
                        "training": dict(self.training)}
            swept = {}
            for (name, (section, key), _), value in zip(self.sweep, combo):
                settings[section][key] = value
                swept[name] = value
            seed = derive_seed(self.master_seed, index)
            settings["seeds"] = {"master": self.master_seed, "point": seed}
            out.append(Point(index, seed, swept, settings))
        return out


def mask_seed(settings) -> int:
    s = settings["reservoir"]["mask_seed"]
    return derive_seed(settings["seeds"]["master"], "mask") if s is None else int(s)


def build_reservoir(settings) -> ReservoirConfig:
    """Reservoir of one resolved point (times converted from ns to the common time unit)."""
    r = settings["reservoir"]
    mode = Mode(r["engine"])
    declared = bool(r["extra_taps"]) or r["nu_ro_ghz"] is not None
    if mode is Mode.ELM and declared:
        raise ConfigError("ELM engine runs open loop; remove reservoir.extra_taps / reservoir.nu_ro_ghz")
    if r["desync"] >= r["n_nodes"]:
        raise ConfigError(f"reservoir.desync k={r['desync']} must be smaller than n_nodes={r['n_nodes']}")
    extra = tuple(FeedbackTap(d, g) for d, g in r["extra_taps"])
    tones = tuple(r["mask_tones"]) if r["mask_tones"] is not None else None
    cfg = make_config(
        r["n_nodes"], desync=r["desync"], beta=r["beta"], phi0=r["phi0_rad"], rho=r["rho"], mu=r["mu"],
        nonlinearity=r["nonlinearity"], mode=mode, response_time=r["response_time_ns"],
        node_duration=r["node_duration_ns"], mask_kind=r["mask_kind"], mask_seed=mask_seed(settings),
        mask_levels=r["mask_levels"], mask_tones=tones, mask_bipolar=r["mask_bipolar"],
        edm_sublayers=r["edm_sublayers"], readout_desync=r["readout_desync"],
        washout=settings["training"]["washout_steps"], extra_taps=extra,
        sampling_rule=r["sampling_rule"], step=r["step_ns"], scheme=r["scheme"],
    )
    if r["nu_ro_ghz"] is not None:
        taps = double_delay_config(cfg.grid.delay, r["nu_ro_ghz"], r["beta"])
        cfg = replace(cfg, params=replace(cfg.params, taps=tuple(taps) + extra))
    return cfg


def data_seed(settings) -> int:
    s = settings["task"]["seed"]
    return settings["seeds"]["point"] if s is None else int(s)


def build_dataset(settings, base_dir: Optional[Path] = None) -> TaskDataset:
    """Dataset of one resolved point; ``mc`` returns the probe sequence only."""
    t = settings["task"]
    seed = data_seed(settings)
    name = t["name"]
    if name == "narma10":
        return narma10(t["length"], seed)
    if name == "channel_eq":
        distortion = CHANNEL_DISTORTION if t["distortion"] else None
        return channel_eq(t["length"], t["snr_db"], seed, distortion=distortion,
                          decision_delay=t["decision_delay"])
    if name == "santa_fe":
        if t["path"] is None:
            raise ConfigError("task.path is required for santa_fe")
        path = Path(t["path"])
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        return santa_fe_load(path)
    if name == "santa_fe_surrogate":
        return santa_fe_surrogate(t["length"], seed)
    return mc_probe(max(t["length"], 1000), seed)


def regime_note(response_time: float, node_duration: float) -> str:
    """Coupling regime implied by the node duration relative to the response time."""
    ratio = node_duration / response_time
    if ratio < 1:
        return (f"node duration = {ratio:.3g} T_R: inertia-coupling regime "
                "(neighbouring nodes are coupled through the finite response time)")
    if ratio >= 50:
        return f"node duration = {ratio:.3g} T_R: instantaneous regime (discrete map is exact)"
    return f"node duration = {ratio:.3g} T_R: intermediate regime (partial inertia coupling)"
