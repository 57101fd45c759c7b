"""Experiment configuration (JSON).

Unknown keys are rejected so typos fail fast.  Every error names the
offending field as a dotted path, or the line and column for syntax errors.

Example::

    {
      "seed": 1,
      "plant": {"order": 2, "A": 1.0, "B": 2.0,
                "f": {"family": "ODD_POLY", "coeffs": [1.0, 0.1], "x_max": 1.0}},
      "signal": {"kind": "STEP", "amplitude": 1.0},
      "sim": {"sample_dt": 0.01, "duration": 20.0},
      "frequencies": [0.5, 1.0, 2.0],
      "dss": {"max_iter": 20}
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .dss import DssConfig
from .errors import ConfigurationError, IdentError
from .fit import FitWindow
from .model import Nonlinearity, PlantModel
from .sim import SignalSpec, SimOptions

TOP_KEYS = {"seed", "plant", "input", "freqresp", "signal", "sim", "frequencies", "sweep_amplitude", "dss"}
PLANT_KEYS = {"order", "A", "B", "C", "f"}
F_KEYS = {"family", "coeffs", "x_max", "eps_mono"}
SIGNAL_KEYS = {"kind", "amplitude", "frequency", "step_levels"}
SIM_KEYS = {"sample_dt", "duration", "rk_step", "noise_sigma"}
DSS_KEYS = {"order", "max_iter", "param_tol", "f_tol", "degree", "x_max", "window", "substeps", "start"}


@dataclass
class ExperimentConfig:
    seed: int = 0
    plant: PlantModel | None = None
    input: Path | None = None
    freqresp: Path | None = None
    signal: SignalSpec | None = None
    sim: SimOptions | None = None
    frequencies: list[float] = field(default_factory=list)
    sweep_amplitude: float = 1.0
    dss: DssConfig = field(default_factory=DssConfig)


def _section(obj: Any, path: str, allowed: set[str], required: set[str] = frozenset()) -> dict:
    if not isinstance(obj, dict):
        raise ConfigurationError(f"{path}: expected an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigurationError(f"{path}.{unknown[0]}: unknown key")
    missing = sorted(required - set(obj))
    if missing:
        raise ConfigurationError(f"{path}.{missing[0]}: required key missing")
    return obj


def _num(obj: dict, key: str, path: str, default=None, positive=False, integer=False):
    if key not in obj:
        if default is None:
            raise ConfigurationError(f"{path}.{key}: required key missing")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigurationError(f"{path}.{key}: expected a finite number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigurationError(f"{path}.{key}: expected an integer, got {v!r}")
    if positive and not v > 0:
        raise ConfigurationError(f"{path}.{key}: must be positive, got {v!r}")
    return int(v) if integer else float(v)


def _num_list(v: Any, path: str) -> list[float]:
    if not isinstance(v, list) or any(isinstance(e, bool) or not isinstance(e, (int, float)) for e in v):
        raise ConfigurationError(f"{path}: expected a list of numbers")
    return [float(e) for e in v]


def _wrap(path: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except IdentError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


def parse_plant(obj: Any, path: str = "plant") -> PlantModel:
    d = _section(obj, path, PLANT_KEYS, {"order", "A", "B", "f"})
    order = _num(d, "order", path, integer=True)
    fd = _section(d["f"], f"{path}.f", F_KEYS, {"coeffs"})
    coeffs = _num_list(fd["coeffs"], f"{path}.f.coeffs")
    f = _wrap(
        f"{path}.f",
        Nonlinearity,
        tuple(coeffs),
        x_max=_num(fd, "x_max", f"{path}.f", 1.0, positive=True),
        eps_mono=fd.get("eps_mono"),
        family=fd.get("family", "ODD_POLY"),
    )
    A, B = _num(d, "A", path), _num(d, "B", path)
    if order == 3:
        return _wrap(path, PlantModel.third_order, A, B, _num(d, "C", path), f)
    if order != 2:
        raise ConfigurationError(f"{path}.order: must be 2 or 3, got {order}")
    if "C" in d:
        raise ConfigurationError(f"{path}.C: only valid for order 3 (second order uses f'(0))")
    return _wrap(path, PlantModel.second_order, A, B, f)


def parse_signal(obj: Any, path: str = "signal") -> SignalSpec:
    d = _section(obj, path, SIGNAL_KEYS, {"kind"})
    levels = d.get("step_levels", [])
    if not isinstance(levels, list) or any(not isinstance(p, list) or len(p) != 2 for p in levels):
        raise ConfigurationError(f"{path}.step_levels: expected a list of [time, level] pairs")
    return _wrap(
        path,
        SignalSpec,
        d["kind"],
        amplitude=_num(d, "amplitude", path, 1.0),
        frequency=_num(d, "frequency", path, 0.0),
        step_levels=tuple((float(t), float(v)) for t, v in levels),
    )


def parse_sim(obj: Any, seed: int, path: str = "sim") -> SimOptions:
    d = _section(obj, path, SIM_KEYS, {"sample_dt", "duration"})
    rk = d.get("rk_step")
    return _wrap(
        path,
        SimOptions,
        sample_dt=_num(d, "sample_dt", path, positive=True),
        duration=_num(d, "duration", path, positive=True),
        rk_step=None if rk is None else _num(d, "rk_step", path, positive=True),
        noise_sigma=_num(d, "noise_sigma", path, 0.0),
        seed=seed,
    )


def parse_dss(obj: Any, path: str = "dss") -> DssConfig:
    d = _section(obj, path, DSS_KEYS)
    kwargs: dict[str, Any] = {}
    for key, integer in (("order", True), ("max_iter", True), ("degree", True), ("substeps", True)):
        if key in d:
            kwargs[key] = _num(d, key, path, positive=True, integer=True)
    for key in ("param_tol", "f_tol", "x_max"):
        if key in d:
            kwargs[key] = _num(d, key, path, positive=True)
    if "window" in d:
        w = _num_list(d["window"], f"{path}.window")
        if len(w) != 2:
            raise ConfigurationError(f"{path}.window: expected [tau1, tau2]")
        kwargs["window"] = _wrap(f"{path}.window", FitWindow, *w)
    if "start" in d:
        kwargs["start"] = tuple(_num_list(d["start"], f"{path}.start"))
    return _wrap(path, DssConfig, **kwargs)


def parse_config(obj: Any, base: Path | None = None) -> ExperimentConfig:
    d = _section(obj, "config", TOP_KEYS)
    seed = _num(d, "seed", "config", 0, integer=True)
    cfg = ExperimentConfig(seed=seed)
    if "plant" in d and "input" in d:
        raise ConfigurationError("config: give either 'plant' (synthetic mode) or 'input' (data mode), not both")
    if "plant" in d:
        cfg.plant = parse_plant(d["plant"])
    for key in ("input", "freqresp"):
        if key in d:
            if not isinstance(d[key], str):
                raise ConfigurationError(f"config.{key}: expected a file path string")
            p = Path(d[key])
            setattr(cfg, key, p if p.is_absolute() or base is None else base / p)
    if "signal" in d:
        cfg.signal = parse_signal(d["signal"])
    if "sim" in d:
        cfg.sim = parse_sim(d["sim"], seed)
    if "frequencies" in d:
        cfg.frequencies = _num_list(d["frequencies"], "config.frequencies")
        if any(not w > 0 for w in cfg.frequencies):
            raise ConfigurationError("config.frequencies: values must be positive")
    cfg.sweep_amplitude = _num(d, "sweep_amplitude", "config", 1.0, positive=True)
    if "dss" in d:
        cfg.dss = parse_dss(d["dss"])
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_config(obj, base=path.parent)
