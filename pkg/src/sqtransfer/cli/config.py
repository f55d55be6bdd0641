"""Experiment configuration files.

Grammar (one assignment per line)::

    # comment                      blank lines and '#' comments are ignored
    section.key = value            dotted key, whitespace around '=' optional

A value is parsed as, in order:

* a range ``start:stop:count``  -> ``count`` equally spaced points, ends included
* a list ``v1, v2, ...``        -> each item parsed as a scalar
* a scalar: ``true``/``false``, ``pi`` or ``k*pi``, a float, else a bare string

Recognised sections::

    experiment = sweep-q | sweep-r | fidelity-map | timeevo | stability | wigner | converge
    params.<field>     SystemParams fields (g_ac, g_cm, q, E1, E2, gamma10, gamma21,
                       kappa_a, kappa_b, include_K)
    bath.r, bath.theta squeezed phonon reservoir; presence selects the bath model
    spec.cavity_dim, spec.mech_dim, spec.converge
    converge.tol, converge.cap, converge.start, converge.step
    sweep.<symbol>     swept symbol (q, r, g_cm, g_ac); range or list
    solver.method (krylov | direct), solver.residual_tol, solver.max_iterations
    evolve.t_final, evolve.n_samples, evolve.rtol, evolve.atol
    wigner.extent, wigner.points
    output.path
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from ..dynamics import SolverMethod, SteadyStateOptions
from ..model import SqueezedBathParams, SystemParams
from ..operators import HilbertSpec

__all__ = ["Experiment", "ExperimentConfig", "ConfigError", "parse_config", "load_config"]


class ConfigError(ValueError):
    pass


class Experiment(enum.Enum):
    SWEEP_Q = "sweep-q"
    SWEEP_R = "sweep-r"
    FIDELITY_MAP_Q_GCM = "fidelity-map-q-gcm"
    FIDELITY_MAP_GAC_GCM = "fidelity-map-gac-gcm"
    TIME_EVOLUTION = "timeevo"
    STABILITY = "stability"
    WIGNER = "wigner"
    CONVERGE = "converge"


SWEEPABLE = {"q", "r", "g_cm", "g_ac"}
_RANGE = re.compile(r"^\s*([^:]+):([^:]+):([^:]+)\s*$")
_PI = re.compile(r"^\s*(?:([-+0-9.eE]+)\s*\*\s*)?pi\s*$")


def _scalar(text: str):
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    m = _PI.match(low)
    if m:
        return float(m.group(1) or 1.0) * math.pi
    try:
        return float(t)
    except ValueError:
        return t


def parse_value(text: str):
    m = _RANGE.match(text)
    if m:
        start, stop, count = (_scalar(g) for g in m.groups())
        if not all(isinstance(v, float) for v in (start, stop, count)):
            raise ConfigError(f"bad range {text!r}")
        if count != int(count) or count < 2:
            raise ConfigError(f"range count must be an integer >= 2 in {text!r}")
        if not (math.isfinite(start) and math.isfinite(stop)):
            raise ConfigError(f"range bounds must be finite in {text!r}")
        return np.linspace(start, stop, int(count))
    if "," in text:
        return [_scalar(item) for item in text.split(",") if item.strip()]
    return _scalar(text)


def parse_config(text: str) -> dict:
    """Parse the key-value format into a flat ``{dotted.key: value}`` dict."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not re.fullmatch(r"[A-Za-z_][\w]*(\.[A-Za-z_][\w]*)*", key):
            raise ConfigError(f"line {lineno}: invalid key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = parse_value(value)
    return out


@dataclass
class ExperimentConfig:
    experiment: Experiment | None = None
    params: SystemParams = field(default_factory=SystemParams)
    bath: SqueezedBathParams | None = None
    spec: HilbertSpec = field(default_factory=HilbertSpec)
    converge: bool = False
    cutoff_tol: float = 1e-4
    cutoff_cap: int = 30
    cutoff_start: int = 2
    cutoff_step: int = 2
    sweeps: dict = field(default_factory=dict)
    solver: SteadyStateOptions = field(default_factory=SteadyStateOptions)
    t_final: float = 200.0
    n_samples: int = 101
    rtol: float = 1e-6
    atol: float = 1e-8
    wigner_extent: float = 3.0
    wigner_points: int = 61
    output: Path | None = None
    raw: dict = field(default_factory=dict)

    def sweep(self, name: str, default=None) -> np.ndarray:
        if name in self.sweeps:
            return np.atleast_1d(np.asarray(self.sweeps[name], dtype=float))
        if default is None:
            raise ConfigError(f"experiment needs sweep.{name}")
        return np.atleast_1d(np.asarray(default, dtype=float))

    def echo(self) -> dict:
        """JSON-friendly copy of every setting actually used."""
        def plain(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, enum.Enum):
                return v.value
            if isinstance(v, Path):
                return str(v)
            return v

        return {
            "experiment": plain(self.experiment),
            "params": {f.name: getattr(self.params, f.name) for f in fields(self.params)},
            "bath": None if self.bath is None else {"r": self.bath.r, "theta": self.bath.theta},
            "spec": {"cavity_dim": self.spec.cavity_dim, "mech_dim": self.spec.mech_dim},
            "converge": {
                "enabled": self.converge, "tol": self.cutoff_tol, "cap": self.cutoff_cap,
                "start": self.cutoff_start, "step": self.cutoff_step,
            },
            "sweeps": {k: plain(np.asarray(v, dtype=float)) for k, v in self.sweeps.items()},
            "solver": {
                "method": self.solver.method.value,
                "residual_tol": self.solver.residual_tol,
                "max_iterations": self.solver.max_iterations,
            },
            "evolve": {"t_final": self.t_final, "n_samples": self.n_samples, "rtol": self.rtol, "atol": self.atol},
            "wigner": {"extent": self.wigner_extent, "points": self.wigner_points},
            "output": plain(self.output),
        }


_PARAM_FIELDS = {f.name for f in fields(SystemParams)}


def config_from_dict(flat: dict) -> ExperimentConfig:
    try:
        return _build(flat)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _build(flat: dict) -> ExperimentConfig:
    cfg = ExperimentConfig(raw=dict(flat))
    params, bath, spec = {}, {}, {}
    solver = {}
    for key, value in flat.items():
        section, _, name = key.partition(".")
        if key == "experiment":
            try:
                cfg.experiment = Experiment(str(value))
            except ValueError:
                if value == "fidelity-map":
                    cfg.experiment = None
                else:
                    raise ConfigError(f"unknown experiment {value!r}")
        elif section == "params":
            if name not in _PARAM_FIELDS:
                raise ConfigError(f"unknown parameter {key!r}")
            params[name] = bool(value) if name == "include_K" else float(value)
        elif section == "bath":
            if name not in ("r", "theta"):
                raise ConfigError(f"unknown bath setting {key!r}")
            bath[name] = float(value)
        elif section == "spec":
            if name in ("cavity_dim", "mech_dim"):
                spec[name] = int(value)
            elif name == "converge":
                cfg.converge = bool(value)
            else:
                raise ConfigError(f"unknown spec setting {key!r}")
        elif section == "converge":
            attr = {"tol": "cutoff_tol", "cap": "cutoff_cap", "start": "cutoff_start", "step": "cutoff_step"}
            if name not in attr:
                raise ConfigError(f"unknown converge setting {key!r}")
            setattr(cfg, attr[name], float(value) if name == "tol" else int(value))
        elif section == "sweep":
            if name not in SWEEPABLE:
                raise ConfigError(f"cannot sweep {name!r}; choose from {sorted(SWEEPABLE)}")
            arr = np.atleast_1d(np.asarray(value, dtype=float))
            if not np.all(np.isfinite(arr)):
                raise ConfigError(f"sweep.{name} must be finite")
            cfg.sweeps[name] = arr
        elif section == "solver":
            if name == "method":
                try:
                    solver["method"] = SolverMethod(str(value))
                except ValueError:
                    raise ConfigError(f"unknown solver method {value!r}")
            elif name in ("residual_tol",):
                solver[name] = float(value)
            elif name in ("max_iterations",):
                solver[name] = int(value)
            else:
                raise ConfigError(f"unknown solver setting {key!r}")
        elif section == "evolve":
            if name not in ("t_final", "n_samples", "rtol", "atol"):
                raise ConfigError(f"unknown evolve setting {key!r}")
            setattr(cfg, name, int(value) if name == "n_samples" else float(value))
        elif section == "wigner":
            if name not in ("extent", "points"):
                raise ConfigError(f"unknown wigner setting {key!r}")
            setattr(cfg, f"wigner_{name}", int(value) if name == "points" else float(value))
        elif key == "output.path":
            cfg.output = Path(str(value))
        else:
            raise ConfigError(f"unknown key {key!r}")
    cfg.params = SystemParams(**params)
    if bath:
        cfg.bath = SqueezedBathParams(**bath)
    if spec:
        cfg.spec = HilbertSpec(**spec)
    if solver:
        cfg.solver = SteadyStateOptions(**solver)
    return cfg


def load_config(path) -> ExperimentConfig:
    return config_from_dict(parse_config(Path(path).read_text(encoding="utf-8")))
