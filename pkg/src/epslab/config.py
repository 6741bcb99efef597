"""Run configuration for the command-line frontend.

A config file is a JSON object with the optional sections below; every
section has defaults (natural units, 256 x 256 grid on [-8, 8)^2,
f = hbar/(m omega)) and unknown keys are rejected::

    {
      "params": {"m": 1, "omega": 1, "hbar": 1},
      "grid": {"q_min": -8, "q_max": 8, "n_q": 256, "p_min": -8, "p_max": 8, "n_p": 256},
      "state": {"kind": "eigenstate", "n": 0},
      "f": "q-function",
      "evolution": {"t_final": 6.283185307179586, "dt": 0.006283185307179587,
                    "method": "eigenbasis", "record_stride": 1},
      "tolerances": {"hj": 1e-5},
      "output_dir": "out"
    }

``state.kind`` is ``eigenstate`` (with ``n``), ``coherent`` (with ``q0`` and
``p0``) or ``zero``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import pi
from pathlib import Path
from typing import Optional

from .errors import ConfigError, EPSError
from .evolution import EvolutionConfig
from .numerics import PhaseSpaceGrid
from .states import OscillatorParams, WavefunctionSpec

TOP_KEYS = {"params", "grid", "state", "f", "evolution", "tolerances", "output_dir"}
PARAM_KEYS = {"m", "omega", "hbar"}
GRID_KEYS = {"q_min", "q_max", "n_q", "p_min", "p_max", "n_p"}
STATE_KEYS = {"eigenstate": {"kind", "n"}, "coherent": {"kind", "q0", "p0"}, "zero": {"kind"}}
EVOLUTION_KEYS = {"t_final", "dt", "method", "record_stride", "split_order"}
SUITES = ("hj", "imag", "qrep", "eps-eq")
DEFAULT_TOLERANCES = {"hj": 1e-5, "imag": 1e-5, "qrep": 1e-4, "eps-eq": 1e-4}


@dataclass(frozen=True)
class RunConfig:
    params: OscillatorParams
    grid: PhaseSpaceGrid
    state: Optional[WavefunctionSpec]
    f: float
    evolution: Optional[EvolutionConfig]
    tolerances: dict = field(default_factory=dict)
    output_dir: str = "."

    @property
    def zero_state(self) -> bool:
        return self.state is None

    def tolerance(self, suite: str) -> float:
        return self.tolerances.get(suite, DEFAULT_TOLERANCES[suite])

    def evolution_or_default(self) -> EvolutionConfig:
        if self.evolution is not None:
            return self.evolution
        period = 2 * pi / self.params.omega
        return EvolutionConfig(period, period / 1000)

    def to_dict(self) -> dict:
        if self.state is None:
            state = {"kind": "zero"}
        else:
            state = self.state.to_dict()
        return {
            "params": self.params.to_dict(),
            "grid": self.grid.to_dict(),
            "state": state,
            "f": self.f,
            "evolution": self.evolution.to_dict() if self.evolution else None,
            "tolerances": dict(sorted(self.tolerances.items())),
        }


def _check_keys(section: str, data, allowed):
    if not isinstance(data, dict):
        raise ConfigError(f"'{section}' must be an object")
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {sorted(unknown)}")


def _number(section, key, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number")
    if integer and int(value) != value:
        raise ConfigError(f"{section}.{key} must be an integer")
    return int(value) if integer else float(value)


def apply_override(data: dict, assignment: str) -> dict:
    """Apply ``a.b=value`` to nested config data; value is parsed as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} must look like key.path=value")
    path, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    keys = path.split(".")
    node = data
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override inside non-object key {key!r}")
    node[keys[-1]] = value
    return data


def load_config_data(path=None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc.msg} (line {exc.lineno})") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def resolve(data: dict) -> RunConfig:
    """Validate raw config data and build a fully concrete RunConfig."""
    _check_keys("config", data, TOP_KEYS)
    try:
        raw_params = data.get("params", {})
        _check_keys("params", raw_params, PARAM_KEYS)
        params = OscillatorParams(**{k: _number("params", k, v) for k, v in raw_params.items()})

        raw_grid = data.get("grid", {})
        _check_keys("grid", raw_grid, GRID_KEYS)
        grid = PhaseSpaceGrid(
            **{k: _number("grid", k, v, integer=k.startswith("n_")) for k, v in raw_grid.items()}
        )

        raw_state = data.get("state", {})
        if isinstance(raw_state, dict) and "kind" not in raw_state:
            raw_state = {"kind": "eigenstate", **raw_state}
        if not isinstance(raw_state, dict) or raw_state.get("kind") not in STATE_KEYS:
            raise ConfigError("state.kind must be one of eigenstate, coherent, zero")
        kind = raw_state["kind"]
        _check_keys("state", raw_state, STATE_KEYS[kind])
        if kind == "eigenstate":
            state = WavefunctionSpec.eigenstate(_number("state", "n", raw_state.get("n", 0), integer=True), params)
        elif kind == "coherent":
            state = WavefunctionSpec.coherent(
                _number("state", "q0", raw_state.get("q0", 0.0)),
                _number("state", "p0", raw_state.get("p0", 0.0)),
                params,
            )
        else:
            state = None

        raw_f = data.get("f", "q-function")
        if raw_f == "q-function":
            f = params.q_function_f
        else:
            f = _number("config", "f", raw_f)
        params = params.with_f(f)
        if state is not None:
            state = WavefunctionSpec(state.kind, params, state.n, state.q0, state.p0)

        evolution = None
        if "evolution" in data and data["evolution"] is not None:
            raw_ev = data["evolution"]
            _check_keys("evolution", raw_ev, EVOLUTION_KEYS)
            ev = dict(raw_ev)
            for key in ("t_final", "dt"):
                if key in ev:
                    ev[key] = _number("evolution", key, ev[key])
            period = 2 * pi / params.omega
            ev.setdefault("t_final", period)
            ev.setdefault("dt", ev["t_final"] / 1000)
            evolution = EvolutionConfig(**ev)
            evolution.validate(params)
            evolution.n_steps

        raw_tol = data.get("tolerances", {})
        _check_keys("tolerances", raw_tol, SUITES)
        tolerances = {k: _number("tolerances", k, v) for k, v in raw_tol.items()}

        output_dir = data.get("output_dir", ".")
        if not isinstance(output_dir, str):
            raise ConfigError("output_dir must be a string")
    except ConfigError:
        raise
    except (EPSError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(params, grid, state, f, evolution, tolerances, output_dir)
