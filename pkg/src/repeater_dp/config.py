"""Run configuration read from an INI-style file.

Example::

    [hardware]
    c = 2e5
    L_att = 20
    epsilon = 0.2
    eta = 0.995
    p = 0.995
    L0 = 10
    gen_error_shape = werner

    [grid]
    q = 100
    shape_bins = 8
    # optional: bins above fine_above get fine_q bins of their own
    fine_above = 0.9
    fine_q = 100

    [planner]
    scheme = bdcz
    m_max = 5
    window = 8
    node_skipping = yes
    multilevel = yes
    unit_km = 10
    skip_cap = 4
    gate_fidelities = 0.97, 0.98, 0.99, 0.995

    [baseline]
    m = 2

    [simulate]
    trials = 10000
    seed = 1

    [output]
    protocol = out/protocol.json
    summary = out/summary.json
    csv = out/profile.csv

Every key is optional.  Unknown sections or keys are rejected.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace

import numpy as np

from .noise import ErrorShape, HardwareParams
from .planner import ConfigError, PlannerOptions
from .states import ClassGrid

_SCHEMA = {
    "hardware": {"c": float, "L_att": float, "epsilon": float, "eta": float, "p": float,
                 "L0": float, "gen_error_shape": str},
    "grid": {"q": int, "shape_bins": int, "fine_above": float, "fine_q": int},
    "planner": {"scheme": str, "m_max": int, "window": int, "node_skipping": bool,
                "multilevel": bool, "unit_km": float, "skip_cap": int,
                "gate_fidelities": "floats", "enforce_occupancy": bool},
    "baseline": {"m": int},
    "simulate": {"trials": int, "seed": int},
    "output": {"protocol": str, "summary": str, "csv": str, "samples_csv": str},
}


@dataclass(frozen=True)
class GridSpec:
    q: int = 100
    shape_bins: int = 8
    fine_above: float | None = None
    fine_q: int = 100

    def build(self) -> ClassGrid:
        if self.q < 2 or self.shape_bins < 1:
            raise ConfigError("grid needs q >= 2 and shape_bins >= 1")
        if self.fine_above is None:
            return ClassGrid.uniform(self.q, self.shape_bins)
        fe = np.concatenate([np.linspace(0.5, self.fine_above, self.q + 1)[:-1],
                             np.linspace(self.fine_above, 1.0, self.fine_q + 1)])
        return ClassGrid(fe, np.linspace(0.0, 0.5, self.shape_bins + 1))


@dataclass(frozen=True)
class RunConfig:
    hardware: HardwareParams = field(default_factory=HardwareParams)
    grid: GridSpec = field(default_factory=GridSpec)
    planner: PlannerOptions = field(default_factory=PlannerOptions)
    baseline_m: int | None = None
    trials: int = 10000
    seed: int = 1
    output: dict = field(default_factory=dict)


def _convert(section: str, key: str, raw: str, kind):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "yes", "true", "on"):
                return True
            if low in ("0", "no", "false", "off"):
                return False
            raise ValueError(raw)
        if kind == "floats":
            return tuple(float(x) for x in raw.split(",") if x.strip())
        return kind(raw.strip())
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    values: dict[str, dict] = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        values[section] = {}
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            values[section][key] = _convert(section, key, raw, _SCHEMA[section][key])
    try:
        hw = dict(values.get("hardware", {}))
        if "gen_error_shape" in hw:
            hw["gen_error_shape"] = ErrorShape(hw["gen_error_shape"].lower())
        hardware = HardwareParams(**hw)
        grid = GridSpec(**values.get("grid", {}))
        grid.build()
        pl = dict(values.get("planner", {}))
        renames = {"node_skipping": "allow_node_skipping", "multilevel": "allow_multilevel"}
        planner = PlannerOptions(**{renames.get(k, k): v for k, v in pl.items()})
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    sim = values.get("simulate", {})
    cfg = RunConfig(hardware=hardware, grid=grid, planner=planner,
                    baseline_m=values.get("baseline", {}).get("m"),
                    trials=sim.get("trials", 10000), seed=sim.get("seed", 1),
                    output=values.get("output", {}))
    if cfg.trials < 1:
        raise ConfigError("[simulate] trials must be >= 1")
    return cfg


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def with_overrides(cfg: RunConfig, **planner_kw) -> RunConfig:
    kw = {k: v for k, v in planner_kw.items() if v is not None}
    if not kw:
        return cfg
    try:
        return replace(cfg, planner=replace(cfg.planner, **kw))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
