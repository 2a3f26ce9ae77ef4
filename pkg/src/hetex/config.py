"""Mission configuration: flat ``key = value`` files plus overrides."""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, get_args, get_type_hints

from hetex.errors import ScenarioError

SEED_ENV = "HETEX_SEED"


@dataclass
class MissionConfig:
    dt: float = 0.05
    f_front: float = 0.5
    f_path: float = 2.0
    f_coll: float = 10.0
    f_scan: float = 2.0
    d_c: float = 2.0
    d_s: float = 2.5
    r_sph: float = 0.35
    map_res: Optional[float] = None  # None: use the scenario resolution
    allocator: str = "mcf"
    alpha: float = 1.0
    beta: float = 0.5
    n_arcs: int = 5
    c_x: float = 1000.0
    safety_weight: float = 0.2
    eps: Optional[float] = None  # None: 3 x resolution
    samples_per_cluster: int = 3
    min_cluster_for_sampling: int = 25
    seed: int = 1
    completion_target: float = 0.95
    t_max: float = 600.0
    s_p: Optional[float] = None  # None: scenario UAV radius
    s_s: Optional[float] = None
    goal_tolerance: float = 0.3
    rho: float = 1.0
    stride: int = 2
    r_max: float = 2.0
    goal_snap: float = 1.0
    start_snap: float = 1.0
    measure_timings: bool = False
    autonomy: bool = True  # False: no frontier/planning ticks (scripted runs)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.dt <= 0:
            raise ScenarioError("must be positive", "dt")
        for name in ("f_front", "f_path", "f_coll", "f_scan"):
            rate = getattr(self, name)
            if rate <= 0:
                raise ScenarioError("must be positive", name)
            steps = 1.0 / (rate * self.dt)
            if abs(steps - round(steps)) > 1e-6 or round(steps) < 1:
                raise ScenarioError(f"period {1 / rate} s is not a multiple of dt={self.dt}", name)
        if not 0 < self.d_c < self.d_s:
            raise ScenarioError("need 0 < d_c < d_s", "d_c")
        if not 0 < self.completion_target <= 1:
            raise ScenarioError("must lie in (0, 1]", "completion_target")
        if self.allocator not in ("greedy", "mcf"):
            raise ScenarioError("must be greedy or mcf", "allocator")
        if self.n_arcs < 1:
            raise ScenarioError("must be >= 1", "n_arcs")
        if self.alpha < 0 or self.beta < 0:
            raise ScenarioError("must be non-negative", "alpha/beta")

    def period_steps(self, rate: float) -> int:
        return int(round(1.0 / (rate * self.dt)))

    def replace(self, **changes) -> "MissionConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _coerce(name: str, raw: str, typ):
    base = [t for t in get_args(typ) if t is not type(None)] or [typ]
    base = base[0]
    if raw.lower() in ("none", "") and type(None) in get_args(typ):
        return None
    try:
        if base is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return base(raw)
    except ValueError:
        raise ScenarioError(f"cannot parse {raw!r} as {base.__name__}", name) from None


def parse_config_text(text: str) -> dict:
    hints = get_type_hints(MissionConfig)
    known = {f.name for f in fields(MissionConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected key = value", "config")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ScenarioError(f"unknown key (line {lineno})", key)
        values[key] = _coerce(key, raw, hints[key])
    return values


def load_config(path=None, overrides: dict | None = None, env=os.environ) -> MissionConfig:
    """Defaults < config file < HETEX_SEED < explicit overrides (CLI flags)."""
    values = {}
    if path is not None:
        from hetex.scenario import resolve_data_path

        values.update(parse_config_text(resolve_data_path(path, ".cfg").read_text()))
    if env.get(SEED_ENV):
        values["seed"] = _coerce("seed", env[SEED_ENV], int)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return MissionConfig(**values)
