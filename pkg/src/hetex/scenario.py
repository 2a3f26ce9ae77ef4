"""Scenario document schema (JSON) and parsing."""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from hetex.errors import BoundsError, ScenarioError
from hetex.voxel_world import SensorKind, SensorModel, VoxelGrid, build_world

Vec3 = tuple[float, float, float]

DATA_DIR = Path(__file__).parent / "data"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Box(_Strict):
    min: Vec3
    max: Vec3
    label: Optional[str] = None

    @model_validator(mode="after")
    def _ordered(self) -> "Box":
        if any(hi < lo for lo, hi in zip(self.min, self.max)):
            raise ValueError("max must be >= min on every axis")
        return self


class SensorSpec(_Strict):
    kind: Literal["omni3d", "cone"]
    h_fov_deg: float = Field(gt=0, le=360)
    v_fov_deg: float = Field(gt=0, le=180)
    max_range: float = Field(gt=0)
    n_azimuth: int = Field(ge=1)
    n_elevation: int = Field(ge=1)

    def model(self) -> SensorModel:
        return SensorModel(
            kind=SensorKind(self.kind),
            h_fov=math.radians(self.h_fov_deg),
            v_fov=math.radians(self.v_fov_deg),
            max_range=self.max_range,
            n_azimuth=self.n_azimuth,
            n_elevation=self.n_elevation,
        )


class UavSpec(_Strict):
    id: Literal["pUAV", "sUAV"]
    start: Vec3
    heading: float = 0.0
    radius: float = Field(gt=0)
    speed: float = Field(gt=0)
    heading_rate: float = Field(default=1.0, gt=0)
    sensor: SensorSpec


class Scenario(_Strict):
    name: str = "unnamed"
    bounds: Box
    resolution: float = Field(gt=0)
    boxes: list[Box] = Field(default_factory=list)
    uavs: list[UavSpec]
    explore_bounds: Box
    rooms: list[Box] = Field(default_factory=list)

    @field_validator("uavs")
    @classmethod
    def _two_uavs(cls, v: list[UavSpec]) -> list[UavSpec]:
        ids = sorted(u.id for u in v)
        if ids != ["pUAV", "sUAV"]:
            raise ValueError("exactly one pUAV and one sUAV are required")
        return v

    def uav(self, uid: str) -> UavSpec:
        return next(u for u in self.uavs if u.id == uid)

    def world(self, resolution: float | None = None) -> VoxelGrid:
        res = self.resolution if resolution is None else resolution
        return build_world(self.bounds.min, self.bounds.max, res,
                           [(b.min, b.max) for b in self.boxes])


def _format_loc(loc) -> str:
    out = ""
    for part in loc:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out


def parse_scenario(doc) -> Scenario:
    """Accepts a dict, a JSON string, a path, or a built-in scenario name."""
    if isinstance(doc, Scenario):
        return doc
    if isinstance(doc, Path) or (isinstance(doc, str) and not doc.lstrip().startswith("{")):
        doc = json.loads(resolve_data_path(doc, ".json").read_text())
    elif isinstance(doc, str):
        doc = json.loads(doc)
    try:
        sc = Scenario.model_validate(doc)
    except ValidationError as exc:
        err = exc.errors()[0]
        raise ScenarioError(err["msg"], _format_loc(err["loc"])) from exc
    lo, hi = sc.bounds.min, sc.bounds.max
    for k, b in enumerate(sc.boxes):
        if any(a < l - 1e-9 for a, l in zip(b.min, lo)) or any(a > h + 1e-9 for a, h in zip(b.max, hi)):
            raise BoundsError(f"boxes[{k}] extends outside world bounds")
    for u in sc.uavs:
        if any(not (l <= a < h) for a, l, h in zip(u.start, lo, hi)):
            raise BoundsError(f"uav {u.id} starts outside world bounds")
    return sc


def resolve_data_path(name, suffix: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    builtin = DATA_DIR / (p.name if p.suffix else p.name + suffix)
    if builtin.exists():
        return builtin
    raise ScenarioError(f"no such file: {name}")
