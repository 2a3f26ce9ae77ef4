from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from hetex.frontier_finder import Poi
from hetex.occupancy_map import UavId
from hetex.voxel_world import SensorModel


@dataclass
class UavState:
    id: UavId
    position: np.ndarray
    heading: float
    radius: float
    speed: float
    heading_rate: float
    sensor: SensorModel
    active_path: list[np.ndarray] | None = None
    halted: bool = False
    guard_locked: bool = False  # collision guard owns the command channel
    hold_heading: bool = False
    assigned_poi: Poi | None = None
    goal_heading: float | None = None  # yaw to reach at the final waypoint
    home: np.ndarray | None = None  # standby position when there is nothing to do
    # identity in simulation; kept so the dispatch interface carries a frame
    frame_transform: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        self.position = np.asarray(self.position, dtype=float)

    @property
    def goal(self) -> np.ndarray | None:
        return self.active_path[-1] if self.active_path else None

    def heading_aligned(self, tol: float = 1e-6) -> bool:
        if self.goal_heading is None or self.hold_heading:
            return True
        d = self.goal_heading - self.heading
        return abs(math.atan2(math.sin(d), math.cos(d))) <= tol

    def dispatch(self, waypoints, poi: Poi | None = None, hold_heading: bool = False,
                 goal_heading: float | None = None) -> None:
        self.active_path = [np.asarray(w, dtype=float) for w in waypoints]
        self.assigned_poi = poi
        self.hold_heading = hold_heading
        self.goal_heading = goal_heading
