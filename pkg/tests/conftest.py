from __future__ import annotations

import numpy as np
import pytest

from hetex.occupancy_map import ExploredMap, UavId, integrate_scan
from hetex.scenario import parse_scenario
from hetex.voxel_world import VoxelGrid, build_world, sample_scan

# poses used to build a deterministic, partially explored office map
HALL_POSES = [((3.0, 3.0, 1.5), 0.0), ((9.0, 12.0, 1.5), 1.2), ((16.0, 6.0, 1.2), 2.0)]


@pytest.fixture(scope="session")
def office():
    return parse_scenario("office_s")


@pytest.fixture(scope="session")
def office_truth(office) -> VoxelGrid:
    return office.world()


def partial_map(truth: VoxelGrid, scenario, poses=HALL_POSES) -> ExploredMap:
    m = ExploredMap.empty_like(truth)
    for k, (pos, heading) in enumerate(poses):
        uid = "pUAV" if k % 2 == 0 else "sUAV"
        sensor = scenario.uav(uid).sensor.model()
        integrate_scan(m, sample_scan(truth, sensor, pos, heading), UavId.parse(uid))
    return m


@pytest.fixture(scope="session")
def office_partial(office, office_truth) -> ExploredMap:
    return partial_map(office_truth, office)


def door_world(door_width: float = 0.9, res: float = 0.2) -> VoxelGrid:
    """6 x 6 x 3 m box split by a wall at y = 3 with one centred door."""
    z0, z1 = res, 3.0 - res
    x0 = 3.0 - door_width / 2
    x1 = 3.0 + door_width / 2
    boxes = [
        ((0, 0, 0), (6, 6, res)), ((0, 0, 3 - res), (6, 6, 3)),
        ((0, 0, z0), (res, 6, z1)), ((6 - res, 0, z0), (6, 6, z1)),
        ((res, 0, z0), (6 - res, res, z1)), ((res, 6 - res, z0), (6 - res, 6, z1)),
        ((res, 3.0, z0), (x0, 3.0 + res, z1)), ((x1, 3.0, z0), (6 - res, 3.0 + res, z1)),
    ]
    return build_world((0, 0, 0), (6, 6, 3), res, boxes)


def random_partial(rng: np.random.Generator, dims=(12, 10, 8), res: float = 0.2) -> ExploredMap:
    """Random Unknown/Free/Occupied map with the given dimensions."""
    truth = VoxelGrid.filled((0, 0, 0), res, dims, 0)
    m = ExploredMap.empty_like(truth)
    p = rng.dirichlet([1, 1, 1])
    m.grid.cells[:] = rng.choice(3, size=dims, p=p).astype(np.uint8)
    return m


# acceptance results, echoed in the terminal summary as PASS/FAIL lines
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
