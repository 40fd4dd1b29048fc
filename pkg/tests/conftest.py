"""Shared fixtures for LoRaWAN Gateway Planner tests."""

import pytest

from lorawan_gateway_planner.models import Position
from lorawan_gateway_planner.scenario import build_grid, save_scenario


def make_small_scenario():
    """3 x 3 candidates at 100 m spacing serving four EDs at 1.5 m."""
    eds = [
        Position(x_m=25.0, y_m=25.0, z_m=1.5),
        Position(x_m=175.0, y_m=25.0, z_m=1.5),
        Position(x_m=25.0, y_m=175.0, z_m=1.5),
        Position(x_m=175.0, y_m=175.0, z_m=1.5),
    ]
    return build_grid(
        origin=Position(x_m=0.0, y_m=0.0, z_m=30.0),
        nx=3,
        ny=3,
        spacing_m=100.0,
        gw_height_m=30.0,
        ed_layout=eds,
    )


@pytest.fixture
def small_scenario():
    """Small grid scenario for fast end-to-end runs."""
    return make_small_scenario()


@pytest.fixture
def small_scenario_file(tmp_path, small_scenario):
    """Small scenario written to a JSON file."""
    path = tmp_path / "scenario.json"
    save_scenario(small_scenario, path)
    return path
