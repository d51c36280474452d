import json

import jax.numpy as jnp
import numpy as np
import pytest

from configs import load_config, parse_config_from_json, to_refocus_config
from conftest import LINE_PLATFORM, NARROW_RADAR, scenario_config
from sarmove.geometry import RadarParams
from scenarios import arc_path, build_scenario, line_path, simulate_scenario, waypoint_path

PARAMS = RadarParams(**NARROW_RADAR)
CENTER = jnp.array([10.0, -5.0, 0.0])


def test_defaults_and_mappings():
    config = parse_config_from_json({"radar": dict(NARROW_RADAR), "platform": dict(LINE_PLATFORM)})
    assert config.seed == 0
    assert config.snr_db is None
    assert config.targets == []
    assert config.refocus == {}
    assert config.platform_fn is line_path
    assert config.radar_params == PARAMS


@pytest.mark.parametrize(
    "overrides",
    [
        {"platform": {"path": "spiral"}},
        {"targets": [{"path": "teleport"}]},
        {"refocus": {"autofocus": {"estimator": "mapdrift"}}},
        {"scene_center": [0.0, 0.0]},
        {"scene_extent": 0.0},
    ],
)
def test_bad_scenarios_are_rejected(overrides):
    config_dict = {"radar": dict(NARROW_RADAR), "platform": dict(LINE_PLATFORM), **overrides}
    with pytest.raises(ValueError):
        parse_config_from_json(config_dict)


def test_missing_radar_block():
    with pytest.raises(ValueError, match="radar"):
        parse_config_from_json({"platform": dict(LINE_PLATFORM)})


def test_load_config_selects_job(tmp_path):
    path = tmp_path / "jobs.json"
    jobs = [
        {"name": "first", "radar": dict(NARROW_RADAR), "platform": dict(LINE_PLATFORM)},
        {"name": "second", "seed": 7, "radar": dict(NARROW_RADAR), "platform": dict(LINE_PLATFORM)},
    ]
    path.write_text(json.dumps(jobs))
    config = load_config(path, job_idx=1)
    assert config.name == "second"
    assert config.seed == 7
    with pytest.raises(ValueError):
        load_config(path, job_idx=5)


def test_line_path_is_broadside_at_centre_pulse():
    platform = line_path(PARAMS, LINE_PLATFORM, CENTER)
    c = PARAMS.num_pulses // 2
    np.testing.assert_allclose(platform.positions[c], CENTER + jnp.array([0.0, -5000.0, 3000.0]), atol=1e-9)
    step = platform.positions[1] - platform.positions[0]
    np.testing.assert_allclose(step, [100.0 * PARAMS.pulse_interval, 0.0, 0.0], atol=1e-9)
    with pytest.raises(ValueError):
        line_path(PARAMS, {**LINE_PLATFORM, "speed": 0.0}, CENTER)


def test_arc_path_keeps_constant_ground_range():
    spec = {"radius": 4000.0, "altitude": 2500.0, "angular_rate": 0.01}
    platform = arc_path(PARAMS, spec, CENTER)
    horizontal = platform.positions[:, :2] - CENTER[None, :2]
    np.testing.assert_allclose(jnp.linalg.norm(horizontal, axis=1), 4000.0, rtol=1e-12)
    np.testing.assert_allclose(platform.positions[:, 2], 2500.0)


def test_waypoints_must_cover_the_aperture():
    spec = {
        "t": [-3.0, 0.0, 3.0],
        "positions": [[-300.0, -5000.0, 3000.0], [0.0, -5000.0, 3000.0], [300.0, -5000.0, 3000.0]],
    }
    platform = waypoint_path(PARAMS, spec)
    np.testing.assert_allclose(platform.positions[:, 0], 100.0 * PARAMS.t_axis, atol=1e-6)
    with pytest.raises(ValueError, match="cover"):
        waypoint_path(PARAMS, {"t": [-1.0, 1.0], "positions": spec["positions"][:2]})


def test_kinematic_target_and_reflectivity():
    spec = {
        "position": [5.0, 2.0, 0.0],
        "velocity": [8.0, 0.0, 0.0],
        "acceleration": [0.0, -0.1, 0.0],
        "reflectivity": [0.0, 1.0],
    }
    config = scenario_config(NARROW_RADAR, [spec])
    params, geometry, (target,) = build_scenario(config)
    t = params.t_axis
    c = params.num_pulses // 2
    np.testing.assert_allclose(target.trajectory.positions[c], [5.0, 2.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(target.trajectory.positions[:, 0], 5.0 + 8.0 * t, atol=1e-12)
    np.testing.assert_allclose(target.trajectory.positions[:, 1], 2.0 - 0.05 * t**2, atol=1e-12)
    assert target.reflectivity == 1j


def test_far_field_warning():
    with pytest.warns(UserWarning, match="wavefront curvature"):
        build_scenario(scenario_config(NARROW_RADAR, [], scene_extent=2000.0))


def test_simulation_is_seeded():
    targets = [{"position": [0.0, 0.0, 0.0]}]
    a, _, _, _ = simulate_scenario(scenario_config(NARROW_RADAR, targets, snr_db=20.0, seed=3))
    b, _, _, _ = simulate_scenario(scenario_config(NARROW_RADAR, targets, snr_db=20.0, seed=3))
    c, _, _, _ = simulate_scenario(scenario_config(NARROW_RADAR, targets, snr_db=20.0, seed=4))
    np.testing.assert_array_equal(a.data, b.data)
    assert not np.allclose(a.data, c.data)
    assert a.stage == "raw"


def test_refocus_settings():
    config = scenario_config(
        NARROW_RADAR, [], refocus={"ape_order": 6, "rcm_bound_cells": 2.0, "autofocus": {"max_iterations": 4}}
    )
    refocus = to_refocus_config(config)
    assert refocus.ape_order == 6
    assert refocus.rcm_bound_cells == 2.0
    assert refocus.autofocus.max_iterations == 4
    assert refocus.autofocus.estimator == "pga"
    assert to_refocus_config(config, estimator="minentropy").autofocus.estimator == "minentropy"
    assert to_refocus_config(None).autofocus.estimator == "pga"

    bad = scenario_config(NARROW_RADAR, [], refocus={"focus_harder": True})
    with pytest.raises(ValueError):
        to_refocus_config(bad)
    with pytest.raises(ValueError):
        to_refocus_config(config, estimator="mapdrift")
