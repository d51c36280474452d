import warnings

import jax
import jax.numpy as jnp
import numpy as np
from scipy.interpolate import CubicSpline

from sarmove.echo_sim import PointTarget, simulate
from sarmove.geometry import Trajectory, derive_geometry, far_field_phase

FAR_FIELD_LIMIT = 0.1  # rad


def line_path(params, spec, scene_center):
    """Straight, level pass at constant speed; broadside to the scene centre at t = 0.

    spec: {"ground_range": m, "altitude": m, "speed": m/s}
    """
    t = params.t_axis
    ground_range, altitude, speed = spec["ground_range"], spec["altitude"], spec["speed"]
    if not ground_range > 0 or not altitude > 0 or speed == 0:
        raise ValueError("line path needs positive ground_range and altitude and a nonzero speed")
    positions = jnp.stack([speed * t, jnp.full_like(t, -ground_range), jnp.full_like(t, altitude)], axis=1)
    return Trajectory(t, positions + jnp.asarray(scene_center)[None, :])


def arc_path(params, spec, scene_center):
    """Circular arc about the scene centre at constant altitude.

    spec: {"radius": m, "altitude": m, "angular_rate": rad/s}
    """
    t = params.t_axis
    radius, altitude, rate = spec["radius"], spec["altitude"], spec["angular_rate"]
    if not radius > 0 or not altitude > 0 or rate == 0:
        raise ValueError("arc path needs positive radius and altitude and a nonzero angular_rate")
    angle = rate * t
    positions = jnp.stack(
        [radius * jnp.sin(angle), -radius * jnp.cos(angle), jnp.full_like(t, altitude)], axis=1
    )
    return Trajectory(t, positions + jnp.asarray(scene_center)[None, :])


def waypoint_path(params, spec, scene_center=None):
    """Cubic-spline path through {"t": [...], "positions": [[x, y, z], ...]} (absolute coordinates)."""
    t_knots = np.asarray(spec["t"], dtype=float)
    knots = np.asarray(spec["positions"], dtype=float)
    if knots.ndim != 2 or knots.shape != (len(t_knots), 3) or len(t_knots) < 2:
        raise ValueError("waypoints need matching 't' and 'positions' lists with at least two entries")
    t = np.asarray(params.t_axis)
    if t[0] < t_knots[0] or t[-1] > t_knots[-1]:
        raise ValueError("waypoints do not cover the aperture time span")
    positions = CubicSpline(t_knots, knots, axis=0)(t)
    return Trajectory(params.t_axis, jnp.asarray(positions))


def kinematic_target(params, spec, scene_center):
    """Target from position (relative to the scene centre), velocity and acceleration."""
    t = params.t_axis[:, None]
    p = jnp.asarray(spec.get("position", [0.0, 0.0, 0.0]), dtype=jnp.float64)
    v = jnp.asarray(spec.get("velocity", [0.0, 0.0, 0.0]), dtype=jnp.float64)
    a = jnp.asarray(spec.get("acceleration", [0.0, 0.0, 0.0]), dtype=jnp.float64)
    positions = jnp.asarray(scene_center)[None, :] + p[None, :] + v[None, :] * t + 0.5 * a[None, :] * t**2
    return PointTarget(Trajectory(params.t_axis, positions), _reflectivity(spec))


def waypoint_target(params, spec, scene_center=None):
    return PointTarget(waypoint_path(params, spec), _reflectivity(spec))


def _reflectivity(spec):
    value = spec.get("reflectivity", 1.0)
    if isinstance(value, (list, tuple)):
        return complex(value[0], value[1])
    return complex(value)


def build_scenario(config):
    """ScenarioConfig -> (RadarParams, CollectionGeometry, list of PointTarget)."""
    params = config.radar_params
    center = jnp.asarray(config.scene_center, dtype=jnp.float64)
    platform = config.platform_fn(params, config.platform, center)
    geometry = derive_geometry(platform, center)

    phase = float(far_field_phase(params, geometry, config.scene_extent))
    if phase > FAR_FIELD_LIMIT:
        warnings.warn(
            f"scene radius {config.scene_extent} m leaves {phase:.3f} rad of wavefront curvature, "
            f"above the {FAR_FIELD_LIMIT} rad polar-format limit"
        )

    targets = [config.target_fns[i](params, spec, center) for i, spec in enumerate(config.targets)]
    return params, geometry, targets


def simulate_scenario(config, logger=None):
    """Raw phase history of a parsed scenario, noise drawn from PRNGKey(config.seed)."""
    params, geometry, targets = build_scenario(config)
    key = jax.random.PRNGKey(config.seed)
    ph = simulate(params, geometry, targets, snr_db=config.snr_db, key=key)
    if logger is not None:
        logger.log_stage("simulate", targets=len(targets), shape=ph.shape, snr_db=config.snr_db)
    return ph, params, geometry, targets
