import jax
import jax.numpy as jnp
import numpy as np
import pytest

from configs import parse_config_from_json
from sarmove.echo_sim import simulate
from sarmove.pfa import ComplexImage, SpatialFrequencyGrid, polar_format
from scenarios import build_scenario

# 5 s aperture, 100 m/s at 5 km ground range and 3 km altitude: K = 0.02 /s, Y0 ~ 53.9 rad/m
WIDE_RADAR = {
    "carrier_frequency": 1.5e9,
    "range_bandwidth": 6.0e8,
    "num_range_freq_samples": 128,
    "num_pulses": 256,
    "pulse_interval": 5.0 / 256,
}
NARROW_RADAR = {
    "carrier_frequency": 1.5e9,
    "range_bandwidth": 1.5e8,
    "num_range_freq_samples": 64,
    "num_pulses": 128,
    "pulse_interval": 5.0 / 128,
}
LINE_PLATFORM = {"path": "line", "ground_range": 5000.0, "altitude": 3000.0, "speed": 100.0}

STATIONARY_TARGETS = [
    {"position": [0.0, 0.0, 0.0]},
    {"position": [20.0, 3.0, 0.0], "reflectivity": 0.8},
    {"position": [-30.0, -4.0, 0.0], "reflectivity": 0.6},
]
CONSTANT_VELOCITY_TARGET = {"position": [0.0, 0.0, 0.0], "velocity": [8.0, 0.0, 0.0]}
ACCELERATING_TARGET = {
    "position": [0.0, 0.0, 0.0],
    "velocity": [6.0, 0.2, 0.0],
    "acceleration": [0.0, -0.1, 0.0],
}
RADIAL_TARGET = {"position": [0.0, 0.0, 0.0], "velocity": [0.0, 0.3, 0.0]}


def scenario_config(radar, targets, **overrides):
    config_dict = {
        "radar": dict(radar),
        "platform": dict(LINE_PLATFORM),
        "scene_extent": 30.0,
        "targets": [dict(t) for t in targets],
    }
    config_dict.update(overrides)
    return parse_config_from_json(config_dict)


def make_scene(radar, targets, **overrides):
    return build_scenario(scenario_config(radar, targets, **overrides))


def form(params, geometry, targets, snr_db=None, seed=0):
    ph = simulate(params, geometry, targets, snr_db=snr_db, key=jax.random.PRNGKey(seed))
    return polar_format(params, geometry)(ph)


def make_grid(num_x=128, num_y=64, y0=53.88, tan_rate=0.02, aperture=5.0, band=21.5):
    return SpatialFrequencyGrid(
        num_x=num_x,
        num_y=num_y,
        x_step=y0 * aperture / num_x,
        y_step=band / num_y,
        y0=y0,
        phi_ref=1.03,
        carrier_frequency=1.5e9,
        tan_rate=tan_rate,
    )


def impulse_image(pixels, num_x=128, num_y=64, amplitudes=None):
    """ComplexImage with unit (or given) impulses at integer (azimuth, range) pixels."""
    data = np.zeros((num_x, num_y), dtype=complex)
    amplitudes = amplitudes or [1.0] * len(pixels)
    for (az, rg), a in zip(pixels, amplitudes):
        data[az, rg] = a
    return ComplexImage(data=jnp.asarray(data), grid=make_grid(num_x, num_y))


def relative_error(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


@pytest.fixture(scope="session")
def stationary_scene():
    return make_scene(NARROW_RADAR, STATIONARY_TARGETS, scene_extent=40.0)


@pytest.fixture(scope="session")
def stationary_image(stationary_scene):
    return form(*stationary_scene)


@pytest.fixture(scope="session")
def moving_scene():
    return make_scene(WIDE_RADAR, [CONSTANT_VELOCITY_TARGET, ACCELERATING_TARGET])
