import json

from sarmove.autofocus import ESTIMATORS, AutofocusConfig
from sarmove.geometry import RadarParams
from sarmove.refocus import RefocusConfig
from scenarios import arc_path, kinematic_target, line_path, waypoint_path, waypoint_target


class Config:
    """Configuration container with attribute access."""

    def __init__(self, **kwargs):
        for key, value in kwargs.items():
            setattr(self, key, value)


# Platform path mapping
PLATFORM_PATHS = {
    "line": line_path,
    "arc": arc_path,
    "waypoints": waypoint_path,
}

# Target path mapping
TARGET_PATHS = {
    "kinematic": kinematic_target,
    "waypoints": waypoint_target,
}

DEFAULTS = {
    "name": "scenario",
    "seed": 0,
    "snr_db": None,
    "scene_center": [0.0, 0.0, 0.0],
    "scene_extent": 50.0,
    "targets": [],
    "roi": None,
    "refocus": {},
}


def _lookup(table, name, what):
    try:
        return table[name]
    except KeyError:
        raise ValueError(f"Unknown {what}: {name}") from None


def parse_config_from_json(config_dict):
    """Convert JSON config dict to Config object with defaults, mappings and physical guards."""
    for key in ("radar", "platform"):
        if key not in config_dict:
            raise ValueError(f"scenario is missing the '{key}' block")
    config = Config(**{**DEFAULTS, **config_dict})

    # Set reference to mappings
    config.radar_params = RadarParams(**config.radar)
    config.platform_fn = _lookup(PLATFORM_PATHS, config.platform.get("path", "line"), "platform path")
    config.target_fns = [_lookup(TARGET_PATHS, t.get("path", "kinematic"), "target path") for t in config.targets]
    _lookup(ESTIMATORS, config.refocus.get("autofocus", {}).get("estimator", "pga"), "estimator")

    if len(config.scene_center) != 3:
        raise ValueError(f"scene_center must be [x, y, z], got {config.scene_center}")
    if not config.scene_extent > 0:
        raise ValueError(f"scene_extent must be positive, got {config.scene_extent}")
    return config


def to_refocus_config(config, estimator=None):
    """Library RefocusConfig from the scenario's optional `refocus` block (config may be None)."""
    block = dict(getattr(config, "refocus", None) or {})
    autofocus = dict(block.pop("autofocus", {}))
    if estimator is not None:
        autofocus["estimator"] = estimator
    _lookup(ESTIMATORS, autofocus.get("estimator", "pga"), "estimator")
    try:
        return RefocusConfig(**block, autofocus=AutofocusConfig(**autofocus))
    except TypeError as e:
        raise ValueError(f"bad refocus settings: {e}") from None


def load_config(path, job_idx=0):
    """Load one scenario from a JSON file holding a scenario or a list of them."""
    with open(path, "r") as f:
        config_dict = json.load(f)
    if isinstance(config_dict, list):
        try:
            config_dict = config_dict[job_idx]
        except IndexError:
            raise ValueError(f"job_idx {job_idx} out of range for {len(config_dict)} scenarios") from None
    return parse_config_from_json(config_dict)
