from dataclasses import dataclass, field

import jax.numpy as jnp

C = 2.99792458e8  # propagation speed, m/s


def centered_axis(num, step, origin=0.0):
    """Uniform axis with `origin` on sample num // 2."""
    return origin + (jnp.arange(num) - num // 2) * step


@dataclass(frozen=True)
class RadarParams:
    carrier_frequency: float
    range_bandwidth: float
    num_range_freq_samples: int
    num_pulses: int
    pulse_interval: float
    propagation_speed: float = C

    def __post_init__(self):
        if not self.carrier_frequency > 0:
            raise ValueError(f"carrier_frequency must be positive, got {self.carrier_frequency}")
        if not self.range_bandwidth > 0:
            raise ValueError(f"range_bandwidth must be positive, got {self.range_bandwidth}")
        if not self.range_bandwidth < 2 * self.carrier_frequency:
            raise ValueError("range_bandwidth must be below twice the carrier frequency")
        if self.num_range_freq_samples < 2 or self.num_pulses < 2:
            raise ValueError("sample counts must be at least 2")
        if not self.pulse_interval > 0:
            raise ValueError(f"pulse_interval must be positive, got {self.pulse_interval}")

    @property
    def wavelength(self):
        return self.propagation_speed / self.carrier_frequency

    @property
    def freq_step(self):
        return self.range_bandwidth / self.num_range_freq_samples

    @property
    def center_pulse(self):
        return self.num_pulses // 2

    @property
    def t_axis(self):
        return centered_axis(self.num_pulses, self.pulse_interval)

    @property
    def fr_axis(self):
        return centered_axis(self.num_range_freq_samples, self.freq_step)


@dataclass(frozen=True)
class Trajectory:
    """Positions sampled on the slow-time grid.

    Args:
        t: slow time of each sample, shape (M,)
        positions: x, y, z in metres, shape (M, 3)
    """

    t: jnp.ndarray
    positions: jnp.ndarray

    def __post_init__(self):
        t = jnp.asarray(self.t, dtype=jnp.float64)
        positions = jnp.asarray(self.positions, dtype=jnp.float64)
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise ValueError(f"positions must have shape (M, 3), got {positions.shape}")
        if t.shape[0] != positions.shape[0]:
            raise ValueError("t and positions must have the same length")
        if not bool(jnp.all(jnp.diff(t) > 0)):
            raise ValueError("trajectory time samples must be strictly increasing")
        if not bool(jnp.all(jnp.isfinite(positions))):
            raise ValueError("trajectory positions must be finite")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "positions", positions)

    def __len__(self):
        return self.t.shape[0]

    def translated(self, offset):
        return Trajectory(self.t, self.positions + jnp.asarray(offset)[None, :])

    def same_grid(self, other):
        return len(self) == len(other) and bool(jnp.allclose(self.t, other.t, rtol=0, atol=1e-12))


@dataclass(frozen=True)
class CollectionGeometry:
    platform: Trajectory
    scene_center: jnp.ndarray
    r_c: jnp.ndarray
    theta: jnp.ndarray
    phi: jnp.ndarray
    phi_ref: float
    center_index: int = field(default=0)

    @property
    def t_axis(self):
        return self.platform.t

    @property
    def tan_theta(self):
        return jnp.tan(self.theta)


def derive_geometry(platform, scene_center):
    """Range and angle histories of the antenna phase centre about the scene centre.

    phi is measured from the vertical, theta in the ground plane from the
    broadside direction, i.e. the horizontal line of sight at the centre pulse.
    Positive theta is counter-clockwise seen from above.
    """
    center = jnp.asarray(scene_center, dtype=jnp.float64)
    los = center[None, :] - platform.positions
    r_c = jnp.linalg.norm(los, axis=1)
    if bool(jnp.any(r_c <= 0)):
        raise ValueError("scene center coincides with a platform sample (zero range)")

    horizontal = los[:, :2]
    ground = jnp.linalg.norm(horizontal, axis=1)
    height = platform.positions[:, 2] - center[2]
    phi = jnp.arctan2(ground, height)

    c = len(platform) // 2
    if not float(ground[c]) > 0:
        raise ValueError("platform is directly above the scene center at the centre pulse")
    broadside = horizontal[c] / ground[c]
    cross = broadside[0] * horizontal[:, 1] - broadside[1] * horizontal[:, 0]
    dot = horizontal @ broadside
    theta = jnp.arctan2(cross, dot)

    return CollectionGeometry(
        platform=platform,
        scene_center=center,
        r_c=r_c,
        theta=theta,
        phi=phi,
        phi_ref=float(phi[c]),
        center_index=c,
    )


def target_range(target, platform):
    """Per-pulse distance between a target trajectory and the platform."""
    if not target.same_grid(platform):
        raise ValueError("target and platform trajectories are not on the same slow-time grid")
    r_m = jnp.linalg.norm(target.positions - platform.positions, axis=1)
    if bool(jnp.any(r_m <= 0)):
        raise ValueError("target coincides with the platform")
    return r_m


def far_field_phase(params, geometry, scene_radius):
    """Wavefront-curvature phase (rad) left by PFA at the edge of a scene of given radius."""
    r0 = float(geometry.r_c[geometry.center_index])
    span = float(jnp.max(geometry.theta) - jnp.min(geometry.theta))
    return jnp.pi * scene_radius**2 * span**2 / (2 * params.wavelength * r0)
