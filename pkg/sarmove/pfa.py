import warnings
from dataclasses import dataclass, replace

import jax.numpy as jnp
import numpy as np
from scipy.interpolate import CubicSpline

from sarmove.abstract import Stage
from sarmove.echo_sim import motion_compensate
from sarmove.geometry import C, centered_axis
from sarmove.interp import resample_columns, resample_rows, zero_fill_fraction

ZERO_FILL_WARNING = 0.05
SIGN_CONVENTION = "image=fftshift(fft2(ifftshift(data)),ortho); +j(a0*Y+a1*X) -> +pixel offset"


@dataclass(frozen=True)
class SpatialFrequencyGrid:
    """Uniform (X, Y) sampling of the keystoned data.

    X = Y0 * t on the keystoned slow-time axis, so X / Y is in seconds.
    """

    num_x: int
    num_y: int
    x_step: float
    y_step: float
    y0: float
    phi_ref: float
    carrier_frequency: float
    tan_rate: float

    @property
    def shape(self):
        return (self.num_x, self.num_y)

    @property
    def x_axis(self):
        return centered_axis(self.num_x, self.x_step)

    @property
    def y_axis(self):
        return centered_axis(self.num_y, self.y_step, self.y0)

    @property
    def x_max(self):
        return float(jnp.max(jnp.abs(self.x_axis)))

    @property
    def range_spacing(self):
        return 2 * jnp.pi / (self.num_y * self.y_step)

    @property
    def azimuth_spacing(self):
        return 2 * jnp.pi / (self.num_x * self.x_step * abs(self.tan_rate))

    def subgrid(self, num_x, num_y):
        """Sampling seen by a num_x by num_y crop of the image formed on this grid."""
        return replace(
            self,
            num_x=num_x,
            num_y=num_y,
            x_step=self.x_step * self.num_x / num_x,
            y_step=self.y_step * self.num_y / num_y,
        )

    def band(self, num_keep):
        """The central `num_keep` Y samples."""
        if not 0 < num_keep <= self.num_y:
            raise ValueError(f"cannot keep {num_keep} of {self.num_y} Y samples")
        return replace(self, num_y=num_keep)

    def pixel_of(self, a0, a1):
        """Fractional (azimuth, range) pixel of the phasor exp{j(a0 Y + a1 X)}."""
        az = self.num_x // 2 + a1 * self.x_step * self.num_x / (2 * jnp.pi)
        rg = self.num_y // 2 + a0 * self.y_step * self.num_y / (2 * jnp.pi)
        return float(az % self.num_x), float(rg % self.num_y)

    def matches(self, other):
        return self.shape == other.shape and np.allclose(
            [self.x_step, self.y_step, self.y0], [other.x_step, other.y_step, other.y0], rtol=1e-12, atol=0
        )


@dataclass(frozen=True)
class ResampleMap:
    delta: jnp.ndarray
    offset: jnp.ndarray
    warp: jnp.ndarray
    tan_rate: float

    def __post_init__(self):
        if not bool(jnp.all(self.delta > 0)):
            raise ValueError("range scale factors must be positive")
        steps = jnp.diff(self.warp)
        if not (bool(jnp.all(steps > 0)) or bool(jnp.all(steps < 0))):
            raise ValueError("azimuth warp must be strictly monotone")


@dataclass(frozen=True)
class ComplexImage:
    """Complex image indexed [azimuth, range] with the (X, Y) grid it was formed from."""

    data: jnp.ndarray
    grid: SpatialFrequencyGrid
    provenance: tuple = ()
    origin: tuple = (0, 0)
    parent_shape: tuple = None

    def __post_init__(self):
        if tuple(self.data.shape) != self.grid.shape:
            raise ValueError(f"image shape {self.data.shape} does not match grid {self.grid.shape}")
        if self.parent_shape is None:
            object.__setattr__(self, "parent_shape", tuple(self.data.shape))

    @property
    def shape(self):
        return tuple(self.data.shape)

    @property
    def range_spacing(self):
        return self.grid.range_spacing

    @property
    def azimuth_spacing(self):
        return self.grid.azimuth_spacing


@dataclass(frozen=True)
class Spectrum:
    data: jnp.ndarray
    grid: SpatialFrequencyGrid


def range_scale_factor(theta, phi, phi_ref):
    theta = jnp.asarray(theta)
    phi = jnp.asarray(phi)
    if not bool(jnp.all(jnp.cos(theta) > 0)):
        raise ValueError("cos(theta) must be positive, geometry is outside the broadside model")
    if not bool(jnp.all(jnp.sin(phi) > 0)):
        raise ValueError("sin(phi) must be positive, geometry is outside the model")
    return jnp.sin(phi_ref) / (jnp.sin(phi) * jnp.cos(theta))


def build_azimuth_warp(geometry):
    """Slow-time warp that makes tan(theta) linear in t.

    Returns:
        (warp, K) with tan(theta(warp(t))) = K t and K the slope of tan(theta) at t = 0
    """
    t = np.asarray(geometry.t_axis)
    tan_theta = np.asarray(geometry.tan_theta)
    steps = np.diff(tan_theta)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise ValueError("tan(theta) is not strictly monotone over the aperture")

    c = geometry.center_index
    tan_rate = float(CubicSpline(t, tan_theta)(t[c], 1))
    order = np.argsort(tan_theta)
    inverse = CubicSpline(tan_theta[order], t[order])
    warp = inverse(tan_rate * t + tan_theta[c])
    warp = warp - warp[c] + t[c]
    return jnp.asarray(warp), tan_rate


def build_resample_map(geometry, params=None):
    delta = range_scale_factor(geometry.theta, geometry.phi, geometry.phi_ref)
    warp, tan_rate = build_azimuth_warp(geometry)
    carrier = params.carrier_frequency if params is not None else 0.0
    return ResampleMap(delta=delta, offset=carrier * (delta - 1), warp=warp, tan_rate=tan_rate)


def build_grid(params, geometry, tan_rate=None):
    if tan_rate is None:
        _, tan_rate = build_azimuth_warp(geometry)
    y0 = 4 * jnp.pi * jnp.sin(geometry.phi_ref) * params.carrier_frequency / C
    return SpatialFrequencyGrid(
        num_x=params.num_pulses,
        num_y=params.num_range_freq_samples,
        x_step=float(y0 * params.pulse_interval),
        y_step=float(4 * jnp.pi * jnp.sin(geometry.phi_ref) * params.freq_step / C),
        y0=float(y0),
        phi_ref=float(geometry.phi_ref),
        carrier_frequency=params.carrier_frequency,
        tan_rate=float(tan_rate),
    )


def _report_zero_fill(name, fraction):
    if fraction > ZERO_FILL_WARNING:
        warnings.warn(f"{name} zero-filled {fraction:.1%} of the samples")


def range_resample(ph, rmap):
    """Evaluate every pulse at delta * f_r + f_c (delta - 1)."""
    ph.require("motion_compensated")
    num_pulses, num_freq = ph.shape
    c = num_freq // 2
    fr = ph.fr_axis
    source = rmap.delta[:, None] * fr[None, :] + (ph.carrier_frequency * (rmap.delta - 1))[:, None]
    positions = source / ph.freq_step + c
    data, valid = resample_rows(ph.data, positions)
    fraction = zero_fill_fraction(valid)
    _report_zero_fill("range_resample", fraction)
    return ph.advance(data, "range_resampled", range_zero_fill=fraction)


def rcm_linearize(ph, warp):
    """Evaluate every range-frequency column at the warped slow time."""
    ph.require("range_resampled")
    num_pulses, num_freq = ph.shape
    positions = jnp.asarray(warp) / ph.pulse_interval + num_pulses // 2
    positions = jnp.broadcast_to(positions[:, None], ph.shape)
    data, valid = resample_columns(ph.data, positions)
    fraction = zero_fill_fraction(valid)
    _report_zero_fill("rcm_linearize", fraction)
    return ph.advance(data, "rcm_linearized", azimuth_zero_fill=fraction)


def keystone_transform(ph, params=None):
    """Rescale slow time by f_c / (f_c + f_r) in every range-frequency column."""
    ph.require("rcm_linearized")
    carrier = params.carrier_frequency if params is not None else ph.carrier_frequency
    num_pulses, _ = ph.shape
    c = num_pulses // 2
    scale = carrier / (carrier + ph.fr_axis)
    index = jnp.arange(num_pulses) - c
    positions = index[:, None] * scale[None, :] + c
    data, valid = resample_columns(ph.data, positions)
    fraction = zero_fill_fraction(valid)
    _report_zero_fill("keystone_transform", fraction)
    return ph.advance(data, "keystoned", keystone_zero_fill=fraction)


def image_from_spectrum(spectrum, provenance=()):
    data = jnp.fft.fftshift(jnp.fft.fft2(jnp.fft.ifftshift(spectrum.data), norm="ortho"))
    return ComplexImage(data=data, grid=spectrum.grid, provenance=tuple(provenance))


def spectrum_from_image(image):
    data = jnp.fft.fftshift(jnp.fft.ifft2(jnp.fft.ifftshift(image.data), norm="ortho"))
    return Spectrum(data=data, grid=image.grid)


def form_image(ph, grid):
    ph.require("keystoned")
    if ph.shape != grid.shape:
        raise ValueError(f"phase history shape {ph.shape} does not match grid {grid.shape}")
    provenance = tuple(ph.chain) + ("form_image", SIGN_CONVENTION)
    return image_from_spectrum(Spectrum(ph.data, grid), provenance)


class MotionCompensate(Stage):
    name = "motion_compensate"

    def __init__(self, geometry, logger=None):
        super().__init__(logger)
        self.geometry = geometry

    def forward(self, ph):
        return motion_compensate(ph, self.geometry)


class RangeResample(Stage):
    name = "range_resample"

    def __init__(self, rmap, logger=None):
        super().__init__(logger)
        self.rmap = rmap

    def forward(self, ph):
        out = range_resample(ph, self.rmap)
        self.log_info["zero_fill"] = out.metadata["range_zero_fill"]
        return out


class RcmLinearize(Stage):
    name = "rcm_linearize"

    def __init__(self, warp, logger=None):
        super().__init__(logger)
        self.warp = warp

    def forward(self, ph):
        out = rcm_linearize(ph, self.warp)
        self.log_info["zero_fill"] = out.metadata["azimuth_zero_fill"]
        return out


class Keystone(Stage):
    name = "keystone"

    def __init__(self, params, logger=None):
        super().__init__(logger)
        self.params = params

    def forward(self, ph):
        out = keystone_transform(ph, self.params)
        self.log_info["zero_fill"] = out.metadata["keystone_zero_fill"]
        return out


class FormImage(Stage):
    name = "form_image"

    def __init__(self, grid, logger=None):
        super().__init__(logger)
        self.grid = grid

    def forward(self, ph):
        image = form_image(ph, self.grid)
        self.log_info["peak"] = float(jnp.max(jnp.abs(image.data)))
        return image


def polar_format(params, geometry, logger=None):
    """The fixed PFA chain: compensate, range resample, linearize RCM, keystone, image."""
    rmap = build_resample_map(geometry, params)
    grid = build_grid(params, geometry, rmap.tan_rate)
    return (
        FormImage(grid, logger)
        @ Keystone(params, logger)
        @ RcmLinearize(rmap.warp, logger)
        @ RangeResample(rmap, logger)
        @ MotionCompensate(geometry, logger)
    )
