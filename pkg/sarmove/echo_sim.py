import warnings
from dataclasses import dataclass, field

import jax
import jax.numpy as jnp

from sarmove.geometry import C, Trajectory, centered_axis, target_range

STAGES = ("raw", "motion_compensated", "range_resampled", "rcm_linearized", "keystoned")


class StageError(ValueError):
    """Raised when a phase history is handed to the wrong processing step."""


@dataclass(frozen=True)
class PointTarget:
    trajectory: Trajectory
    reflectivity: complex = 1.0

    def __post_init__(self):
        if not abs(self.reflectivity) > 0:
            raise ValueError("target reflectivity must be nonzero")


@dataclass(frozen=True)
class PhaseHistory:
    """2-D complex samples indexed [pulse, range frequency].

    Both axes are uniform with zero on sample n // 2; `metadata["chain"]`
    records every stage the samples went through.
    """

    data: jnp.ndarray
    pulse_interval: float
    freq_step: float
    carrier_frequency: float
    stage: str = "raw"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.stage not in STAGES:
            raise StageError(f"Unknown stage: {self.stage}")
        if jnp.ndim(self.data) != 2:
            raise ValueError(f"phase history must be 2-D, got shape {jnp.shape(self.data)}")
        if "chain" not in self.metadata:
            object.__setattr__(self, "metadata", {**self.metadata, "chain": [self.stage]})

    @property
    def shape(self):
        return self.data.shape

    @property
    def t_axis(self):
        return centered_axis(self.shape[0], self.pulse_interval)

    @property
    def fr_axis(self):
        return centered_axis(self.shape[1], self.freq_step)

    @property
    def chain(self):
        return list(self.metadata["chain"])

    def require(self, stage):
        if self.stage != stage:
            raise StageError(f"expected a '{stage}' phase history, got '{self.stage}'")

    def advance(self, data, stage, **metadata):
        """Return the next-stage phase history; stages only move forward."""
        if stage not in STAGES:
            raise StageError(f"Unknown stage: {stage}")
        if STAGES.index(stage) <= STAGES.index(self.stage):
            raise StageError(f"cannot go from '{self.stage}' to '{stage}'")
        if data.shape != self.shape:
            raise ValueError(f"stage output shape {data.shape} differs from {self.shape}")
        merged = {**self.metadata, **metadata, "chain": self.chain + [stage]}
        return PhaseHistory(
            data=data,
            pulse_interval=self.pulse_interval,
            freq_step=self.freq_step,
            carrier_frequency=self.carrier_frequency,
            stage=stage,
            metadata=merged,
        )


def range_phasor(carrier_frequency, fr_axis, ranges):
    """exp{-j (4 pi / c)(f_c + f_r) r(t)} on the [pulse, frequency] grid."""
    wavenumber = 4 * jnp.pi / C * (carrier_frequency + fr_axis)
    return jnp.exp(-1j * ranges[:, None] * wavenumber[None, :])


def simulate_range_history(params, r_m, reflectivity=1.0):
    """Raw phase history of a single scatterer with the given range history."""
    r_m = jnp.asarray(r_m, dtype=jnp.float64)
    if r_m.shape != (params.num_pulses,):
        raise ValueError(f"range history must have {params.num_pulses} samples, got {r_m.shape}")
    data = reflectivity * range_phasor(params.carrier_frequency, params.fr_axis, r_m)
    return PhaseHistory(
        data=data,
        pulse_interval=params.pulse_interval,
        freq_step=params.freq_step,
        carrier_frequency=params.carrier_frequency,
    )


def simulate(params, geometry, targets, snr_db=None, key=None):
    """Demodulated, match-filtered phase history of point targets.

    Args:
        params: RadarParams
        geometry: CollectionGeometry of the platform
        targets: list of PointTarget on the pulse grid
        snr_db: optional per-sample SNR of additive complex white Gaussian noise
        key: jax PRNGKey for the noise draw

    Returns:
        raw PhaseHistory; an empty target list gives a zero grid flagged `empty_scene`
    """
    shape = (params.num_pulses, params.num_range_freq_samples)
    if len(geometry.platform) != params.num_pulses:
        raise ValueError("platform trajectory length differs from num_pulses")

    data = jnp.zeros(shape, dtype=jnp.complex128)
    for target in targets:
        r_m = target_range(target.trajectory, geometry.platform)
        data = data + simulate_range_history(params, r_m, target.reflectivity).data

    metadata = {"empty_scene": len(targets) == 0, "num_targets": len(targets)}
    if len(targets) == 0:
        warnings.warn("simulating an empty scene, phase history is all zeros")
    elif snr_db is not None:
        if key is None:
            raise ValueError("a PRNG key is required when snr_db is set")
        signal_power = jnp.mean(jnp.abs(data) ** 2)
        sigma = jnp.sqrt(signal_power / 10 ** (snr_db / 10) / 2)
        k_re, k_im = jax.random.split(key)
        noise = jax.random.normal(k_re, shape) + 1j * jax.random.normal(k_im, shape)
        data = data + sigma * noise
        metadata["snr_db"] = float(snr_db)

    return PhaseHistory(
        data=data,
        pulse_interval=params.pulse_interval,
        freq_step=params.freq_step,
        carrier_frequency=params.carrier_frequency,
        metadata=metadata,
    )


def motion_compensate(ph, geometry):
    """Reference every pulse to the scene centre: multiply by exp{+j(4 pi/c)(f_c+f_r) r_c(t)}."""
    ph.require("raw")
    if geometry.r_c.shape[0] != ph.shape[0]:
        raise ValueError("geometry and phase history have different pulse counts")
    compensation = jnp.conj(range_phasor(ph.carrier_frequency, ph.fr_axis, geometry.r_c))
    return ph.advance(ph.data * compensation, "motion_compensated")
