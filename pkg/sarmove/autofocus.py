import warnings
from dataclasses import dataclass, replace

import jax
import jax.numpy as jnp
import numpy as np
from scipy.optimize import golden

from sarmove.metrics import image_entropy, to_azimuth_data, to_azimuth_image
from sarmove.pfa import Spectrum, image_from_spectrum, spectrum_from_image

MIN_RANGE_CELLS = 8


class EstimationError(RuntimeError):
    """Autofocus could not produce an estimate; `diagnostics` says why."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class AutofocusConfig:
    estimator: str = "pga"
    # phase gradient autofocus
    max_iterations: int = 10
    window_start: float = 1.0
    window_shrink: float = 0.7
    window_floor: float = 0.05
    rms_tolerance: float = 0.1
    gate_db: float = 20.0
    # minimum entropy
    basis_order: int = 6
    grid_points: int = 51
    search_radius: float = 50.0
    radius_shrink: float = 4.0
    min_sweeps: int = 2
    max_sweeps: int = 8
    entropy_tolerance: float = 1e-4


@dataclass(frozen=True)
class ApeEstimate:
    x_axis: jnp.ndarray
    phi0_hat: jnp.ndarray
    history: tuple = ()
    quality: int = 0
    iterations: int = 0
    coefficients: jnp.ndarray = None
    flags: tuple = ()


def remove_linear(x_axis, values):
    basis = jnp.stack([jnp.ones_like(x_axis), x_axis], axis=1)
    fit, _, _, _ = jnp.linalg.lstsq(basis, values)
    return values - basis @ fit


def detrend(ape):
    """Least-squares removal of the constant and linear components over X."""
    if not bool(jnp.all(jnp.isfinite(ape.phi0_hat))):
        raise ValueError("APE estimate contains non-finite samples")
    return replace(ape, phi0_hat=remove_linear(ape.x_axis, ape.phi0_hat))


def apply_phase(data, phi0):
    """Multiply the azimuth data of every range bin by exp(-j phi0)."""
    return to_azimuth_image(to_azimuth_data(data) * jnp.exp(-1j * phi0)[:, None])


def apply_ape(image, phi0):
    return replace(image, data=apply_phase(image.data, jnp.asarray(phi0)))


def _x_axis(image):
    if hasattr(image, "grid"):
        return image.grid.x_axis
    return jnp.arange(image.shape[0], dtype=jnp.float64) - image.shape[0] // 2


def _data(image):
    data = image.data if hasattr(image, "data") else jnp.asarray(image)
    if not bool(jnp.all(jnp.isfinite(data))):
        raise EstimationError("subimage contains non-finite pixels")
    return data


def default_reduction_factor(rcm_bound_cells=3.0, range_extent=None):
    """Smallest power of two >= the RCM bound, keeping at least 8 coarse range cells."""
    factor = 1
    while factor < rcm_bound_cells:
        factor *= 2
    if range_extent is not None:
        while factor > 1 and range_extent // factor < MIN_RANGE_CELLS:
            factor //= 2
    return factor


def reduce_range_resolution(subimage, factor):
    """Keep the central 1/factor of the Y band; azimuth is untouched."""
    factor = int(factor)
    num_y = subimage.shape[1]
    num_keep = num_y // factor if factor >= 1 else 0
    if factor < 1 or num_keep < MIN_RANGE_CELLS:
        raise ValueError(
            f"range reduction factor {factor} leaves {num_keep} range cells, need at least {MIN_RANGE_CELLS}"
        )
    spectrum = spectrum_from_image(subimage)
    start = num_y // 2 - num_keep // 2
    kept = Spectrum(spectrum.data[:, start : start + num_keep], subimage.grid.band(num_keep))
    image = image_from_spectrum(kept, subimage.provenance + (f"reduce_range_resolution x{factor}",))
    return replace(image, origin=subimage.origin, parent_shape=subimage.parent_shape)


@jax.jit
def _pga_step(data, width, gate):
    num = data.shape[0]
    c = num // 2
    intensity = jnp.abs(data) ** 2

    # circularly shift the brightest pixel of every range bin to the centre
    peak = jnp.argmax(intensity, axis=0)
    index = (jnp.arange(num)[:, None] + peak[None, :] - c) % num
    shifted = jnp.take_along_axis(data, index, axis=0)

    window = jnp.abs(jnp.arange(num) - c) <= width / 2
    g = to_azimuth_data(shifted * window[:, None])

    energy = jnp.sum(intensity, axis=0)
    selected = energy >= jnp.max(energy) * gate
    lagged = jnp.where(selected[None, :], jnp.conj(g[:-1]) * g[1:], 0)
    dphi = jnp.angle(jnp.sum(lagged, axis=1))
    phi = jnp.concatenate([jnp.zeros(1), jnp.cumsum(dphi)])
    return phi, jnp.sum(selected)


def pga_estimate(subimage, config=None, logger=None):
    """Phase gradient autofocus with a shrinking azimuth window and the ML gradient kernel."""
    config = config or AutofocusConfig()
    data = _data(subimage)
    x_axis = _x_axis(subimage)
    num = data.shape[0]
    if not float(jnp.sum(jnp.abs(data) ** 2)) > 0:
        raise EstimationError("no range bin passes the contrast gate", {"energy": 0.0})

    gate = 10 ** (-config.gate_db / 10)
    total = jnp.zeros(num)
    history = []
    fraction = config.window_start
    quality = 0
    for iteration in range(1, config.max_iterations + 1):
        width = max(fraction, config.window_floor) * num
        phi, used = _pga_step(data, width, gate)
        quality = int(used)
        if quality == 0:
            raise EstimationError(
                "no range bin passes the contrast gate",
                {"iteration": iteration, "gate_db": config.gate_db},
            )
        phi = remove_linear(x_axis, phi)
        data = apply_phase(data, phi)
        total = total + phi
        rms = float(jnp.sqrt(jnp.mean(phi**2)))
        history.append(rms)
        if logger is not None:
            logger.log_stage("pga", iteration=iteration, rms=rms, bins=quality, window=width / num)
        if rms < config.rms_tolerance:
            break
        fraction *= config.window_shrink

    return detrend(
        ApeEstimate(
            x_axis=x_axis,
            phi0_hat=total,
            history=tuple(history),
            quality=quality,
            iterations=len(history),
        )
    )


def minentropy_estimate(subimage, basis_order=6, config=None, logger=None):
    """Coordinate descent on the polynomial coefficients (orders 2..basis_order) of phi0.

    Each coefficient is searched on a grid around its current value and then
    refined by golden-section search; the grid radius shrinks every sweep.
    """
    config = config or AutofocusConfig()
    if basis_order < 2:
        raise ValueError(f"basis_order must be at least 2, got {basis_order}")
    data = _data(subimage)
    if not float(jnp.sum(jnp.abs(data) ** 2)) > 0:
        raise EstimationError("cannot minimize the entropy of an all-zero subimage")
    x_axis = _x_axis(subimage)
    u = x_axis / jnp.max(jnp.abs(x_axis))
    basis = u[:, None] ** jnp.arange(2, basis_order + 1)[None, :]
    az_data = to_azimuth_data(data)

    @jax.jit
    def cost(coefficients):
        phi = basis @ coefficients
        return image_entropy(to_azimuth_image(az_data * jnp.exp(-1j * phi)[:, None]))

    batch_cost = jax.jit(jax.vmap(cost))

    num_terms = basis.shape[1]
    coefficients = jnp.zeros(num_terms)
    start_entropy = float(cost(coefficients))
    current = start_entropy
    history = [current]
    radius = config.search_radius
    offsets = jnp.linspace(-1.0, 1.0, config.grid_points)

    for sweep in range(config.max_sweeps):
        sweep_start = current
        for k in range(num_terms):
            candidates = coefficients[k] + radius * offsets
            trials = jnp.tile(coefficients, (config.grid_points, 1)).at[:, k].set(candidates)
            costs = np.asarray(batch_cost(trials))
            i = int(np.argmin(costs))
            best_value, best_cost = float(candidates[i]), float(costs[i])
            if 0 < i < config.grid_points - 1 and costs[i] < costs[i - 1] and costs[i] < costs[i + 1]:

                def line(value, k=k, coefficients=coefficients):
                    return float(cost(coefficients.at[k].set(value)))

                bracket = (float(candidates[i - 1]), best_value, float(candidates[i + 1]))
                value = golden(line, brack=bracket, tol=1e-6)
                value_cost = line(value)
                if value_cost < best_cost:
                    best_value, best_cost = float(value), value_cost
            if best_cost < current:
                coefficients = coefficients.at[k].set(best_value)
                current = best_cost
        radius /= config.radius_shrink
        history.append(current)
        if logger is not None:
            logger.log_stage("minentropy", sweep=sweep + 1, entropy=current)
        if sweep + 1 >= config.min_sweeps and sweep_start - current < config.entropy_tolerance:
            break

    flags = ()
    if not current < start_entropy:
        warnings.warn("entropy did not improve, returning a zero APE estimate")
        coefficients = jnp.zeros(num_terms)
        flags = ("entropy_not_improved",)

    return detrend(
        ApeEstimate(
            x_axis=x_axis,
            phi0_hat=basis @ coefficients,
            history=tuple(history),
            quality=int(data.shape[1]),
            iterations=len(history) - 1,
            coefficients=coefficients,
            flags=flags,
        )
    )


class Estimator:
    """Base class for APE estimators."""

    def __init__(self, config):
        self.config = config

    def estimate(self, subimage, logger=None):
        raise NotImplementedError


class PhaseGradient(Estimator):
    def estimate(self, subimage, logger=None):
        return pga_estimate(subimage, self.config, logger)


class MinimumEntropy(Estimator):
    def estimate(self, subimage, logger=None):
        return minentropy_estimate(subimage, self.config.basis_order, self.config, logger)


# Estimator mapping
ESTIMATORS = {
    "pga": PhaseGradient,
    "minentropy": MinimumEntropy,
}


def get_estimator(config):
    """Factory function to create an estimator instance."""
    try:
        return ESTIMATORS[config.estimator](config)
    except KeyError:
        raise ValueError(f"Unknown estimator: {config.estimator}") from None
