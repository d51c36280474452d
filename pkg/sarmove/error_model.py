"""Residual 2-D phase error of a moving target after polar formatting.

The effective range error eta(t) = a0 + a1 t + xi(t) leaves the phase
Y xi(X / Y) on the keystoned (X, Y) grid. Its row at Y = Y0 is the azimuth
phase error phi0(X) = Y0 xi(X / Y0), and the whole surface follows from
phi0 alone: Phi_e(X, Y) = (Y / Y0) phi0(Y0 X / Y).
"""

import warnings
from dataclasses import dataclass, replace

import jax.numpy as jnp
import numpy as np
from scipy.interpolate import CubicSpline, UnivariateSpline

from sarmove.echo_sim import PointTarget
from sarmove.geometry import target_range
from sarmove.pfa import build_azimuth_warp

DETREND_TOLERANCE = 0.05  # rad
EXTRAPOLATION_MARGIN = 1.1


def poly_eval(coefficients, u):
    """Evaluate a polynomial with ascending coefficients."""
    return jnp.polyval(jnp.asarray(coefficients)[::-1], u)


def poly_derivative(coefficients, n=1):
    coefficients = jnp.asarray(coefficients)
    for _ in range(n):
        if coefficients.shape[0] <= 1:
            return jnp.zeros(1)
        coefficients = coefficients[1:] * jnp.arange(1, coefficients.shape[0])
    return coefficients


@dataclass(frozen=True)
class PhaseErrorModel:
    t_axis: jnp.ndarray
    varpi: jnp.ndarray
    eta: jnp.ndarray
    a0: float = None
    a1: float = None
    xi: jnp.ndarray = None  # ascending coefficients in t, xi[0] = xi[1] = 0
    xi_residual: jnp.ndarray = None
    fit_rms: float = None
    flags: tuple = ()

    def xi_at(self, t):
        self._require_xi()
        return poly_eval(self.xi, t)

    def _require_xi(self):
        if self.xi is None:
            raise ValueError("xi has not been fitted, call decompose_eta first")


@dataclass(frozen=True)
class PhaseErrorSurface:
    values: jnp.ndarray
    grid: object
    flags: tuple = ()


@dataclass(frozen=True)
class ApeProfile:
    """Azimuth phase error phi0 sampled on the X axis.

    `coefficients` are ascending in u = X / x_scale when a polynomial fit exists.
    """

    x_axis: jnp.ndarray
    phi0: jnp.ndarray
    coefficients: jnp.ndarray = None
    x_scale: float = None

    def evaluate(self, x):
        if self.coefficients is None:
            raise ValueError("profile has no polynomial fit")
        return poly_eval(self.coefficients, jnp.asarray(x) / self.x_scale)

    def derivative(self, x):
        if self.coefficients is None:
            raise ValueError("profile has no polynomial fit")
        slope = poly_derivative(self.coefficients)
        return poly_eval(slope, jnp.asarray(x) / self.x_scale) / self.x_scale

    def is_detrended(self, tolerance=DETREND_TOLERANCE):
        if self.coefficients is None:
            return False
        c0, c1 = float(self.coefficients[0]), float(self.coefficients[1])
        return abs(c0) < tolerance and abs(c1) < tolerance


@dataclass(frozen=True)
class TaylorCoefficients:
    phi0: jnp.ndarray
    phi1: jnp.ndarray
    phi2: jnp.ndarray

    def reconstruct(self, grid):
        dy = (grid.y_axis - grid.y0)[None, :]
        return self.phi0[:, None] + self.phi1[:, None] * dy + self.phi2[:, None] * dy**2


def eta_from_geometry(geometry, r_m, warp):
    """varpi(t) = (r_c - r_m) / (sin(phi) cos(theta)), eta(t) = varpi(warp(t))."""
    r_m = jnp.asarray(r_m)
    if r_m.shape != geometry.r_c.shape:
        raise ValueError("target range history and geometry have different lengths")
    varpi = (geometry.r_c - r_m) / (jnp.sin(geometry.phi) * jnp.cos(geometry.theta))
    spline = CubicSpline(np.asarray(geometry.t_axis), np.asarray(varpi))
    eta = jnp.asarray(spline(np.asarray(warp)))
    return PhaseErrorModel(t_axis=geometry.t_axis, varpi=varpi, eta=eta)


def decompose_eta(model, order=6, tolerance=1e-6):
    """Split eta into a0 + a1 t + xi(t), xi a polynomial of orders 2..order.

    a0 is eta at t = 0. a1 and xi come from one least-squares fit of
    eta - a0 in the normalized variable t / max|t|, so a1 is the slope of
    the fitted polynomial at the aperture centre.
    """
    if order < 2:
        raise ValueError(f"xi order must be at least 2, got {order}")
    t = model.t_axis
    c = t.shape[0] // 2
    if float(t[c]) != 0.0:
        raise ValueError("eta must be sampled on a grid with t = 0 at the centre sample")
    t_max = float(jnp.max(jnp.abs(t)))
    s = t / t_max

    a0 = float(model.eta[c])
    powers = jnp.arange(1, order + 1)
    basis = s[:, None] ** powers[None, :]
    fit, _, _, _ = jnp.linalg.lstsq(basis, model.eta - a0)
    coefficients = fit / t_max**powers

    a1 = float(coefficients[0])
    xi = jnp.concatenate([jnp.zeros(2), coefficients[1:]])
    residual = model.eta - a0 - a1 * t - poly_eval(xi, t)
    fit_rms = float(jnp.sqrt(jnp.mean(residual**2)))

    flags = tuple(model.flags)
    scale = float(jnp.max(jnp.abs(model.eta)))
    if scale > 0 and fit_rms > tolerance * scale:
        warnings.warn(f"xi fit residual {fit_rms:.3g} m exceeds tolerance, model order {order} insufficient")
        flags = flags + ("xi_order_insufficient",)
    return replace(model, a0=a0, a1=a1, xi=xi, xi_residual=residual, fit_rms=fit_rms, flags=flags)


def exact_surface(model, grid):
    """Phi_e(X, Y) = Y xi(X / Y)."""
    model._require_xi()
    x = grid.x_axis[:, None]
    y = grid.y_axis[None, :]
    return PhaseErrorSurface(values=y * poly_eval(model.xi, x / y), grid=grid)


def _ape_coefficients(model, grid):
    # phi0(X) = Y0 sum xi_k (X / Y0)^k, rewritten in u = X / x_scale
    x_scale = grid.x_max
    k = jnp.arange(model.xi.shape[0])
    return model.xi * grid.y0 ** (1.0 - k) * x_scale**k, x_scale


def ape_profile(model, grid):
    """phi0(X) = Y0 xi(X / Y0) on the grid's X axis."""
    model._require_xi()
    x = grid.x_axis
    coefficients, x_scale = _ape_coefficients(model, grid)
    phi0 = grid.y0 * poly_eval(model.xi, x / grid.y0)
    return ApeProfile(x_axis=x, phi0=phi0, coefficients=coefficients, x_scale=x_scale)


def taylor_coefficients(model, grid):
    """Expansion of Phi_e about Y0: phi0 + phi1 (Y - Y0) + phi2 (Y - Y0)^2."""
    model._require_xi()
    x = grid.x_axis
    u = x / grid.y0
    xi1 = poly_derivative(model.xi, 1)
    xi2 = poly_derivative(model.xi, 2)
    phi0 = grid.y0 * poly_eval(model.xi, u)
    phi1 = poly_eval(model.xi, u) - u * poly_eval(xi1, u)
    phi2 = x**2 * poly_eval(xi2, u) / (2 * grid.y0**3)
    return TaylorCoefficients(phi0=phi0, phi1=phi1, phi2=phi2)


def fit_ape(x_axis, phi0, order=8, remove_trend=True):
    """Polynomial fit of phi0 over X, constant and linear terms dropped unless remove_trend is off."""
    x_axis = jnp.asarray(x_axis)
    phi0 = jnp.asarray(phi0)
    if not bool(jnp.all(jnp.isfinite(phi0))):
        raise ValueError("azimuth phase error contains non-finite samples")
    if order < 2:
        raise ValueError(f"APE polynomial order must be at least 2, got {order}")
    x_scale = float(jnp.max(jnp.abs(x_axis)))
    u = x_axis / x_scale
    basis = u[:, None] ** jnp.arange(order + 1)[None, :]
    coefficients, _, _, _ = jnp.linalg.lstsq(basis, phi0)
    if remove_trend:
        coefficients = coefficients.at[:2].set(0.0)
    return ApeProfile(
        x_axis=x_axis,
        phi0=poly_eval(coefficients, u),
        coefficients=coefficients,
        x_scale=x_scale,
    )


def _noise_level(values):
    # third differences of white noise have variance 20 sigma^2
    third = np.diff(values, 3)
    return float(np.sqrt(np.mean(third**2) / 20))


def rcm_from_ape(ape, y0, noise_tolerance=1e-3):
    """phi1(X) = (phi0(X) - X phi0'(X)) / Y0."""
    x = ape.x_axis
    if ape.coefficients is not None:
        return (ape.evaluate(x) - x * ape.derivative(x)) / y0

    x_np = np.asarray(x)
    phi0 = np.asarray(ape.phi0)
    sigma = _noise_level(phi0)
    smoothing = 0.0
    if sigma > noise_tolerance * max(float(np.max(np.abs(phi0))), 1.0):
        warnings.warn(f"sampled APE is noisy (sigma ~ {sigma:.3g} rad), smoothing before differentiation")
        smoothing = len(phi0) * sigma**2
    spline = UnivariateSpline(x_np, phi0, k=4, s=smoothing)
    return jnp.asarray((spline(x_np) - x_np * spline.derivative()(x_np)) / y0)


def surface_from_ape(ape, grid, check_detrended=True):
    """Phi_e(X, Y) = (Y / Y0) phi0(Y0 X / Y), phi0 evaluated through its polynomial fit."""
    if ape.coefficients is None:
        # keep the fitted trend so the detrend check sees it
        ape = fit_ape(ape.x_axis, ape.phi0, remove_trend=False)
    if check_detrended and not ape.is_detrended():
        raise ValueError(
            "APE must be detrended (constant and linear coefficients below "
            f"{DETREND_TOLERANCE} rad), got c0={float(ape.coefficients[0]):.3g}, "
            f"c1={float(ape.coefficients[1]):.3g}"
        )
    x = grid.x_axis[:, None]
    y = grid.y_axis[None, :]
    argument = grid.y0 * x / y
    values = (y / grid.y0) * ape.evaluate(argument)

    # only the keystone-supported region |X| <= X_max Y / Y0 carries data
    supported = jnp.abs(x) <= grid.x_max * y / grid.y0 * (1 + 1e-12)
    reach = float(jnp.max(jnp.where(supported, jnp.abs(argument), 0.0)))
    flags = ()
    if reach > EXTRAPOLATION_MARGIN * ape.x_scale:
        warnings.warn(f"phi0 evaluated at |X| = {reach:.3g}, beyond the fitted domain {ape.x_scale:.3g}")
        flags = ("extrapolated",)
    return PhaseErrorSurface(values=values, grid=grid, flags=flags)


def model_for_target(params, geometry, target, warp=None, order=6):
    """Ground-truth decomposition of one target's residual range error."""
    trajectory = target.trajectory if isinstance(target, PointTarget) else target
    if len(geometry.platform) != params.num_pulses:
        raise ValueError("geometry does not match the radar pulse count")
    if warp is None:
        warp, _ = build_azimuth_warp(geometry)
    r_m = target_range(trajectory, geometry.platform)
    return decompose_eta(eta_from_geometry(geometry, r_m, warp), order=order)
