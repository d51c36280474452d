import json
from dataclasses import asdict, dataclass, field, replace

import jax.numpy as jnp

from sarmove.autofocus import (
    AutofocusConfig,
    EstimationError,
    default_reduction_factor,
    detrend,
    get_estimator,
    reduce_range_resolution,
)
from sarmove.echo_sim import simulate_range_history
from sarmove.error_model import fit_ape, model_for_target, surface_from_ape
from sarmove.metrics import azimuth_width, contrast, entropy, residual_rcm
from sarmove.pfa import Spectrum, build_azimuth_warp, image_from_spectrum, polar_format, spectrum_from_image

MIN_ROI_EXTENT = 32


@dataclass(frozen=True)
class RefocusConfig:
    ape_order: int = 8
    rcm_bound_cells: float = 3.0
    reduction_factor: int = None  # None picks the smallest power of two covering rcm_bound_cells
    refine: bool = True
    refine_threshold: float = 0.01
    autofocus: AutofocusConfig = field(default_factory=AutofocusConfig)


@dataclass(frozen=True)
class RegionOfInterest:
    azimuth_offset: int
    range_offset: int
    azimuth_extent: int
    range_extent: int

    @classmethod
    def from_string(cls, text):
        """Parse "az,rg,naz,nrg"."""
        try:
            values = [int(v) for v in text.split(",")]
        except ValueError:
            raise ValueError(f"roi must be four integers az,rg,naz,nrg, got '{text}'") from None
        if len(values) != 4:
            raise ValueError(f"roi must be four integers az,rg,naz,nrg, got '{text}'")
        return cls(*values)

    @classmethod
    def full(cls, shape):
        return cls(0, 0, shape[0], shape[1])

    def validate(self, shape):
        if self.azimuth_extent < MIN_ROI_EXTENT or self.range_extent < MIN_ROI_EXTENT:
            raise ValueError(f"roi extents must be at least {MIN_ROI_EXTENT} pixels, got {self}")
        if self.azimuth_offset < 0 or self.range_offset < 0:
            raise ValueError(f"roi offsets must be non-negative, got {self}")
        if self.azimuth_offset + self.azimuth_extent > shape[0] or self.range_offset + self.range_extent > shape[1]:
            raise ValueError(f"roi {self} is outside the {shape[0]}x{shape[1]} image")

    @property
    def slices(self):
        return (
            slice(self.azimuth_offset, self.azimuth_offset + self.azimuth_extent),
            slice(self.range_offset, self.range_offset + self.range_extent),
        )


@dataclass(frozen=True)
class RefocusReport:
    entropy_before: float
    entropy_after: float
    contrast_before: float
    contrast_after: float
    width_before: float
    width_after: float
    rcm_before: float
    rcm_after: float
    iterations: int
    estimator: str
    reduction_factor: int
    estimator_iterations: int = 0
    flags: tuple = ()

    def to_dict(self):
        report = asdict(self)
        report["flags"] = list(self.flags)
        return report

    def to_text(self):
        lines = []
        for key, value in self.to_dict().items():
            if key == "flags":
                value = ",".join(value) if value else "none"
            elif isinstance(value, float):
                value = f"{value:.6g}"
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def extract_subimage(image, roi):
    roi.validate(image.shape)
    rows, cols = roi.slices
    return replace(
        image,
        data=image.data[rows, cols],
        grid=image.grid.subgrid(roi.azimuth_extent, roi.range_extent),
        provenance=image.provenance + (f"extract_subimage {roi.azimuth_offset},{roi.range_offset},"
                                       f"{roi.azimuth_extent},{roi.range_extent}",),
        origin=(image.origin[0] + roi.azimuth_offset, image.origin[1] + roi.range_offset),
        parent_shape=image.parent_shape,
    )


def embed_subimage(image, sub):
    """Write `sub` back at its recorded offsets inside `image`."""
    az = sub.origin[0] - image.origin[0]
    rg = sub.origin[1] - image.origin[1]
    if az < 0 or rg < 0 or az + sub.shape[0] > image.shape[0] or rg + sub.shape[1] > image.shape[1]:
        raise ValueError("subimage does not fit inside the image at its recorded origin")
    data = image.data.at[az : az + sub.shape[0], rg : rg + sub.shape[1]].set(sub.data)
    return replace(image, data=data)


def to_data_domain(sub):
    """Inverse of the image transform: the subimage's samples on its (X, Y) grid."""
    return spectrum_from_image(sub)


def apply_correction(spectrum, surface):
    """Sample-wise multiply by exp(-j Phi_e)."""
    if spectrum.data.shape != surface.values.shape or not spectrum.grid.matches(surface.grid):
        raise ValueError("phase error surface grid does not match the spectrum grid")
    return Spectrum(spectrum.data * jnp.exp(-1j * surface.values), spectrum.grid)


def correct_subimage(sub, ape, check_detrended=True):
    """Apply the 2-D correction built from an APE profile at full range resolution."""
    surface = surface_from_ape(ape, sub.grid, check_detrended=check_detrended)
    corrected = apply_correction(to_data_domain(sub), surface)
    image = image_from_spectrum(corrected, sub.provenance + ("correct_2d",))
    return replace(image, origin=sub.origin, parent_shape=sub.parent_shape), surface


def _measure(image, suffix, flags):
    try:
        rcm = residual_rcm(image)
    except ValueError:
        flags.append(f"rcm_untracked_{suffix}")
        rcm = 0.0
    return {
        f"entropy_{suffix}": entropy(image),
        f"contrast_{suffix}": contrast(image),
        f"width_{suffix}": azimuth_width(image),
        f"rcm_{suffix}": rcm,
    }


def _estimate_and_correct(sub, estimator, factor, config, logger):
    reduced = reduce_range_resolution(sub, factor)
    estimate = detrend(estimator.estimate(reduced, logger))
    ape = fit_ape(estimate.x_axis, estimate.phi0_hat, config.ape_order)
    corrected, surface = correct_subimage(sub, ape)
    return corrected, estimate, surface


def refocus_pipeline(image, roi, config=None, logger=None):
    """Extract, estimate the APE on a range-reduced copy, correct in 2-D, report.

    Returns:
        (corrected subimage, RefocusReport); on estimation failure the
        original subimage is returned with the `estimation_failed` flag
    """
    config = config or RefocusConfig()
    sub = extract_subimage(image, roi)
    flags = []
    before = _measure(sub, "before", flags)
    factor = config.reduction_factor or default_reduction_factor(config.rcm_bound_cells, sub.shape[1])
    estimator = get_estimator(config.autofocus)
    if logger is not None:
        logger.log_stage("extract", shape=sub.shape, factor=factor, entropy=before["entropy_before"])

    result, passes, estimator_iterations = sub, 0, 0
    try:
        corrected, estimate, surface = _estimate_and_correct(sub, estimator, factor, config, logger)
        result, passes, estimator_iterations = corrected, 1, estimate.iterations
        flags.extend(estimate.flags + surface.flags)

        first = entropy(corrected)
        gain = (before["entropy_before"] - first) / max(before["entropy_before"], 1e-12)
        if config.refine and gain > config.refine_threshold:
            refined, estimate, surface = _estimate_and_correct(corrected, estimator, factor, config, logger)
            if entropy(refined) <= first:
                result, passes = refined, 2
                estimator_iterations += estimate.iterations
                flags.extend(f for f in estimate.flags + surface.flags if f not in flags)
            else:
                flags.append("refinement_rejected")
    except EstimationError as e:
        flags.append("estimation_failed")
        if logger is not None:
            logger.log_stage("estimation_failed", reason=str(e))

    after = _measure(result, "after", flags)
    report = RefocusReport(
        **before,
        **after,
        iterations=passes,
        estimator=config.autofocus.estimator,
        reduction_factor=factor,
        estimator_iterations=estimator_iterations,
        flags=tuple(flags),
    )
    if logger is not None:
        logger.log_stage(
            "refocus", entropy=report.entropy_after, rcm=report.rcm_after, width=report.width_after, passes=passes
        )
    return result, report


def known_motion_reference(params, geometry, target, roi=None, logger=None):
    """Image of the target with its true motion compensated, the focus yardstick.

    The ideal range history keeps the target's constant and linear terms
    (position) and drops xi, so the reference shows the target focused where
    the corrected image should put it.
    """
    warp, tan_rate = build_azimuth_warp(geometry)
    model = model_for_target(params, geometry, target, warp)
    ideal = model.a0 + model.a1 * geometry.tan_theta / tan_rate
    r_ideal = geometry.r_c - jnp.sin(geometry.phi) * jnp.cos(geometry.theta) * ideal
    ph = simulate_range_history(params, r_ideal, target.reflectivity)
    image = polar_format(params, geometry, logger)(ph)
    image = replace(image, provenance=image.provenance + ("known_motion_reference",))
    if roi is not None:
        image = extract_subimage(image, roi)
    return image
