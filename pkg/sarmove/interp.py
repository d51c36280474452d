import jax
import jax.numpy as jnp

NUM_TAPS = 16
KAISER_BETA = 8.0
EDGE_TOLERANCE = 1e-9

_OFFSETS = jnp.arange(-(NUM_TAPS // 2 - 1), NUM_TAPS // 2 + 1)  # -7 .. 8


def kaiser_sinc(x, half_width=NUM_TAPS / 2, beta=KAISER_BETA):
    """Kaiser-windowed sinc evaluated at offsets x (in samples)."""
    ratio = jnp.clip(x / half_width, -1.0, 1.0)
    window = jnp.i0(beta * jnp.sqrt(1.0 - ratio**2)) / jnp.i0(beta)
    return jnp.sinc(x) * window


def _resample_1d(values, positions):
    # values (n,), positions (k,) in fractional sample index
    n = values.shape[0]
    base = jnp.floor(positions)
    frac = positions - base
    taps = base.astype(jnp.int32)[:, None] + _OFFSETS[None, :]
    weights = kaiser_sinc(_OFFSETS[None, :] - frac[:, None])
    in_range = (taps >= 0) & (taps < n)
    gathered = jnp.where(in_range, values[jnp.clip(taps, 0, n - 1)], 0)
    out = jnp.sum(gathered * weights, axis=1)
    valid = (positions >= -EDGE_TOLERANCE) & (positions <= n - 1 + EDGE_TOLERANCE)
    return jnp.where(valid, out, 0), valid


@jax.jit
def resample(values, positions):
    """Band-limited evaluation of a uniformly sampled 1-D signal.

    Args:
        values: samples on the integer grid 0..n-1
        positions: fractional sample indices to evaluate at

    Returns:
        (resampled values, validity mask); positions outside [0, n-1] are zero-filled
    """
    return _resample_1d(values, positions)


@jax.jit
def resample_rows(data, positions):
    """Resample every row of `data` at its own positions (same shape as data)."""
    return jax.vmap(_resample_1d)(data, positions)


@jax.jit
def resample_columns(data, positions):
    """Resample every column of `data`; positions has the shape of data."""
    out, valid = jax.vmap(_resample_1d, in_axes=(1, 1), out_axes=(1, 1))(data, positions)
    return out, valid


def zero_fill_fraction(valid):
    return float(1.0 - jnp.mean(valid))
