import jax
import jax.numpy as jnp
import numpy as np
from jax.scipy.special import entr
from scipy.ndimage import median_filter
from scipy.signal import resample


def _data(image):
    return image.data if hasattr(image, "data") else jnp.asarray(image)


def to_azimuth_data(data):
    """Image -> (X, range pixel) domain, same convention as the 2-D image transform."""
    shifted = jnp.fft.ifftshift(data, axes=0)
    return jnp.fft.fftshift(jnp.fft.ifft(shifted, axis=0, norm="ortho"), axes=0)


def to_azimuth_image(data):
    shifted = jnp.fft.ifftshift(data, axes=0)
    return jnp.fft.fftshift(jnp.fft.fft(shifted, axis=0, norm="ortho"), axes=0)


@jax.jit
def image_entropy(data):
    intensity = jnp.abs(data) ** 2
    return jnp.sum(entr(intensity / jnp.sum(intensity)))


def entropy(image):
    """Shannon entropy of the normalized intensity |pixel|^2 / energy."""
    data = _data(image)
    if not float(jnp.sum(jnp.abs(data) ** 2)) > 0:
        raise ValueError("entropy of an all-zero image is undefined")
    return float(image_entropy(data))


def contrast(image):
    intensity = jnp.abs(_data(image)) ** 2
    mean = float(jnp.mean(intensity))
    if not mean > 0:
        raise ValueError("contrast of an all-zero image is undefined")
    return float(jnp.std(intensity)) / mean


def range_compressed(image):
    """|azimuth-time x range-pixel| view of an image."""
    return jnp.abs(to_azimuth_data(_data(image)))


def _crossing(curve, start, level, step):
    i = start
    while 0 <= i + step < len(curve) and curve[i + step] >= level:
        i += step
    j = i + step
    if not 0 <= j < len(curve):
        raise ValueError("azimuth cut never drops 3 dB below its peak")
    return i + step * (curve[i] - level) / (curve[i] - curve[j])


def azimuth_width(image, peak=None, upsample=8):
    """-3 dB width in pixels of the azimuth cut through the peak.

    Args:
        image: ComplexImage or 2-D array [azimuth, range]
        peak: optional (azimuth, range) pixel, defaults to the brightest pixel
        upsample: Fourier upsampling factor of the cut
    """
    data = np.asarray(_data(image))
    if peak is None:
        peak = np.unravel_index(np.argmax(np.abs(data)), data.shape)
    az, rg = int(peak[0]), int(peak[1])
    num = data.shape[0]
    cut = np.roll(data[:, rg], num // 2 - az)
    fine = np.abs(resample(cut, num * upsample))

    centre = (num // 2) * upsample
    lo, hi = max(centre - upsample, 0), min(centre + upsample + 1, len(fine))
    top = lo + int(np.argmax(fine[lo:hi]))
    level = fine[top] / np.sqrt(2)
    left = _crossing(fine, top, level, -1)
    right = _crossing(fine, top, level, +1)
    return float(right - left) / upsample


def residual_rcm(image, threshold_db=-10.0, kernel=5):
    """Span (range cells) of the per-pulse peak range in the range-compressed view."""
    view = np.asarray(range_compressed(image))
    peaks = view.max(axis=1)
    if not peaks.max() > 0:
        raise ValueError("no trackable peak in an all-zero image")
    rows = np.flatnonzero(peaks >= peaks.max() * 10 ** (threshold_db / 20))

    num = view.shape[1]
    track = []
    for row in rows:
        k = int(np.argmax(view[row]))
        y0, y1, y2 = view[row, (k - 1) % num], view[row, k], view[row, (k + 1) % num]
        denom = y0 - 2 * y1 + y2
        track.append(k + (0.5 * (y0 - y2) / denom if denom != 0 else 0.0))
    track = median_filter(np.asarray(track), size=kernel, mode="mirror")
    return float(track.max() - track.min())
