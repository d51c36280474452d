"""Grid files and magnitude export.

A grid file is a text header followed by the payload::

    SARMOVE GRID
    version: 1
    kind: image
    rows: 256
    cols: 128
    ...
    end
    <rows * cols interleaved little-endian float32 (re, im) pairs, row-major>

Axis origins are the axis value at sample n // 2. Floats are written with
repr so the header round-trips exactly.
"""

import os
import tempfile
from pathlib import Path

import imageio.v3 as iio
import jax.numpy as jnp
import numpy as np

from sarmove.echo_sim import PhaseHistory
from sarmove.error_model import ApeProfile, PhaseErrorSurface
from sarmove.pfa import ComplexImage, SpatialFrequencyGrid

MAGIC = "SARMOVE GRID"
VERSION = 1
PAYLOAD_DTYPE = np.dtype("<c8")
KINDS = ("phase_history", "image", "surface", "profile")


class GridFileError(ValueError):
    code = 1


class CorruptHeaderError(GridFileError):
    code = 3


class TruncatedPayloadError(GridFileError):
    code = 4


class UnsupportedVersionError(GridFileError):
    code = 5


def _grid_fields(grid):
    return {
        "axis0_origin": 0.0,
        "axis0_step": grid.x_step,
        "axis1_origin": grid.y0,
        "axis1_step": grid.y_step,
        "carrier_frequency": grid.carrier_frequency,
        "y0": grid.y0,
        "phi_ref": grid.phi_ref,
        "tan_rate": grid.tan_rate,
    }


def _describe(obj):
    """Header fields and complex payload of a supported object."""
    if isinstance(obj, PhaseHistory):
        header = {
            "kind": "phase_history",
            "stage": obj.stage,
            "axis0_origin": 0.0,
            "axis0_step": obj.pulse_interval,
            "axis1_origin": 0.0,
            "axis1_step": obj.freq_step,
            "carrier_frequency": obj.carrier_frequency,
            "provenance": obj.chain,
        }
        return header, obj.data
    if isinstance(obj, ComplexImage):
        header = {
            "kind": "image",
            "stage": "image",
            **_grid_fields(obj.grid),
            "origin": list(obj.origin),
            "parent_shape": list(obj.parent_shape),
            "provenance": list(obj.provenance),
        }
        return header, obj.data
    if isinstance(obj, PhaseErrorSurface):
        header = {"kind": "surface", "stage": "surface", **_grid_fields(obj.grid), "provenance": list(obj.flags)}
        return header, obj.values
    if isinstance(obj, ApeProfile):
        x = np.asarray(obj.x_axis)
        step = (x[-1] - x[0]) / (len(x) - 1)
        header = {
            "kind": "profile",
            "stage": "profile",
            "axis0_origin": 0.0,
            "axis0_step": 1.0,
            "axis1_origin": float(x[len(x) // 2]),
            "axis1_step": float(step),
            "provenance": [],
        }
        return header, jnp.asarray(obj.phi0)[None, :]
    raise ValueError(f"Unknown grid object: {type(obj).__name__}")


def _format(value):
    if isinstance(value, (list, tuple)):
        if all(isinstance(v, str) for v in value):
            return " | ".join(value)
        return ",".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def write_grid(obj, path):
    """Write atomically: temp file in the target directory, then rename."""
    header, data = _describe(obj)
    payload = np.ascontiguousarray(np.asarray(data), dtype=PAYLOAD_DTYPE)
    fields = {"version": VERSION, "kind": header.pop("kind"), "rows": payload.shape[0], "cols": payload.shape[1]}
    fields.update(header)

    lines = [MAGIC] + [f"{key}: {_format(value)}" for key, value in fields.items()] + ["end"]
    text = "\n".join(lines) + "\n"

    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(text.encode("ascii"))
            f.write(payload.tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path


def _split(raw):
    marker = b"\nend\n"
    if not raw.startswith(MAGIC.encode("ascii") + b"\n"):
        raise CorruptHeaderError("missing grid file magic line")
    cut = raw.find(marker)
    if cut < 0:
        raise CorruptHeaderError("header has no 'end' line")
    try:
        text = raw[: cut + 1].decode("ascii")
    except UnicodeDecodeError:
        raise CorruptHeaderError("header is not ASCII text") from None
    return text, raw[cut + len(marker) :]


def _parse_header(text):
    header = {}
    for line in text.splitlines()[1:]:
        if not line.strip():
            continue
        key, sep, value = line.partition(": ")
        if not sep:
            key, sep, value = line.partition(":")
        if not sep or not key:
            raise CorruptHeaderError(f"malformed header line: '{line}'")
        header[key.strip()] = value.strip()

    if "version" not in header:
        raise CorruptHeaderError("header has no version field")
    try:
        version = int(header["version"])
    except ValueError:
        raise CorruptHeaderError(f"bad version field: '{header['version']}'") from None
    if version != VERSION:
        raise UnsupportedVersionError(f"grid file version {version} is not supported (expected {VERSION})")

    try:
        header["version"] = version
        header["rows"] = int(header["rows"])
        header["cols"] = int(header["cols"])
        for key in ("axis0_origin", "axis0_step", "axis1_origin", "axis1_step"):
            header[key] = float(header[key])
        for key in ("carrier_frequency", "y0", "phi_ref", "tan_rate"):
            if key in header:
                header[key] = float(header[key])
        for key in ("origin", "parent_shape"):
            if key in header:
                header[key] = tuple(int(v) for v in header[key].split(","))
    except (KeyError, ValueError) as e:
        raise CorruptHeaderError(f"bad or missing header field: {e}") from None
    if header.get("kind") not in KINDS:
        raise CorruptHeaderError(f"Unknown grid kind: {header.get('kind')}")
    if header["rows"] < 1 or header["cols"] < 1:
        raise CorruptHeaderError("grid dimensions must be positive")
    provenance = header.get("provenance", "")
    header["provenance"] = [p for p in provenance.split(" | ") if p] if provenance else []
    return header


def read_header(path):
    with open(path, "rb") as f:
        raw = f.read()
    text, _ = _split(raw)
    return _parse_header(text)


def _grid_from_header(header):
    return SpatialFrequencyGrid(
        num_x=header["rows"],
        num_y=header["cols"],
        x_step=header["axis0_step"],
        y_step=header["axis1_step"],
        y0=header["y0"],
        phi_ref=header["phi_ref"],
        carrier_frequency=header["carrier_frequency"],
        tan_rate=header["tan_rate"],
    )


def read_grid(path):
    """Load a PhaseHistory, ComplexImage, PhaseErrorSurface or ApeProfile."""
    with open(path, "rb") as f:
        raw = f.read()
    text, payload = _split(raw)
    header = _parse_header(text)

    expected = header["rows"] * header["cols"] * PAYLOAD_DTYPE.itemsize
    if len(payload) < expected:
        raise TruncatedPayloadError(f"payload holds {len(payload)} bytes, header declares {expected}")
    if len(payload) > expected:
        raise CorruptHeaderError(f"payload holds {len(payload)} bytes, more than the {expected} declared")
    data = np.frombuffer(payload, dtype=PAYLOAD_DTYPE).reshape(header["rows"], header["cols"])
    data = jnp.asarray(data.astype(np.complex128))

    kind = header["kind"]
    try:
        if kind == "phase_history":
            return PhaseHistory(
                data=data,
                pulse_interval=header["axis0_step"],
                freq_step=header["axis1_step"],
                carrier_frequency=header["carrier_frequency"],
                stage=header["stage"],
                metadata={"chain": header["provenance"] or [header["stage"]]},
            )
        if kind == "image":
            return ComplexImage(
                data=data,
                grid=_grid_from_header(header),
                provenance=tuple(header["provenance"]),
                origin=header.get("origin", (0, 0)),
                parent_shape=header.get("parent_shape"),
            )
        if kind == "surface":
            return PhaseErrorSurface(
                values=jnp.real(data), grid=_grid_from_header(header), flags=tuple(header["provenance"])
            )
        x_axis = header["axis1_origin"] + (jnp.arange(header["cols"]) - header["cols"] // 2) * header["axis1_step"]
        return ApeProfile(x_axis=x_axis, phi0=jnp.real(data[0]))
    except KeyError as e:
        raise CorruptHeaderError(f"missing header field for {kind}: {e}") from None


def export_magnitude(image, path, dynamic_range_db=40.0):
    """8-bit dB-scaled magnitude PNG, range down the rows, azimuth across the columns."""
    if not dynamic_range_db > 0:
        raise ValueError(f"dynamic range must be positive, got {dynamic_range_db}")
    data = np.asarray(image.data if hasattr(image, "data") else image)
    magnitude = np.abs(data)
    peak = magnitude.max()
    if not peak > 0:
        raise ValueError("cannot export an all-zero image")
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(magnitude / peak)
    db = np.clip(db, -dynamic_range_db, 0.0)
    pixels = np.round((db + dynamic_range_db) / dynamic_range_db * 255).astype(np.uint8)
    iio.imwrite(path, np.ascontiguousarray(pixels.T), extension=".png")
    return Path(path)
