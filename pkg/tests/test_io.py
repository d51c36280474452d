import imageio.v3 as iio
import jax.numpy as jnp
import numpy as np
import pytest

from conftest import make_grid
from sarmove.echo_sim import PhaseHistory
from sarmove.error_model import ApeProfile, PhaseErrorSurface
from sarmove.io import (
    CorruptHeaderError,
    TruncatedPayloadError,
    UnsupportedVersionError,
    export_magnitude,
    read_grid,
    read_header,
    write_grid,
)
from sarmove.pfa import ComplexImage


def random_complex(shape, seed=0):
    rng = np.random.default_rng(seed)
    values = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)).astype(np.complex64)
    return jnp.asarray(values.astype(np.complex128))


def sample_image():
    grid = make_grid(num_x=48, num_y=40)
    return ComplexImage(
        data=random_complex(grid.shape),
        grid=grid,
        provenance=("raw", "keystoned", "form_image"),
        origin=(16, 8),
        parent_shape=(128, 64),
    )


def test_image_round_trip_is_exact(tmp_path):
    image = sample_image()
    path = write_grid(image, tmp_path / "image.grid")
    loaded = read_grid(path)
    assert isinstance(loaded, ComplexImage)
    np.testing.assert_array_equal(loaded.data, image.data)
    assert loaded.grid == image.grid
    assert loaded.provenance == image.provenance
    assert loaded.origin == (16, 8)
    assert loaded.parent_shape == (128, 64)


def test_phase_history_round_trip_keeps_stage(tmp_path):
    ph = PhaseHistory(
        data=random_complex((32, 16), seed=1),
        pulse_interval=5.0 / 32,
        freq_step=1.5e8 / 16,
        carrier_frequency=1.5e9,
        stage="raw",
    )
    ph = ph.advance(ph.data, "motion_compensated")
    loaded = read_grid(write_grid(ph, tmp_path / "ph.grid"))
    assert loaded.stage == "motion_compensated"
    assert loaded.chain == ["raw", "motion_compensated"]
    assert loaded.pulse_interval == ph.pulse_interval
    assert loaded.freq_step == ph.freq_step
    np.testing.assert_array_equal(loaded.data, ph.data)


def test_surface_and_profile_round_trip(tmp_path):
    grid = make_grid(num_x=32, num_y=32)
    values = jnp.real(random_complex(grid.shape, seed=2))
    surface = read_grid(write_grid(PhaseErrorSurface(values, grid), tmp_path / "surface.grid"))
    np.testing.assert_array_equal(surface.values, values)
    assert surface.grid == grid

    phi0 = jnp.real(random_complex((32,), seed=3))
    profile = read_grid(write_grid(ApeProfile(grid.x_axis, phi0), tmp_path / "profile.grid"))
    np.testing.assert_array_equal(profile.phi0, phi0)
    np.testing.assert_allclose(profile.x_axis, grid.x_axis, rtol=1e-12, atol=1e-12)


def test_header_inspection_matches_writer(tmp_path):
    path = write_grid(sample_image(), tmp_path / "image.grid")
    header = read_header(path)
    assert (header["rows"], header["cols"]) == (48, 40)
    assert header["kind"] == "image"
    assert header["version"] == 1
    assert header["y0"] == 53.88


def test_truncated_payload(tmp_path):
    path = write_grid(sample_image(), tmp_path / "image.grid")
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(TruncatedPayloadError) as info:
        read_grid(path)
    assert info.value.code == 4


def test_corrupt_header(tmp_path):
    path = write_grid(sample_image(), tmp_path / "image.grid")
    raw = path.read_bytes()
    path.write_bytes(b"NOT A GRID" + raw[len(b"SARMOVE GRID") :])
    with pytest.raises(CorruptHeaderError) as info:
        read_grid(path)
    assert info.value.code == 3

    path.write_bytes(raw.replace(b"rows: 48", b"rows: forty"))
    with pytest.raises(CorruptHeaderError):
        read_grid(path)


def test_unknown_version(tmp_path):
    path = write_grid(sample_image(), tmp_path / "image.grid")
    path.write_bytes(path.read_bytes().replace(b"version: 1\n", b"version: 2\n", 1))
    with pytest.raises(UnsupportedVersionError) as info:
        read_header(path)
    assert info.value.code == 5


def test_write_leaves_no_temporary_files(tmp_path):
    write_grid(sample_image(), tmp_path / "image.grid")
    write_grid(sample_image(), tmp_path / "image.grid")
    assert [p.name for p in tmp_path.iterdir()] == ["image.grid"]


def test_export_constant_and_impulse(tmp_path):
    flat = jnp.full((16, 8), 3.0 + 4.0j)
    export_magnitude(flat, tmp_path / "flat.png")
    np.testing.assert_array_equal(iio.imread(tmp_path / "flat.png"), np.full((8, 16), 255, dtype=np.uint8))

    impulse = jnp.zeros((16, 8), dtype=complex).at[5, 2].set(1.0)
    export_magnitude(impulse, tmp_path / "impulse.png")
    pixels = iio.imread(tmp_path / "impulse.png")
    assert pixels.shape == (8, 16)
    assert pixels[2, 5] == 255
    assert int(pixels.sum()) == 255


def test_export_is_deterministic_and_rejects_zero(tmp_path):
    image = sample_image()
    export_magnitude(image, tmp_path / "a.png")
    export_magnitude(image, tmp_path / "b.png")
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()
    with pytest.raises(ValueError):
        export_magnitude(jnp.zeros((8, 8)), tmp_path / "zero.png")
    with pytest.raises(ValueError):
        export_magnitude(image, tmp_path / "c.png", dynamic_range_db=0.0)
