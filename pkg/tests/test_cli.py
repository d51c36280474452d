import json
from pathlib import Path

import imageio.v3 as iio
import numpy as np
import pytest

from configs import load_config
from conftest import impulse_image
from main import main
from sarmove.error_model import exact_surface, model_for_target
from sarmove.io import read_grid, write_grid
from sarmove.pfa import build_azimuth_warp, build_grid
from scenarios import build_scenario

SCENES = Path(__file__).resolve().parent.parent / "scenes"
CONSTANT_VELOCITY = str(SCENES / "constant_velocity.json")
STATIONARY = str(SCENES / "stationary.json")


@pytest.fixture(scope="module")
def formed(tmp_path_factory):
    """Raw phase history and PFA image of the constant-velocity scene."""
    work = tmp_path_factory.mktemp("cli")
    raw, image = work / "raw.grid", work / "image.grid"
    assert main(["simulate", "--config", CONSTANT_VELOCITY, "--out", str(raw), "--quiet"]) == 0
    assert main(["pfa", str(raw), "--config", CONSTANT_VELOCITY, "--out", str(image), "--quiet"]) == 0
    return raw, image


def test_simulate_pfa_refocus(formed, tmp_path):
    _, image = formed
    out, report = tmp_path / "refocused.grid", tmp_path / "report.json"
    log = tmp_path / "log.json"
    code = main(
        [
            "refocus", str(image), "--config", CONSTANT_VELOCITY, "--out", str(out),
            "--report", str(report), "--log", str(log), "--quiet",
        ]
    )  # fmt: skip
    assert code == 0
    data = json.loads(report.read_text())
    assert data["entropy_after"] < data["entropy_before"]
    assert data["estimator"] == "pga"
    corrected = read_grid(out)
    assert corrected.shape == (128, 64)
    assert corrected.origin == (64, 32)
    assert "refocus" in json.loads(log.read_text())


def test_refocus_text_report_on_stdout(formed, tmp_path, capsys):
    _, image = formed
    code = main(["refocus", str(image), "--roi", "64,32,128,64", "--out", str(tmp_path / "r.grid"), "--quiet"])
    assert code == 0
    assert "entropy_before=" in capsys.readouterr().out


def test_refocus_rejects_out_of_bounds_roi(formed, tmp_path):
    _, image = formed
    out = tmp_path / "refocused.grid"
    assert main(["refocus", str(image), "--roi", "200,0,128,64", "--out", str(out), "--quiet"]) == 1
    assert not out.exists()


def test_usage_errors():
    assert main(["refocus", "--bogus"]) == 2
    assert main(["teleport"]) == 2


def test_missing_input(tmp_path):
    assert main(["metrics", str(tmp_path / "nothing.grid"), "--quiet"]) == 2
    assert main(["simulate", "--config", str(tmp_path / "nothing.json"), "--out", str(tmp_path / "x.grid")]) == 2


def test_pfa_requires_a_phase_history(formed, tmp_path):
    _, image = formed
    assert main(["pfa", str(image), "--config", CONSTANT_VELOCITY, "--out", str(tmp_path / "x.grid"), "--quiet"]) == 1


def test_emit_stages(formed, tmp_path):
    raw, _ = formed
    stages = tmp_path / "stages"
    code = main(
        ["pfa", str(raw), "--config", CONSTANT_VELOCITY, "--out", str(tmp_path / "image.grid"),
         "--emit-stages", str(stages), "--quiet"]
    )  # fmt: skip
    assert code == 0
    assert sorted(p.name for p in stages.iterdir()) == [
        "00_motion_compensate.grid",
        "01_range_resample.grid",
        "02_rcm_linearize.grid",
        "03_keystone.grid",
        "04_form_image.grid",
    ]
    assert read_grid(stages / "03_keystone.grid").stage == "keystoned"


def test_inspect(formed, capsys):
    raw, image = formed
    assert main(["inspect", str(image)]) == 0
    out = capsys.readouterr().out
    assert "rows: 256\n" in out
    assert "cols: 128\n" in out
    assert "kind: image\n" in out
    assert main(["inspect", str(raw)]) == 0
    assert "stage: raw\n" in capsys.readouterr().out


def test_metrics_json(formed, capsys):
    _, image = formed
    assert main(["metrics", str(image), "--json", "--quiet"]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["residual_rcm"] >= 2.0
    assert metrics["range_spacing"] == pytest.approx(0.2915, rel=1e-2)
    assert metrics["flags"] == []


def test_export(formed, tmp_path):
    _, image = formed
    png = tmp_path / "image.png"
    assert main(["export", str(image), "--out", str(png), "--quiet"]) == 0
    pixels = iio.imread(png)
    assert pixels.shape == (128, 256)
    assert pixels.max() == 255


def test_export_range_compressed(tmp_path):
    grid_path, png = tmp_path / "impulse.grid", tmp_path / "impulse.png"
    write_grid(impulse_image([(64, 32)]), grid_path)
    assert main(["export", str(grid_path), "--out", str(png), "--range-compressed", "--quiet"]) == 0
    pixels = iio.imread(png)
    # one range cell, constant across every azimuth bin
    assert pixels.shape == (64, 128)
    assert np.all(pixels[32] == 255)
    assert np.all(np.delete(pixels, 32, axis=0) == 0)


def test_truncated_grid(formed, tmp_path):
    _, image = formed
    broken = tmp_path / "broken.grid"
    broken.write_bytes(image.read_bytes()[:-100])
    assert main(["metrics", str(broken), "--quiet"]) == 4


def test_oracle_matches_library(tmp_path):
    out_dir = tmp_path / "oracle"
    assert main(["oracle", "--config", CONSTANT_VELOCITY, "--out-dir", str(out_dir), "--quiet"]) == 0
    surface = read_grid(out_dir / "surface.grid")
    profile = read_grid(out_dir / "profile.grid")

    params, geometry, targets = build_scenario(load_config(CONSTANT_VELOCITY))
    warp, tan_rate = build_azimuth_warp(geometry)
    grid = build_grid(params, geometry, tan_rate)
    expected = exact_surface(model_for_target(params, geometry, targets[0], warp, order=6), grid)
    np.testing.assert_array_equal(surface.values, np.asarray(expected.values).astype(np.float32))
    assert surface.grid.shape == grid.shape
    assert profile.phi0.shape == (grid.num_x,)


def test_oracle_of_the_scene_centre_is_flat(tmp_path):
    out_dir = tmp_path / "oracle"
    assert main(["oracle", "--config", STATIONARY, "--target", "0", "--out-dir", str(out_dir), "--quiet"]) == 0
    profile = read_grid(out_dir / "profile.grid")
    assert float(np.max(np.abs(profile.phi0))) < 1e-6
    assert main(["oracle", "--config", STATIONARY, "--target", "9", "--out-dir", str(out_dir), "--quiet"]) == 1
