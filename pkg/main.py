import argparse
import json
import sys
from pathlib import Path

from configs import load_config, to_refocus_config
from sarmove.autofocus import ESTIMATORS
from sarmove.echo_sim import PhaseHistory
from sarmove.error_model import ape_profile, exact_surface, model_for_target
from sarmove.io import GridFileError, export_magnitude, read_grid, read_header, write_grid
from sarmove.metrics import azimuth_width, contrast, entropy, range_compressed, residual_rcm
from sarmove.pfa import ComplexImage, build_azimuth_warp, build_grid, polar_format
from sarmove.refocus import RegionOfInterest, refocus_pipeline
from scenarios import build_scenario, simulate_scenario
from utils import Logger, save_results


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="Suppress progress lines")
    common.add_argument("--log", type=str, default=None, help="Write per-stage metrics to this JSON file")

    scenario = argparse.ArgumentParser(add_help=False)
    scenario.add_argument("--config", type=str, required=True, help="Path to the scenario JSON file")
    scenario.add_argument("--job_idx", type=int, default=0, help="Entry of a scenario list")

    parser = argparse.ArgumentParser(prog="sarmove", description="Moving-target refocusing for polar-format SAR")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common, scenario], help="Scenario -> raw phase history")
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--seed", type=int, default=None, help="Override the scenario seed")
    p.add_argument("--snr-db", type=float, default=None, help="Override the scenario SNR")

    p = sub.add_parser("pfa", parents=[common, scenario], help="Raw phase history -> image")
    p.add_argument("input", type=str)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--emit-stages", type=str, default=None, help="Directory for every intermediate stage")

    p = sub.add_parser("refocus", parents=[common], help="Image + roi -> corrected subimage and report")
    p.add_argument("input", type=str)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--roi", type=str, default=None, help="az,rg,naz,nrg (default: scenario roi or full image)")
    p.add_argument("--report", type=str, default=None, help="Report file, JSON when the name ends in .json")
    p.add_argument("--estimator", type=str, default=None, choices=sorted(ESTIMATORS))
    p.add_argument("--config", type=str, default=None, help="Scenario JSON with roi/refocus blocks")
    p.add_argument("--job_idx", type=int, default=0)

    p = sub.add_parser("metrics", parents=[common], help="Focus metrics of an image")
    p.add_argument("input", type=str)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("export", parents=[common], help="Image -> 8-bit dB magnitude PNG")
    p.add_argument("input", type=str)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--dynamic-range", type=float, default=40.0)
    p.add_argument("--range-compressed", action="store_true", help="Export |azimuth-data| instead of the image")

    p = sub.add_parser("oracle", parents=[common, scenario], help="Ground-truth phi0 and Phi_e grids")
    p.add_argument("--target", type=int, default=0, help="Index into the scenario target list")
    p.add_argument("--out-dir", type=str, required=True)
    p.add_argument("--order", type=int, default=6, help="Polynomial order of xi")

    p = sub.add_parser("inspect", help="Print a grid file header")
    p.add_argument("input", type=str)
    return parser


def _require_file(path):
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return path


def _read_image(path):
    image = read_grid(_require_file(path))
    if not isinstance(image, ComplexImage):
        raise ValueError(f"{path} holds a {type(image).__name__}, expected an image")
    return image


def run_simulate(args, logger):
    config = load_config(_require_file(args.config), args.job_idx)
    if args.seed is not None:
        config.seed = args.seed
    if args.snr_db is not None:
        config.snr_db = args.snr_db
    ph, _, _, _ = simulate_scenario(config, logger)
    write_grid(ph, args.out)


def run_pfa(args, logger):
    config = load_config(_require_file(args.config), args.job_idx)
    ph = read_grid(_require_file(args.input))
    if not isinstance(ph, PhaseHistory):
        raise ValueError(f"{args.input} holds a {type(ph).__name__}, expected a phase history")
    params, geometry, _ = build_scenario(config)
    if ph.shape != (params.num_pulses, params.num_range_freq_samples):
        raise ValueError(f"phase history shape {ph.shape} does not match the scenario radar")

    chain = polar_format(params, geometry, logger)
    if args.emit_stages is None:
        image = chain(ph)
    else:
        outputs = chain.trace(ph)
        out_dir = Path(args.emit_stages)
        out_dir.mkdir(parents=True, exist_ok=True)
        for i, (stage, output) in enumerate(zip(chain.stages, outputs)):
            write_grid(output, out_dir / f"{i:02d}_{stage.name}.grid")
        image = outputs[-1]
    write_grid(image, args.out)


def run_refocus(args, logger):
    image = _read_image(args.input)
    config = load_config(_require_file(args.config), args.job_idx) if args.config else None

    if args.roi is not None:
        roi = RegionOfInterest.from_string(args.roi)
    elif config is not None and config.roi is not None:
        roi = RegionOfInterest(*config.roi)
    else:
        roi = RegionOfInterest.full(image.shape)
    roi.validate(image.shape)

    corrected, report = refocus_pipeline(image, roi, to_refocus_config(config, args.estimator), logger)
    write_grid(corrected, args.out)

    if args.report is not None:
        text = report.to_json() if args.report.endswith(".json") else report.to_text()
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(report.to_text())


def run_metrics(args, logger):
    image = _read_image(args.input)
    flags = []
    try:
        rcm = residual_rcm(image)
    except ValueError:
        rcm = 0.0
        flags.append("rcm_untracked")
    metrics = {
        "entropy": entropy(image),
        "contrast": contrast(image),
        "azimuth_width": azimuth_width(image),
        "residual_rcm": rcm,
        "range_spacing": float(image.range_spacing),
        "azimuth_spacing": float(image.azimuth_spacing),
        "flags": flags,
    }
    logger.log_stage("metrics", **{k: v for k, v in metrics.items() if k != "flags"})
    if args.json:
        print(json.dumps(metrics, indent=2))
    else:
        for key, value in metrics.items():
            if key == "flags":
                value = ",".join(value) if value else "none"
            elif isinstance(value, float):
                value = f"{value:.6g}"
            print(f"{key}={value}")


def run_export(args, logger):
    image = _read_image(args.input)
    view = range_compressed(image) if args.range_compressed else image
    export_magnitude(view, args.out, args.dynamic_range)
    logger.log_stage(
        "export", path=args.out, dynamic_range_db=args.dynamic_range, range_compressed=args.range_compressed
    )


def run_oracle(args, logger):
    config = load_config(_require_file(args.config), args.job_idx)
    params, geometry, targets = build_scenario(config)
    if not 0 <= args.target < len(targets):
        raise ValueError(f"target index {args.target} out of range for {len(targets)} targets")
    warp, tan_rate = build_azimuth_warp(geometry)
    grid = build_grid(params, geometry, tan_rate)
    model = model_for_target(params, geometry, targets[args.target], warp, order=args.order)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_grid(ape_profile(model, grid), out_dir / "profile.grid")
    write_grid(exact_surface(model, grid), out_dir / "surface.grid")
    logger.log_stage("oracle", a0=model.a0, a1=model.a1, fit_rms=model.fit_rms, flags=list(model.flags))


def run_inspect(args, logger):
    header = read_header(_require_file(args.input))
    for key, value in header.items():
        if isinstance(value, (list, tuple)):
            value = " | ".join(str(v) for v in value) if key == "provenance" else ",".join(str(v) for v in value)
        print(f"{key}: {value}")


COMMANDS = {
    "simulate": run_simulate,
    "pfa": run_pfa,
    "refocus": run_refocus,
    "metrics": run_metrics,
    "export": run_export,
    "oracle": run_oracle,
    "inspect": run_inspect,
}


def main(argv=None):
    """Run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    logger = Logger(args, verbose=not getattr(args, "quiet", False))
    try:
        COMMANDS[args.command](args, logger)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except GridFileError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    if getattr(args, "log", None):
        save_results(logger.get_results(), args.log)
    return 0


if __name__ == "__main__":
    sys.exit(main())
