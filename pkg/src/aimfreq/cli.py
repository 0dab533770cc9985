"""Command-line entry point: ``aimfreq {sampling,psf,image,calibrate,table}``.

Exit codes: 0 success, 2 spec validation error, 3 pipeline error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import calibration as cal
from .config import ExperimentSpec, load_spec
from .errors import AimError, ValidationError
from .metrics import evaluate_scene, reports_to_csv, write_report
from .pipeline import ADDITIVE, signal_images, signal_visibilities, analytic_visibilities
from .reconstruction import (lobe_statistics, local_peaks, psf, reconstruct, write_image,
                             write_psf_report)
from .sampling import additive_sampling, sampling_function, unique_sample_count, write_sampling
from .scenes import IntensityGrid, Scatterer, ScattererScene, project_scatterers, to_raster, write_pgm
from .visibility import write_visibility_binary

OUT_ENV = "AIMFREQ_OUT"
DEFAULT_OUT = "aimfreq-out"

EXIT_OK, EXIT_VALIDATION, EXIT_PIPELINE, EXIT_IO = 0, 2, 3, 4


def tag(key) -> str:
    return ADDITIVE if key == ADDITIVE else f"{key / 1e9:g}GHz"


def _dump(obj, path: Path) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def _lobe_dict(img) -> dict:
    width, side = lobe_statistics(img)
    return {"main_lobe_width": width, "peak_sidelobe_db": None if np.isinf(side) else side}


# --- commands ------------------------------------------------------------


def cmd_sampling(spec: ExperimentSpec, out: Path, threads: int = 1) -> list[Path]:
    layout = spec.build_layout()
    uv = spec.uv_grid(layout)
    parts = {f: sampling_function(layout, f, uv, spec.grid.include_zero) for f in spec.subbands}
    parts[ADDITIVE] = additive_sampling(list(parts.values()))
    files = []
    counts = {}
    for key, s in parts.items():
        files += write_sampling(s, out / f"sampling_{tag(key)}")
        files.append(write_pgm(out / f"occupancy_{tag(key)}.pgm", to_raster(s.occupancy)))
        counts[tag(key)] = unique_sample_count(s)
    mean_single = float(np.mean([counts[tag(f)] for f in spec.subbands]))
    summary = {"counts": counts, "additive_ratio": counts[ADDITIVE] / mean_single,
               "grid": uv.to_dict(), "include_zero": spec.grid.include_zero}
    files.append(_dump(summary, out / "sampling_summary.json"))
    return files


def cmd_psf(spec: ExperimentSpec, out: Path, threads: int = 1) -> list[Path]:
    layout = spec.build_layout()
    uv = spec.uv_grid(layout)
    dgrid = spec.direction_grid()
    parts = {f: sampling_function(layout, f, uv, spec.grid.include_zero) for f in spec.subbands}
    parts[ADDITIVE] = additive_sampling(list(parts.values()))
    files = []
    for key, s in parts.items():
        report = psf(s, dgrid)
        files.append(write_psf_report(report, out / f"psf_{tag(key)}.json"))
        files += write_image(report.psf, out / f"psf_{tag(key)}")
    return files


def _calibration_inputs(spec: ExperimentSpec, layout):
    c = spec.calibration
    if c.perturb_gains:
        gains = cal.perturbation_gains(spec.seed or 0, spec.subbands, layout.n_receivers,
                                       c.gain_low, c.gain_high)
    else:
        gains = None
    return gains


def cmd_image(spec: ExperimentSpec, out: Path, threads: int = 1) -> list[Path]:
    layout = spec.build_layout()
    uv = spec.uv_grid(layout)
    dgrid = spec.direction_grid()
    scene = spec.build_scene()
    files = []
    if spec.pipeline == "analytic":
        ref = scene if isinstance(scene, IntensityGrid) else project_scatterers(scene, dgrid)
        vis = analytic_visibilities(ref, layout, spec.subbands, uv, spec.grid.include_zero)
    else:
        if not isinstance(scene, ScattererScene):
            raise ValidationError(["scene: signal_sim pipeline needs a scatterer scene"])
        cfg = spec.noise_config()
        gains = weights = None
        if spec.calibration.enabled:
            gains = _calibration_inputs(spec, layout)
            weights = cal.calibrate_subbands(layout, spec.subbands, cfg, gains,
                                             spec.calibration.beacon, spec.calibration.snr_db)
        vis = signal_visibilities(layout, scene, cfg, spec.subbands, uv, spec.grid.include_zero,
                                  spec.snr_db, gains, weights, threads)
    images = {k: reconstruct(v, dgrid) for k, v in vis.items()}
    for key, img in images.items():
        if "images" in spec.outputs:
            files += write_image(img, out / f"image_{tag(key)}")
        if "visibility" in spec.outputs:
            files.append(write_visibility_binary(vis[key], out / f"visibility_{tag(key)}.bin"))
    if "report" in spec.outputs:
        if spec.pipeline == "analytic" and isinstance(scene, IntensityGrid):
            report = evaluate_scene(scene, layout, spec.subbands, uv, spec.grid.include_zero,
                                    name=spec.scene.name)
            files.append(write_report(report, out / "improvement.json"))
        if isinstance(scene, ScattererScene):
            truth = scene.direction_cosines()[:, :2]
            peaks = local_peaks(images[ADDITIVE], len(truth))
            files.append(_dump({"projected": truth.tolist(), "peaks": peaks.tolist()},
                               out / "peaks.json"))
    return files


def cmd_calibrate(spec: ExperimentSpec, out: Path, threads: int = 1) -> list[Path]:
    layout = spec.build_layout()
    uv = spec.uv_grid(layout)
    dgrid = spec.direction_grid()
    cfg = spec.noise_config()
    c = spec.calibration
    gains = _calibration_inputs(spec, layout)
    weights = cal.calibrate_subbands(layout, spec.subbands, cfg, gains, c.beacon, c.snr_db)
    files = [cal.save_weights(ws, out / f"weights_{tag(f)}.json") for f, ws in weights.items()]
    # pre/post comparison on a point target at the beacon position
    target = ScattererScene((Scatterer(*c.beacon),), float(c.beacon[2]))
    common = dict(uv=uv, include_zero=spec.grid.include_zero, snr_db=spec.snr_db,
                  threads=threads)
    runs = {
        "ideal": signal_images(layout, target, cfg, spec.subbands, dgrid, **common),
        "uncalibrated": signal_images(layout, target, cfg, spec.subbands, dgrid,
                                      gains=gains, **common),
        "calibrated": signal_images(layout, target, cfg, spec.subbands, dgrid,
                                    gains=gains, weights=weights, **common),
    }
    comparison = {}
    for name, imgs in runs.items():
        comparison[name] = {tag(k): _lobe_dict(img) for k, img in imgs.items()}
        if "images" in spec.outputs:
            files += write_image(imgs[ADDITIVE], out / f"calibration_psf_{name}")
    summary = {"n_weights": sum(len(w) for w in weights.values()),
               "residual": {tag(f): w.residual for f, w in weights.items()},
               "psf": comparison}
    files.append(_dump(summary, out / "calibration_summary.json"))
    return files


def cmd_table(spec: ExperimentSpec, out: Path, threads: int = 1) -> list[Path]:
    if not spec.table_scenes:
        raise ValidationError(["table_scenes: at least one scene is required"])
    layout = spec.build_layout()
    uv = spec.uv_grid(layout, spec.table_subbands)
    reports = []
    for i, sc in enumerate(spec.table_scenes):
        scene = spec.build_scene(sc)
        if not isinstance(scene, IntensityGrid):
            raise ValidationError([f"table_scenes.{i}: table scenes must be intensity rasters"])
        reports.append(evaluate_scene(scene, layout, spec.table_subbands, uv,
                                      spec.grid.include_zero, name=sc.name or f"scene{i + 1}"))
    csv_path = out / "table.csv"
    csv_path.write_text(reports_to_csv(reports))
    return [csv_path, _dump([r.to_dict() for r in reports], out / "table.json")]


COMMANDS = {
    "sampling": cmd_sampling,
    "psf": cmd_psf,
    "image": cmd_image,
    "calibrate": cmd_calibrate,
    "table": cmd_table,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aimfreq", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--spec", help="spec JSON path or a bundled name (default: paper-defaults)")
    p.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    p.add_argument("--seed", type=int, help="override the spec seed")
    p.add_argument("--threads", type=int, default=1, help="worker threads for simulation")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {} if args.seed is None else {"seed": args.seed}
    try:
        spec = load_spec(args.spec, overrides)
        out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
        out.mkdir(parents=True, exist_ok=True)
        files = COMMANDS[args.command](spec, out, max(1, args.threads))
    except ValidationError as exc:
        for problem in exc.problems:
            print(f"spec error: {problem}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except AimError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
