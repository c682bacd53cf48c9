"""Command-line front end.

Subcommands wrap one module operation chain each:

    mrb phantom    generate a synthetic test volume
    mrb degrade    k-space truncation downsampling
    mrb motion     motion-artifact synthesis + corruption mask CSV
    mrb patch      crop a volume into an on-disk patch set
    mrb assemble   reassemble a patch set into a volume
    mrb evaluate   quality report (JSON) + per-slice CSV
    mrb calibrate  fit uncertainty -> SSIM/PSNR regressions
    mrb predict    quality prediction with intervals from a fitted model

Exit codes: 0 success, 1 runtime error, 2 usage error.  Every subcommand
honors --dry-run (validate inputs, write nothing).  MRB_THREADS caps
parallelism of batch evaluation.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import calibration, kspace, motion, patching, quality, volume
from .errors import ManifestError, MrbError

MANIFEST_FIELDS = {"version", "inputs", "strategy", "motion", "patch",
                   "outputs", "seed"}


def _load_manifest(path: str) -> dict:
    try:
        manifest = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ManifestError(f"cannot read manifest {path}: {e}") from e
    if "version" not in manifest:
        raise ManifestError("manifest missing 'version' field")
    unknown = set(manifest) - MANIFEST_FIELDS
    if unknown:
        raise ManifestError(f"unknown manifest fields: {sorted(unknown)}")
    for p in manifest.get("inputs", []):
        if not Path(p).exists() and not Path(p).with_suffix(".f32raw").exists():
            raise ManifestError(f"input path does not exist: {p}")
    return manifest


def _max_threads() -> int:
    try:
        return max(1, int(os.environ.get("MRB_THREADS", "1")))
    except ValueError:
        return 1


def _load_vol(path: str) -> volume.Volume:
    if path.endswith(".nii"):
        return volume.load_nifti(path)
    v = volume.load_volume(path)
    if not isinstance(v, volume.Volume):
        raise MrbError(f"{path} holds complex k-space, expected a real volume")
    return v


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_phantom(args) -> None:
    if args.dry_run:
        volume.make_phantom(args.kind, (16, 16, 16), args.seed)
        return
    v = volume.make_phantom(args.kind, tuple(args.dims), args.seed)
    v = volume.normalize(v) if args.kind != "ellipsoid" else v
    volume.store_volume(v, args.output)


def cmd_degrade(args) -> None:
    strategy = kspace.parse_strategy(args.strategy, zero_fill=args.zero_fill)
    v = _load_vol(args.input)
    report = {
        "strategy": strategy.to_json(),
        "acceleration": int(kspace.acceleration_factor(strategy)),
        "retention": float(kspace.retention_ratio(strategy)),
    }
    if args.dry_run:
        return
    lr = kspace.downsample(volume.normalize(v) if v.max() > 1 or v.min() < 0 else v,
                           strategy)
    volume.store_volume(lr, args.output)
    Path(args.output).with_suffix(".report.json").write_text(
        json.dumps(report, indent=1))


def cmd_motion(args) -> None:
    v = _load_vol(args.input)
    yaw, pitch = (float(x) for x in args.pattern.split("/"))
    total_lines = v.dims[1] * v.dims[2]
    schedule = motion.build_schedule(args.ts, args.eg, total_lines,
                                     pattern=(yaw, pitch),
                                     literal_steps=args.literal_steps)
    if args.dry_run:
        return
    ma = motion.apply_motion(v, schedule)
    volume.store_volume(ma, args.output)
    motion.export_mask_csv(schedule, Path(args.output).with_suffix(".mask.csv"))
    Path(args.output).with_suffix(".schedule.json").write_text(
        json.dumps(schedule.to_json()
                   | {"corrupted_ratio": motion.corrupted_ratio(schedule)},
                   indent=1))


def cmd_patch(args) -> None:
    v = _load_vol(args.input)
    spec = patching.PatchSpec(args.size, args.overlap, args.slices)
    if args.dry_run:
        patching.crop(v, spec)
        return
    patching.save_patchset(patching.crop(v, spec), args.output)


def cmd_assemble(args) -> None:
    ps = patching.load_patchset(args.manifest)
    if args.dry_run:
        return
    volume.store_volume(patching.assemble(ps), args.output)


def _eval_one(pair):
    vid, restored_path, reference_path, window = pair
    x = _load_vol(restored_path)
    y = _load_vol(reference_path)
    return vid, quality.evaluate_volume(x, y, window)


def cmd_evaluate(args) -> None:
    pairs = [(Path(args.restored).stem, args.restored, args.reference, args.window)]
    if args.dry_run:
        for _vid, r, ref, _w in pairs:
            _load_vol(r), _load_vol(ref)
        return
    with ThreadPoolExecutor(max_workers=_max_threads()) as ex:
        results = list(ex.map(_eval_one, pairs))
    rows = []
    for vid, report in results:
        report.save(Path(args.output).with_suffix(".json"))
        rows.extend((vid, s, ss, p) for s, ss, p in report.per_slice)
    quality.write_batch_csv(rows, Path(args.output).with_suffix(".csv"))


def cmd_calibrate(args) -> None:
    u_s, ssim = calibration.read_points_csv(args.quality_csv, args.epistemic_csv,
                                            "ssim")
    u_p, psnr = calibration.read_points_csv(args.quality_csv, args.epistemic_csv,
                                            "psnr")
    if args.dry_run:
        return
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    lin = calibration.fit_linear(u_s, ssim)
    lin.save(out / "linear_ssim.json")
    exp = calibration.fit_exponential(u_p, psnr)
    exp.save(out / "exponential_psnr.json")
    for name, model, u, y in (("ssim", lin, u_s, ssim), ("psnr", exp, u_p, psnr)):
        grid = np.linspace(min(u), max(u), 200)
        with open(out / f"{name}_series.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["u", "observed", "fit", "pi_low", "pi_high"])
            for ui, yi in zip(u, y):
                w.writerow([ui, yi, "", "", ""])
            for ui in grid:
                est, lo, hi = calibration.predict_quality(float(ui), model)
                w.writerow([ui, "", est, lo, hi])


def cmd_predict(args) -> None:
    model = calibration.CalibrationModel.load(args.model)
    rows = []
    with open(args.epistemic_csv, newline="") as f:
        for row in csv.DictReader(f):
            rows.append((row["volume_id"], int(row["slice"]),
                         float(row["mean_epistemic"])))
    if args.dry_run:
        return
    with open(args.output, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["volume_id", "slice", "estimate", "pi_low", "pi_high"])
        for vid, sl, u in rows:
            est, lo, hi = calibration.predict_quality(u, model)
            w.writerow([vid, sl, est, lo, hi])


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mrb", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--dry-run", action="store_true",
                       help="validate inputs, write nothing")
        p.add_argument("--manifest", help="optional pipeline manifest JSON to validate")

    p = sub.add_parser("phantom", help="generate a synthetic test volume")
    p.add_argument("--kind", choices=volume.PHANTOM_KINDS, default="ellipsoid")
    p.add_argument("--dims", type=int, nargs=3, default=[64, 64, 64])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    common(p)
    p.set_defaults(func=cmd_phantom)

    def _strategy_arg(text: str) -> str:
        try:
            kspace.parse_strategy(text)
        except ValueError as e:
            raise argparse.ArgumentTypeError(str(e))
        return text

    p = sub.add_parser("degrade", help="k-space truncation downsampling")
    p.add_argument("--input", required=True)
    p.add_argument("--strategy", required=True, type=_strategy_arg,
                   help="e.g. 2x2x1")
    p.add_argument("--zero-fill", action="store_true")
    p.add_argument("--output", required=True)
    common(p)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("motion", help="motion-artifact synthesis")
    p.add_argument("--input", required=True)
    p.add_argument("--ts", type=int, required=True, help="T_s in EG units")
    p.add_argument("--eg", type=int, default=80, help="lines per EG")
    p.add_argument("--pattern", default="5/0", help="yaw/pitch degrees, e.g. 5/5")
    p.add_argument("--literal-steps", action="store_true",
                   help="use the literal step-list cycle (extra stay per cycle)")
    p.add_argument("--output", required=True)
    common(p)
    p.set_defaults(func=cmd_motion)

    p = sub.add_parser("patch", help="crop a volume into an on-disk patch set")
    p.add_argument("--input", required=True)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--overlap", type=int, default=16)
    p.add_argument("--slices", type=int, default=1)
    p.add_argument("--output", required=True, help="output directory")
    common(p)
    p.set_defaults(func=cmd_patch)

    p = sub.add_parser("assemble", help="reassemble a patch set")
    p.add_argument("--manifest-path", dest="manifest", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("evaluate", help="quality report against a reference")
    p.add_argument("--restored", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--window", type=int, default=11)
    p.add_argument("--output", required=True, help="report path stem")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("calibrate", help="fit uncertainty->quality regressions")
    p.add_argument("--quality-csv", required=True)
    p.add_argument("--epistemic-csv", required=True)
    p.add_argument("--output", required=True, help="output directory")
    common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("predict", help="predict quality from epistemic uncertainty")
    p.add_argument("--model", required=True)
    p.add_argument("--epistemic-csv", required=True)
    p.add_argument("--output", required=True)
    common(p)
    p.set_defaults(func=cmd_predict)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if getattr(args, "manifest", None) and args.command != "assemble":
            _load_manifest(args.manifest)
        args.func(args)
    except MrbError as e:
        json.dump({"error": type(e).__name__, "message": str(e)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    except (OSError, ValueError) as e:
        json.dump({"error": type(e).__name__, "message": str(e)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
