"""Command-line front end: one executable, one subcommand per pipeline stage.

Exit codes: 0 success, 2 usage or input error, 3 runtime failure.
Diagnostics go to stderr; machine-readable output goes only to files.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import dataset, images, metrics, stats, subjective
from .blockmatch import BlockSpec, dissimilarity_map
from .images import ImageFormatError, NoiseSpec
from .metrics import CalibrationError, DsiParams, METRIC_NAMES

__all__ = ["main"]


class CliError(Exception):
    pass


def _info(args, message):
    if not getattr(args, "quiet", False):
        print(message, file=sys.stderr)


def _parse_lambdas(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise CliError(f"bad --lambdas value {text!r}: {exc}") from exc
    if not values:
        raise CliError("--lambdas must name at least one value")
    return values


def _parse_grid(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise CliError(f"--grid must be lo:hi:step, got {text!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError as exc:
        raise CliError(f"bad --grid value {text!r}: {exc}") from exc
    if step <= 0 or hi < lo:
        raise CliError(f"--grid must satisfy lo <= hi and step > 0, got {text!r}")
    return lo, hi, step


def _map_jobs(jobs, func, items):
    items = list(items)
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(func, items))
    return [func(item) for item in items]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_degrade(args):
    if not os.path.isdir(args.in_dir):
        raise CliError(f"input directory not found: {args.in_dir}")
    names = sorted(
        n for n in os.listdir(args.in_dir)
        if os.path.splitext(n)[1].lower() in (".png", ".pgm")
    )
    if not names:
        raise CliError(f"no .png/.pgm images in {args.in_dir}")
    os.makedirs(args.out_dir, exist_ok=True)

    def degrade_one(name):
        img = images.load_image(os.path.join(args.in_dir, name))
        seed = dataset.derive_seed(args.seed, os.path.splitext(name)[0])
        noisy = images.add_awgn(img, NoiseSpec(args.variance, seed, not args.no_clip))
        images.save_image(noisy, os.path.join(args.out_dir, name))
        return name

    done = _map_jobs(args.jobs, degrade_one, names)
    _info(args, f"degraded {len(done)} image(s) into {args.out_dir}")
    return 0


def cmd_dataset_build(args):
    manifest = dataset.build_dataset(
        ref_dir=args.refs,
        out_dir=args.out,
        noise=NoiseSpec(args.variance, args.seed, clip=True),
        lambdas=_parse_lambdas(args.lambdas),
        labels_path=args.labels,
        force=args.force,
    )
    _info(args, f"built {len(manifest.entries)} entries into {args.out}")
    return 0


def cmd_dataset_validate(args):
    report = dataset.validate_manifest(args.manifest)
    for violation in report.violations:
        print(violation, file=sys.stderr)
    if report.violations:
        raise CliError(f"manifest has {len(report.violations)} violation(s)")
    _info(args, "manifest is valid")
    return 0


def _metric_row(ref, dist, noisy, names, dsi_params):
    values = {}
    map_metrics = {"msddm", "dsi"} & set(names)
    if map_metrics:
        map_ref = dissimilarity_map(ref, dsi_params.spec)
        map_dist = dissimilarity_map(dist, dsi_params.spec)
        if "msddm" in names:
            values["msddm"] = metrics.msddm_from_maps(map_ref, map_dist)
        if "dsi" in names:
            values["dsi"] = metrics.dsi_from_maps(map_ref, map_dist,
                                                  dsi_params.correcting_factor)
    if "psnr" in names:
        values["psnr"] = metrics.psnr(ref, dist).value
    if "wpsnr" in names:
        values["wpsnr"] = metrics.wpsnr(ref, dist, noisy).value
    if "ssim" in names:
        values["ssim"] = metrics.ssim(ref, dist).value
    return values


def cmd_metrics(args):
    names = [n.strip() for n in args.metrics.split(",") if n.strip()]
    unknown = [n for n in names if n not in METRIC_NAMES]
    if unknown:
        raise CliError(f"unknown metric {unknown[0]!r}; valid names: {', '.join(METRIC_NAMES)}")
    if not names:
        raise CliError("no metrics requested")
    manifest = dataset.load_manifest(args.manifest)
    dsi_params = DsiParams(correcting_factor=args.dsi_factor)

    def entry_rows(entry):
        ref = images.load_image(manifest.resolve(entry.ref_path))
        noisy = images.load_image(manifest.resolve(entry.noisy_path))
        rows = []
        for dist_file in entry.distorted:
            dist = images.load_image(manifest.resolve(dist_file["path"]))
            values = _metric_row(ref, dist, noisy, names, dsi_params)
            rows.append((entry.id, dist_file["lambda"], values))
        return rows

    all_rows = [row for rows in _map_jobs(args.jobs, entry_rows, manifest.entries)
                for row in rows]
    all_rows.sort(key=lambda r: (r[0], r[1]))
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "lambda"] + names)
        for ref_id, lam, values in all_rows:
            writer.writerow([ref_id, repr(float(lam))] + [repr(values[n]) for n in names])
    _info(args, f"wrote {len(all_rows)} rows to {args.out}")
    return 0


def _read_metrics_csv(path: str):
    """-> {metric_name: {(image_id, lam): value}}"""
    tables: dict[str, dict] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or reader.fieldnames[:2] != ["image_id", "lambda"]:
            raise CliError(f"{path}: expected columns image_id,lambda,<metrics...>")
        names = reader.fieldnames[2:]
        for name in names:
            tables[name] = {}
        for row in reader:
            key = (row["image_id"], float(row["lambda"]))
            for name in names:
                tables[name][key] = float(row[name])
    if not tables:
        raise CliError(f"{path}: no metric columns")
    return tables


def cmd_mos(args):
    votes = subjective.load_votes(args.votes)
    manifest = dataset.load_manifest(args.manifest)
    scores = subjective.observer_scores(votes, manifest)
    table = subjective.screen_and_mos(scores)
    subjective.write_mos_csv(table, args.out)
    _info(args, f"MOS for {len(table.values)} images; "
                f"rejected fraction {table.rejected_fraction:.4f}")
    return 0


def cmd_evaluate(args):
    tables = _read_metrics_csv(args.metrics)
    mos = subjective.read_mos_csv(args.mos)
    subsets = dataset.load_labels(args.labels) if args.labels else {}
    try:
        table = stats.evaluate(tables, mos, subsets)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    with open(args.out, "w", newline="") as fh:
        fh.write(table.to_csv_text())
    print(table.to_text(), end="")
    return 0


def cmd_scatter(args):
    tables = _read_metrics_csv(args.metrics)
    mos = subjective.read_mos_csv(args.mos)
    try:
        stats.scatter_export(tables, mos, args.out)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    _info(args, f"wrote scatter data to {args.out}")
    return 0


def cmd_calibrate(args):
    manifest = dataset.load_manifest(args.manifest)
    mos = subjective.read_mos_csv(args.mos)
    pairs = []
    for entry in manifest.entries:
        ref = images.load_image(manifest.resolve(entry.ref_path))
        for dist_file in entry.distorted:
            key = (entry.id, dist_file["lambda"])
            if key not in mos:
                raise CliError(f"no MOS for image {entry.id!r} (lambda {dist_file['lambda']})")
            dist = images.load_image(manifest.resolve(dist_file["path"]))
            pairs.append((ref, dist, mos[key]))
    try:
        factor, curve = metrics.calibrate_dsi_factor(
            pairs, grid=_parse_grid(args.grid), return_curve=True
        )
    except CalibrationError as exc:
        raise CliError(str(exc)) from exc
    print(f"best_factor {factor!r}")
    for c, rho in curve:
        print(f"{c!r},{'n/a' if rho is None else repr(rho)}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["factor", "srocc"])
            for c, rho in curve:
                writer.writerow([repr(c), "n/a" if rho is None else repr(rho)])
    return 0


def cmd_serve(args):
    import uvicorn

    from .service import create_app

    app = create_app(args.manifest, args.votes, seed=args.seed, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iqabench",
        description="Denoising quality workbench: dataset building, metrics, "
                    "subjective study, and rank-correlation evaluation.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base random seed")
    common.add_argument("--jobs", type=int, default=1, help="parallel workers for per-image work")
    common.add_argument("--quiet", action="store_true", help="suppress progress messages")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("degrade", parents=[common], help="add seeded Gaussian noise to a directory of images")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--variance", type=float, default=200.0)
    p.add_argument("--no-clip", action="store_true")
    p.set_defaults(func=cmd_degrade)

    ds = sub.add_parser("dataset", help="build or validate a dataset")
    ds_sub = ds.add_subparsers(dest="dataset_command", required=True)

    p = ds_sub.add_parser("build", parents=[common], help="references -> noisy -> filtered variants + manifest")
    p.add_argument("--refs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variance", type=float, default=200.0)
    p.add_argument("--lambdas", default="1.6,2.0,2.4,2.8")
    p.add_argument("--labels", default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_dataset_build)

    p = ds_sub.add_parser("validate", parents=[common], help="check manifest and files")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_dataset_validate)

    p = sub.add_parser("metrics", parents=[common], help="compute metrics for every distorted image")
    p.add_argument("--manifest", required=True)
    p.add_argument("--metrics", default=",".join(METRIC_NAMES))
    p.add_argument("--dsi-factor", type=float, default=4.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("mos", parents=[common], help="screen votes and compute MOS")
    p.add_argument("--votes", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mos)

    p = sub.add_parser("evaluate", parents=[common], help="SROCC table of metrics vs MOS")
    p.add_argument("--metrics", required=True)
    p.add_argument("--mos", required=True)
    p.add_argument("--labels", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("scatter", parents=[common], help="export metric-vs-MOS scatter data")
    p.add_argument("--metrics", required=True)
    p.add_argument("--mos", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scatter)

    p = sub.add_parser("calibrate", parents=[common], help="sweep the DSI correcting factor against MOS")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mos", required=True)
    p.add_argument("--grid", default="1:10:0.1")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("serve", parents=[common], help="run the subjective-study HTTP service")
    p.add_argument("--manifest", required=True)
    p.add_argument("--votes", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static", default=None, help="directory of built UI assets to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


_INPUT_ERRORS = (
    CliError,
    ImageFormatError,
    FileNotFoundError,
    FileExistsError,
    NotADirectoryError,
    subjective.VoteError,
    ValueError,
    KeyError,
)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # runtime failure
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
