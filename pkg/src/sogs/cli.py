"""Command-line interface: compress, decompress, sort, bench."""

import argparse
import io
import json
import os
import sys
import tempfile
import zipfile

import numpy as np

from . import bundle, metrics, plas
from .ply_io import PlyParseError, read_ply, write_ply
from .splats import ATTRIBUTES

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CORRUPT = 3


def _say(message):
    print(message, file=sys.stderr)


def _emit(**pairs):
    print(" ".join(f"{k}={v}" for k, v in pairs.items()))


def _atomic_write(path, data):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".sogs-tmp-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_weights(text):
    weights = {}
    for item in text.split(","):
        if not item:
            continue
        try:
            name, value = item.split("=")
            weights[name.strip()] = float(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad weight entry {item!r}, expected attr=value")
        if name.strip() not in ATTRIBUTES:
            raise argparse.ArgumentTypeError(f"unknown attribute {name.strip()!r}")
    return weights


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("SOGS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _sort_config(args):
    return plas.SortConfig(
        improvement_threshold=args.threshold,
        radius_decay=args.decay,
        min_block_size=args.min_block,
        rng_seed=args.seed,
        weights=dict(plas.SortConfig().weights, **(args.weights or {})),
    )


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=0, help="RNG seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: SOGS_THREADS or all cores)")
    parser.add_argument("--threshold", type=float, default=1e-4,
                        help="relative improvement threshold for the sorter")
    parser.add_argument("--decay", type=float, default=0.95, help="blur radius decay")
    parser.add_argument("--min-block", type=int, default=16, help="minimum block size")
    parser.add_argument("--weights", type=_parse_weights, default=None,
                        help="sorting weight overrides, e.g. position=1,scale=0.5")


def _load_input(path):
    if not os.path.isfile(path):
        _say(f"input not found: {path}")
        raise SystemExit(EXIT_USAGE)
    with open(path, "rb") as handle:
        return handle.read()


def cmd_compress(args):
    data = _load_input(args.input)
    try:
        cloud = read_ply(data)
    except PlyParseError as exc:
        _say(f"cannot parse PLY: {exc}")
        return EXIT_USAGE
    if args.no_sh:
        cloud = cloud.without_sh_rest()
    quant = bundle.default_quant_spec(args.codec) if args.codec != "png" else None
    if args.quality is not None:
        _say("lossy sh_dc encoding needs a lossy codec backend; none is available")
        return EXIT_USAGE
    try:
        payload = bundle.compress(cloud, _sort_config(args), quant=quant,
                                  threads=_threads(args), sort=not args.no_sort)
    except bundle.UnsupportedCodecError as exc:
        _say(str(exc))
        return EXIT_USAGE
    _atomic_write(args.output, payload)
    manifest = bundle.read_manifest(payload)
    pairs = {
        "input_bytes": len(data),
        "bundle_bytes": len(payload),
        "ratio": f"{len(data) / len(payload):.2f}",
        "side": manifest["side"],
        "count": manifest["count"],
    }
    with zipfile.ZipFile(io.BytesIO(payload)) as archive:
        for entry in manifest["attributes"].values():
            for name in entry["planes"]:
                pairs[f"plane.{name}"] = archive.getinfo(name).file_size
    _emit(**pairs)
    return EXIT_OK


def cmd_decompress(args):
    data = _load_input(args.input)
    try:
        cloud = bundle.decompress(data)
    except bundle.BundleError as exc:
        _say(f"cannot decode bundle: {exc}")
        return EXIT_CORRUPT
    _atomic_write(args.output, write_ply(cloud))
    _emit(gaussians=cloud.n, sh_degree=cloud.sh_degree, output=args.output)
    return EXIT_OK


def _load_grid(path):
    if path.endswith(".npy"):
        return np.load(path), "npy"
    import cv2
    image = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if image is None:
        _say(f"cannot read image: {path}")
        raise SystemExit(EXIT_USAGE)
    return image, "image"


def cmd_sort(args):
    if not os.path.isfile(args.input):
        _say(f"input not found: {args.input}")
        return EXIT_USAGE
    grid, kind = _load_grid(args.input)
    if grid.ndim == 2:
        grid = grid[..., None]
    if grid.ndim != 3 or grid.shape[0] != grid.shape[1] or grid.shape[0] < 2:
        _say(f"input must be a square multi-channel grid, got shape {grid.shape}")
        return EXIT_USAGE
    side, _, channels = grid.shape
    values = grid.reshape(side * side, channels).astype(np.float64)
    span = values.max() - values.min()
    features = (values - values.min()) / (span if span > 0 else 1.0)
    perm, report = plas.sort_grid_report(features, _sort_config(args), threads=_threads(args))
    sorted_grid = values[perm].reshape(side, side, channels).astype(grid.dtype)

    if kind == "npy":
        buffer = io.BytesIO()
        np.save(buffer, sorted_grid)
        _atomic_write(args.output, buffer.getvalue())
    else:
        import cv2
        ok, buf = cv2.imencode(os.path.splitext(args.output)[1] or ".png", sorted_grid)
        if not ok:
            _say("cannot encode output image")
            return EXIT_USAGE
        _atomic_write(args.output, buf.tobytes())

    report_path = args.report or args.output + ".report.json"
    payload = {
        "side": side,
        "channels": channels,
        "reorders": report.reorders,
        "time_s": report.wall_time_s,
        "vad_initial": metrics.vad(grid.astype(np.float64)),
        "vad_final": metrics.vad(sorted_grid.astype(np.float64)),
    }
    _atomic_write(report_path, json.dumps(payload, indent=1).encode())
    _emit(**payload)
    return EXIT_OK


def cmd_bench(args):
    rows = metrics.bench_sort(
        sides=args.sides, channels=args.channels, seeds=args.seeds,
        config=_sort_config(args), threads=_threads(args))
    sys.stdout.write(metrics.bench_rows_to_csv(rows))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sogs",
        description="Sort Gaussian-splat attributes into compressible 2D grids")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="PLY -> bundle")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--codec", default="png", help="plane codec tag")
    p.add_argument("--quality", type=int, default=None,
                   help="lossy quality for the sh_dc plane (codec-specific)")
    p.add_argument("--no-sh", action="store_true", help="drop SH-rest coefficients")
    p.add_argument("--no-sort", action="store_true",
                   help="skip sorting (random grid order; for comparisons)")
    _add_common(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="bundle -> PLY")
    p.add_argument("input")
    p.add_argument("output")
    _add_common(p)
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("sort", help="sort a square .npy or image grid")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--report", default=None, help="path for the report JSON")
    _add_common(p)
    p.set_defaults(func=cmd_sort)

    p = sub.add_parser("bench", help="sorting benchmark, CSV on stdout")
    p.add_argument("--sides", type=lambda s: [int(x) for x in s.split(",")],
                   default=[64, 128])
    p.add_argument("--channels", type=int, default=3)
    p.add_argument("--seeds", type=lambda s: [int(x) for x in s.split(",")],
                   default=[0])
    _add_common(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
