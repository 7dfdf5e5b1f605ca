"""Command-line entry point ``lfmd``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import (
    ConfigError,
    ConsistencyError,
    FormatError,
    InputError,
    LFMDError,
    NumericError,
    ParameterError,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("lfmd")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--alpha", type=float, help="radial exponent")
    p.add_argument("--kernel-size", type=int, help="odd filter size")
    p.add_argument("--threads", type=int, help="worker threads")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lfmd", description="Log-polar harmonic filter descriptors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-bank", help="write a filter bank file and a kernel figure")
    _common(p)

    p = sub.add_parser("run", help="train and evaluate a classifier per augmentation variant")
    _common(p)
    p.add_argument("--k", type=int, help="codebook size")
    p.add_argument("--stride-codebook", type=int)
    p.add_argument("--stride-encode", type=int)
    p.add_argument("--repeats", type=int)

    p = sub.add_parser("reconstruct", help="reconstruct an image from normalized magnitudes")
    _common(p)
    p.add_argument("--image", help="source image (PNG/PGM)")
    p.add_argument("--iters", type=int)
    p.add_argument("--alphas", type=float, nargs="+", help="exponents to sweep")

    p = sub.add_parser("invariance-report", help="descriptor similarity under rotation and scale")
    _common(p)
    p.add_argument("--image", help="take patches from this image instead of synthetic textures")
    return parser


def overrides_from_args(args: argparse.Namespace) -> dict:
    o: dict = {}
    filters = {}
    if args.alpha is not None:
        filters["alpha"] = args.alpha
    if args.kernel_size is not None:
        filters["kernel_size"] = args.kernel_size
    if filters:
        o["filters"] = filters
    for name, key in (("seed", "seed"), ("out", "output_dir"), ("threads", "threads"), ("k", "k"),
                      ("stride_codebook", "stride_codebook"), ("stride_encode", "stride_encode"),
                      ("repeats", "repeats")):
        val = getattr(args, name, None)
        if val is not None:
            o[key] = val
    if args.command == "reconstruct":
        rc = {}
        if args.image:
            rc["image"] = args.image
        if args.iters is not None:
            rc["iters"] = args.iters
        if args.alphas:
            rc["alphas"] = args.alphas
        if args.kernel_size is not None:
            rc["kernel_size"] = args.kernel_size
        if rc:
            o["reconstruct"] = rc
    if args.command == "invariance-report":
        inv = {}
        if args.image:
            inv["image"] = args.image
        if args.alpha is not None:
            inv["alphas"] = [args.alpha]
        if inv:
            o["invariance"] = inv
    return o


def _dispatch(args: argparse.Namespace) -> dict:
    from .config import load_config

    cfg = load_config(args.config, overrides_from_args(args), require_paths=args.command == "run")
    figures = not args.no_figures
    out = cfg.output_dir
    if args.command == "make-bank":
        from .filterbank import make_bank, save_bank

        out.mkdir(parents=True, exist_ok=True)
        bank = make_bank(cfg.filter_params)
        save_bank(bank, out / "bank.lfmb")
        (out / "bank.json").write_text(
            json.dumps({"config_hash": cfg.hash, "params": bank.params.to_dict()}, indent=2, sort_keys=True) + "\n"
        )
        if figures:
            from .plotting import kernel_gallery

            kernel_gallery(bank, out / "kernels.png", cfg.hash)
        return {"bank": str(out / "bank.lfmb"), "channels": len(bank)}
    if args.command == "run":
        from .pipeline import run_experiment

        m = run_experiment(cfg, figures=figures)
        return {"accuracy": m["accuracy"], "dims": m["dims"], "config_hash": m["config_hash"]}
    if args.command == "reconstruct":
        from .report import run_reconstruction

        rows = run_reconstruction(cfg, figures=figures)
        return {"reconstructions": [{k: r[k] for k in ("alpha", "seed", "abs_correlation")} for r in rows]}
    from .report import run_invariance

    rows = run_invariance(cfg, figures=figures)
    return {"rows": len(rows), "csv": str(out / "invariance.csv")}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        summary = _dispatch(args)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, FormatError, ConsistencyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except LFMDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
