"""Invariance and reconstruction reports: CSV tables plus figures."""

from __future__ import annotations

import csv
import logging
import math
from pathlib import Path

import numpy as np
from scipy import ndimage

from .config import ExperimentConfig
from .convolution import convolve_bank, response_at
from .errors import ConfigError
from .filterbank import FilterParams, make_bank
from .geometry import rescale, rotate
from .imageio import load_image, save_image
from .reconstruction import (
    abs_correlation,
    make_problem,
    reconstruct,
    reconstruction_bank,
    to_display,
    write_trace_csv,
)

log = logging.getLogger(__name__)


def smooth_patch(rng: np.random.Generator, size: int, sigma: float = 2.0) -> np.ndarray:
    """Low-pass random texture rescaled to ``[0, 1]``."""
    img = ndimage.gaussian_filter(rng.standard_normal((size, size)), sigma)
    return (img - img.min()) / (img.max() - img.min())


def center_descriptor(img: np.ndarray, bank) -> np.ndarray:
    h, w = img.shape
    mags = np.abs(response_at(convolve_bank(img, bank, "fft"), h // 2, w // 2))
    n = np.linalg.norm(mags)
    return mags / n if n > 0 else mags


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    den = np.linalg.norm(a) * np.linalg.norm(b)
    return float(a @ b / den) if den > 0 else 0.0


def _patches(cfg: ExperimentConfig) -> list[np.ndarray]:
    inv = cfg["invariance"]
    rng = np.random.default_rng(cfg["seed"])
    size = int(inv["patch_size"])
    if inv["image"] is None:
        return [smooth_patch(rng, size) for _ in range(inv["patches"])]
    path = Path(inv["image"])
    if not path.exists():
        raise ConfigError(f"invariance.image: path {path} does not exist")
    img = load_image(path)
    if min(img.shape) < size:
        raise ConfigError(f"invariance.image is smaller than patch_size {size}")
    out = []
    for _ in range(inv["patches"]):
        i = int(rng.integers(img.shape[0] - size + 1))
        j = int(rng.integers(img.shape[1] - size + 1))
        out.append(img[i : i + size, j : j + size].copy())
    return out


def invariance_rows(cfg: ExperimentConfig) -> list[dict]:
    """Center-descriptor cosine similarity against rotation angle and scale factor."""
    inv = cfg["invariance"]
    base = cfg.filter_params.to_dict()
    if inv["kernel_size"] > inv["patch_size"]:
        raise ConfigError("invariance.kernel_size must not exceed invariance.patch_size")
    patches = _patches(cfg)
    angles = [2 * math.pi * i / inv["angles"] for i in range(inv["angles"])]
    rows = []
    for alpha in inv["alphas"]:
        params = FilterParams(**{**base, "alpha": float(alpha), "kernel_size": int(inv["kernel_size"]),
                                 "radial_freqs": tuple(base["radial_freqs"]),
                                 "angular_freqs": tuple(base["angular_freqs"])})
        bank = make_bank(params)
        refs = [center_descriptor(p, bank) for p in patches]
        for kind, values, op in (("rotation", angles, rotate), ("scale", inv["scales"], rescale)):
            for v in values:
                cos = [cosine(r, center_descriptor(op(p, v), bank)) for p, r in zip(patches, refs)]
                rows.append({
                    "kind": kind, "alpha": float(alpha), "param": float(v),
                    "mean_cosine": float(np.mean(cos)), "min_cosine": float(np.min(cos)),
                })
        log.info("invariance alpha=%g done", alpha)
    return rows


def write_rows(rows: list[dict], path: Path, config_hash: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def run_invariance(cfg: ExperimentConfig, *, figures: bool = True) -> list[dict]:
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    rows = invariance_rows(cfg)
    write_rows(rows, out / "invariance.csv", cfg.hash)
    if figures:
        from . import plotting

        plotting.invariance_curves(rows, out / "invariance.png", cfg.hash)
    return rows


def _recon_source(cfg: ExperimentConfig) -> np.ndarray:
    rc = cfg["reconstruct"]
    if not rc["image"]:
        raise ConfigError("reconstruct.image is required")
    path = Path(rc["image"])
    if not path.exists():
        raise ConfigError(f"reconstruct.image: path {path} does not exist")
    img = load_image(path)
    if rc["crop"] is not None:
        try:
            top, left, size = (int(v) for v in rc["crop"])
        except (TypeError, ValueError) as exc:
            raise ConfigError("reconstruct.crop must be [top, left, size]") from exc
        if top < 0 or left < 0 or top + size > img.shape[0] or left + size > img.shape[1]:
            raise ConfigError(f"reconstruct.crop {rc['crop']} falls outside the image {img.shape}")
        img = img[top : top + size, left : left + size]
    return img


def run_reconstruction(cfg: ExperimentConfig, *, figures: bool = True) -> list[dict]:
    """Reconstruct the source image for every (alpha, seed) pair."""
    rc = cfg["reconstruct"]
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    src = _recon_source(cfg)
    save_image(src, out / "original.png")
    rows, panel, traces = [], {}, {}
    for alpha in rc["alphas"]:
        bank = reconstruction_bank(float(alpha), int(rc["kernel_size"]))
        problem = make_problem(src, bank)
        for seed in rc["seeds"]:
            tag = f"alpha{alpha:g}_seed{seed}"
            res = reconstruct(problem, seed=int(seed), iters=int(rc["iters"]),
                              snapshot_every=int(rc["snapshot_every"]))
            save_image(to_display(res.image), out / f"recon_{tag}.png")
            for it, snap in res.snapshots.items():
                save_image(to_display(snap), out / f"recon_{tag}_it{it:05d}.png")
            write_trace_csv(res.trace, out / f"trace_{tag}.csv")
            a, b = src.ravel() - src.mean(), res.image.ravel() - res.image.mean()
            den = np.linalg.norm(a) * np.linalg.norm(b)
            signed = float(a @ b / den) if den > 0 else 0.0
            rows.append({
                "alpha": float(alpha), "seed": int(seed), "iterations": res.iterations,
                "converged": res.converged, "initial_error": res.trace[0],
                "final_error": res.trace[-1], "correlation": signed,
                "abs_correlation": abs_correlation(src, res.image),
            })
            panel[f"a={alpha:g} s={seed}"] = to_display(res.image)
            traces[f"a={alpha:g} s={seed}"] = res.trace
            log.info("reconstruct %s |corr|=%.4f", tag, rows[-1]["abs_correlation"])
    write_rows(rows, out / "reconstruction.csv", cfg.hash)
    if figures:
        from . import plotting

        plotting.reconstruction_panel(src, panel, out / "reconstruction.png", cfg.hash)
        plotting.error_traces(traces, out / "traces.png", cfg.hash)
    return rows
