"""Report figures. Uses the non-interactive Agg backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update(
    {
        "figure.dpi": 100,
        "savefig.dpi": 120,
        "font.size": 9,
        "axes.grid": False,
        "image.cmap": "gray",
    }
)


def _save(fig, path: Path, config_hash: str | None) -> None:
    meta = {"Software": "lfmd"}
    if config_hash:
        meta["Description"] = f"config_hash={config_hash}"
    fig.savefig(path, metadata=meta, bbox_inches="tight")
    plt.close(fig)


def accuracy_bars(metrics: dict, path: Path, config_hash: str | None = None) -> None:
    variants = list(metrics["accuracy"])
    err = [metrics["error_pct"][v] for v in variants]
    std = [100.0 * metrics["accuracy_std"][v] for v in variants]
    fig, ax = plt.subplots(figsize=(4.5, 3))
    ax.bar(variants, err, yerr=std, color="0.4", capsize=3)
    ax.set_ylabel("error (%)")
    ax.set_title(f"alpha = {metrics['config']['filters']['alpha']}")
    _save(fig, path, config_hash)


def confusion_grid(confusions: dict, names, path: Path, config_hash: str | None = None) -> None:
    n = len(confusions)
    fig, axes = plt.subplots(1, n, figsize=(3 * n, 3), squeeze=False)
    for ax, (variant, conf) in zip(axes[0], confusions.items()):
        ax.imshow(conf, cmap="viridis")
        ax.set_title(variant)
        ax.set_xticks(range(len(names)), names, fontsize=6)
        ax.set_yticks(range(len(names)), names, fontsize=6)
        ax.set_xlabel("predicted")
    axes[0][0].set_ylabel("true")
    _save(fig, path, config_hash)


def invariance_curves(rows: list[dict], path: Path, config_hash: str | None = None) -> None:
    """``rows`` hold kind ('rotation'|'scale'), alpha, param and mean_cosine."""
    fig, (ax_r, ax_s) = plt.subplots(1, 2, figsize=(8, 3))
    for alpha in sorted({r["alpha"] for r in rows}, reverse=True):
        for kind, ax in (("rotation", ax_r), ("scale", ax_s)):
            pts = sorted((r["param"], r["mean_cosine"]) for r in rows if r["kind"] == kind and r["alpha"] == alpha)
            if pts:
                x, y = zip(*pts)
                ax.plot(np.degrees(x) if kind == "rotation" else x, y, marker=".", label=f"alpha={alpha:g}")
    ax_r.set_xlabel("rotation (deg)")
    ax_s.set_xlabel("scale factor")
    ax_s.set_xscale("log")
    for ax in (ax_r, ax_s):
        ax.set_ylabel("cosine similarity")
    ax_r.legend(fontsize=7)
    _save(fig, path, config_hash)


def reconstruction_panel(original: np.ndarray, recs: dict, path: Path, config_hash: str | None = None) -> None:
    """Original plus one display-normalized reconstruction per label."""
    n = len(recs) + 1
    fig, axes = plt.subplots(1, n, figsize=(2.2 * n, 2.4))
    axes[0].imshow(original, vmin=0, vmax=1)
    axes[0].set_title("original")
    for ax, (label, img) in zip(axes[1:], recs.items()):
        ax.imshow(img)
        ax.set_title(label, fontsize=8)
    for ax in axes:
        ax.axis("off")
    _save(fig, path, config_hash)


def error_traces(traces: dict, path: Path, config_hash: str | None = None) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 3))
    for label, trace in traces.items():
        ax.semilogy(np.asarray(trace) / trace[0], label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative error")
    ax.legend(fontsize=7)
    _save(fig, path, config_hash)


def kernel_gallery(bank, path: Path, config_hash: str | None = None) -> None:
    """Phase as hue, magnitude as value, one tile per channel."""
    from matplotlib.colors import hsv_to_rgb

    n_r = len(bank.params.radial_freqs)
    n_t = len(bank.params.angular_freqs)
    fig, axes = plt.subplots(n_r, n_t, figsize=(n_t * 0.9, n_r * 0.9), squeeze=False)
    for ax, (wr, wt), kern in zip(axes.ravel(), bank.channels, bank.kernels):
        mag = np.abs(kern)
        val = mag / mag.max() if mag.max() > 0 else mag
        hue = (np.angle(kern) + np.pi) / (2 * np.pi)
        ax.imshow(hsv_to_rgb(np.stack([hue, np.ones_like(hue), np.sqrt(val)], axis=-1)))
        ax.set_axis_off()
        ax.set_title(f"{wr},{wt}", fontsize=6)
    _save(fig, path, config_hash)
