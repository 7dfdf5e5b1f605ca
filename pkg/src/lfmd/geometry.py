"""Bicubic geometric transforms, test-set augmentation and log-polar warping.

All resampling uses the Catmull-Rom cubic (``a = -0.5``) with inverse mapping
about the half-pixel image center ``((W - 1) / 2, (H - 1) / 2)``. Samples that
fall outside the source read zeros, and outputs are clamped to ``[0, 1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ParameterError
from .imageio import LabeledSet, check_image

AUGMENT_MODES = ("original", "rotate", "scale", "rotate+scale")


@dataclass(frozen=True)
class EuclideanTransform:
    """Scale ``s`` and rotation ``angle`` about the image center, then a shift."""

    scale: float = 1.0
    angle: float = 0.0
    tx: float = 0.0
    ty: float = 0.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ParameterError("scale must be positive")
        object.__setattr__(self, "angle", float(self.angle) % (2 * math.pi))


@dataclass(frozen=True)
class AugmentSpec:
    mode: str = "original"
    scale_range: tuple[float, float] = (0.5, 1.5)
    resize_to: int = 48
    pad_to: int = 96
    rng_seed: int = 0

    def __post_init__(self):
        if self.mode not in AUGMENT_MODES:
            raise ParameterError(f"unknown augmentation mode {self.mode!r}")
        lo, hi = self.scale_range
        if not (0 < lo <= hi):
            raise ParameterError("scale_range must satisfy 0 < lo <= hi")
        if self.resize_to < 1 or self.pad_to < self.resize_to:
            raise ParameterError("need 1 <= resize_to <= pad_to")
        object.__setattr__(self, "scale_range", (float(lo), float(hi)))


def _cubic_weights(t: np.ndarray) -> tuple[np.ndarray, ...]:
    t2 = t * t
    t3 = t2 * t
    return (
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    )


def sample_bicubic(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Evaluate the Catmull-Rom interpolant of ``img`` at (row, col) positions.

    The image is treated as zero outside its support. Results are not clamped.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    pad = 2
    padded = np.zeros((h + 2 * pad, w + 2 * pad))
    padded[pad : pad + h, pad : pad + w] = img
    ys = np.asarray(ys, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    # far-away coordinates land on the zero border after clipping
    ys = np.clip(ys, -pad, h + pad - 1)
    xs = np.clip(xs, -pad, w + pad - 1)
    y0 = np.floor(ys)
    x0 = np.floor(xs)
    wy = _cubic_weights(ys - y0)
    wx = _cubic_weights(xs - x0)
    yi = y0.astype(np.int64) + pad
    xi = x0.astype(np.int64) + pad
    ny, nx = padded.shape
    out = np.zeros(ys.shape)
    for a in range(4):
        rows = np.clip(yi + a - 1, 0, ny - 1)
        acc = np.zeros(ys.shape)
        for b in range(4):
            cols = np.clip(xi + b - 1, 0, nx - 1)
            acc += wx[b] * padded[rows, cols]
        out += wy[a] * acc
    return out


def _size2(size) -> tuple[int, int]:
    if np.isscalar(size):
        return int(size), int(size)
    h, w = size
    return int(h), int(w)


def warp(img: np.ndarray, t: EuclideanTransform, out_size=None) -> np.ndarray:
    """Apply ``t`` to ``img`` and resample onto an ``out_size`` grid.

    The forward map sends a source point ``p`` to
    ``s * R(angle) @ (p - c_in) + c_out + (tx, ty)`` in ``(x, y)`` coordinates,
    where ``R`` is the usual counter-clockwise rotation matrix.
    """
    img = check_image(img)
    h_in, w_in = img.shape
    h_out, w_out = _size2(img.shape if out_size is None else out_size)
    cy_in, cx_in = (h_in - 1) / 2.0, (w_in - 1) / 2.0
    cy_out, cx_out = (h_out - 1) / 2.0, (w_out - 1) / 2.0
    yy, xx = np.mgrid[0:h_out, 0:w_out].astype(np.float64)
    dx = xx - cx_out - t.tx
    dy = yy - cy_out - t.ty
    c, s = math.cos(t.angle), math.sin(t.angle)
    # inverse rotation and scaling
    src_x = (c * dx + s * dy) / t.scale + cx_in
    src_y = (-s * dx + c * dy) / t.scale + cy_in
    return np.clip(sample_bicubic(img, src_y, src_x), 0.0, 1.0)


def rotate(img: np.ndarray, angle: float, out_size=None) -> np.ndarray:
    return warp(img, EuclideanTransform(angle=angle), out_size)


def rescale(img: np.ndarray, scale: float, out_size=None) -> np.ndarray:
    return warp(img, EuclideanTransform(scale=scale), out_size)


def resize(img: np.ndarray, size) -> np.ndarray:
    """Bicubic resize to ``size`` (int for square, or ``(h, w)``).

    Downscaling pre-blurs with a Gaussian to limit aliasing.
    """
    img = check_image(img)
    h_out, w_out = _size2(size)
    h_in, w_in = img.shape
    sy, sx = h_out / h_in, w_out / w_in
    if sy < 1 or sx < 1:
        sigma = (max(0.0, 0.5 * (1 / sy - 1)), max(0.0, 0.5 * (1 / sx - 1)))
        img = ndimage.gaussian_filter(img, sigma, mode="constant")
    yy, xx = np.mgrid[0:h_out, 0:w_out].astype(np.float64)
    src_y = (yy - (h_out - 1) / 2.0) / sy + (h_in - 1) / 2.0
    src_x = (xx - (w_out - 1) / 2.0) / sx + (w_in - 1) / 2.0
    return np.clip(sample_bicubic(img, src_y, src_x), 0.0, 1.0)


def fit_size(shape: tuple[int, int], longest: int) -> tuple[int, int]:
    """Shape with the longer side equal to ``longest``, aspect preserved."""
    h, w = shape
    if h >= w:
        return longest, max(1, round(w * longest / h))
    return max(1, round(h * longest / w)), longest


def pad_center(img: np.ndarray, size) -> np.ndarray:
    """Zero-pad ``img`` so it sits in the middle of a ``size`` canvas."""
    img = check_image(img)
    h_out, w_out = _size2(size)
    h, w = img.shape
    if h > h_out or w > w_out:
        raise ParameterError(f"cannot pad {img.shape} into {(h_out, w_out)}")
    out = np.zeros((h_out, w_out))
    top, left = (h_out - h) // 2, (w_out - w) // 2
    out[top : top + h, left : left + w] = img
    return out


def augment_image(img: np.ndarray, spec: AugmentSpec, angle: float, scale: float) -> np.ndarray:
    """Resize, center-pad and transform one image with explicit parameters.

    The transform is applied on the padded canvas so content scaled beyond
    ``resize_to`` is not cropped.
    """
    small = resize(img, fit_size(np.shape(img), spec.resize_to))
    canvas = pad_center(small, spec.pad_to)
    if spec.mode == "original":
        return canvas
    t = EuclideanTransform(
        scale=scale if "scale" in spec.mode else 1.0,
        angle=angle if "rotate" in spec.mode else 0.0,
    )
    return warp(canvas, t)


def augment_set(dataset: LabeledSet, spec: AugmentSpec) -> LabeledSet:
    """Build a transformed copy of ``dataset``; deterministic in ``spec.rng_seed``.

    Every image consumes one angle draw in ``[0, 2*pi)`` and one scale draw in
    ``scale_range`` regardless of mode, so the rotate and rotate+scale sets of a
    seed share angles.
    """
    rng = np.random.default_rng(spec.rng_seed)
    lo, hi = spec.scale_range
    out = []
    params = []
    for img in dataset.images:
        angle = rng.uniform(0.0, 2 * math.pi)
        scale = rng.uniform(lo, hi)
        out.append(augment_image(img, spec, angle, scale))
        params.append((angle, scale))
    meta = dict(dataset.metadata)
    meta["augment"] = {"mode": spec.mode, "seed": spec.rng_seed}
    return LabeledSet(
        images=tuple(out),
        labels=dataset.labels,
        class_names=dataset.class_names,
        metadata=meta,
    )


def log_polar(img: np.ndarray, out_size=None, r_min: float = 1.0) -> np.ndarray:
    """Resample ``img`` on a log-polar grid about its center.

    Row ``i`` holds angle ``2*pi*i/h``; column ``j`` holds radius
    ``r_min * (R / r_min) ** (j / w)`` with ``R`` half the shorter side.
    Rotating the input by ``phi`` rolls rows by ``phi / (2*pi) * h``; scaling
    by ``s`` shifts columns by ``log(s) / log(R / r_min) * w``.
    """
    img = check_image(img)
    h_out, w_out = _size2(img.shape if out_size is None else out_size)
    h, w = img.shape
    big_r = min(h, w) / 2.0
    if big_r <= r_min:
        raise ParameterError("image too small for the requested r_min")
    theta = 2 * math.pi * np.arange(h_out) / h_out
    log_r = math.log(r_min) + np.arange(w_out) / w_out * math.log(big_r / r_min)
    rr = np.exp(log_r)[None, :]
    tt = theta[:, None]
    xs = (w - 1) / 2.0 + rr * np.cos(tt)
    ys = (h - 1) / 2.0 + rr * np.sin(tt)
    return np.clip(sample_bicubic(img, ys, xs), 0.0, 1.0)
