"""Per-pixel descriptors from filter responses.

At every pixel the vector of response magnitudes across channels is divided
by its L2 norm. Pixels whose pre-normalization energy does not exceed a
threshold are masked out and carry an all-zero descriptor; they take no part
in clustering or encoding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .convolution import ResponseStack
from .errors import ParameterError

DEFAULT_TAU_REL = 1e-3


@dataclass(frozen=True, eq=False)
class DescriptorField:
    """``descriptors`` is ``(height, width, dim)``; ``mask`` marks kept pixels."""

    descriptors: np.ndarray
    mask: np.ndarray
    energy: np.ndarray

    @property
    def height(self) -> int:
        return self.descriptors.shape[0]

    @property
    def width(self) -> int:
        return self.descriptors.shape[1]

    @property
    def dim(self) -> int:
        return self.descriptors.shape[2]

    def kept(self) -> np.ndarray:
        """Unmasked descriptors in row-major order, shaped ``(n, dim)``."""
        return self.descriptors[self.mask]


@dataclass(frozen=True)
class MagnitudeHistogram:
    channel: tuple[int, int]
    bin_edges: np.ndarray
    counts: np.ndarray

    def normalized(self) -> np.ndarray:
        norm = np.linalg.norm(self.counts)
        return self.counts / norm if norm > 0 else self.counts.astype(np.float64)


def extract_field(stack: ResponseStack, tau: float = 0.0) -> DescriptorField:
    """Normalize magnitudes per pixel, masking pixels with energy ``<= tau``."""
    if tau < 0:
        raise ParameterError("energy threshold must be non-negative")
    mags = np.moveaxis(np.abs(stack.data).astype(np.float64), 0, -1)
    energy = np.linalg.norm(mags, axis=-1)
    mask = energy > tau
    desc = np.zeros_like(mags)
    desc[mask] = mags[mask] / energy[mask][:, None]
    for a in (desc, mask, energy):
        a.setflags(write=False)
    return DescriptorField(desc, mask, energy)


def extract_field_relative(stack: ResponseStack, tau_rel: float = DEFAULT_TAU_REL) -> DescriptorField:
    """:func:`extract_field` with the threshold expressed as a fraction of max energy.

    Scaling the image contrast scales the threshold with it, so the mask is
    contrast invariant.
    """
    if tau_rel < 0:
        raise ParameterError("relative energy threshold must be non-negative")
    energy = np.sqrt(np.sum(np.abs(stack.data) ** 2, axis=0))
    return extract_field(stack, float(tau_rel * energy.max()))


def foreground_mask(img: np.ndarray, rel: float) -> np.ndarray:
    """Pixels whose gray value exceeds ``rel`` times the image maximum.

    Meant for isolated objects on a zero background: the background pixels,
    whose share of the image changes with object scale, are dropped.
    """
    if rel < 0:
        raise ParameterError("foreground threshold must be non-negative")
    img = np.asarray(img, dtype=np.float64)
    return img > rel * img.max()


def restrict(field: DescriptorField, keep: np.ndarray) -> DescriptorField:
    """Additionally mask every pixel where ``keep`` is false."""
    keep = np.asarray(keep, dtype=bool)
    if keep.shape != field.mask.shape:
        raise ParameterError(f"mask shape {keep.shape} != field shape {field.mask.shape}")
    mask = field.mask & keep
    desc = np.where(mask[..., None], field.descriptors, 0.0)
    for a in (desc, mask):
        a.setflags(write=False)
    return DescriptorField(desc, mask, field.energy)


def sample_descriptors(field: DescriptorField, stride: int = 1) -> np.ndarray:
    """Unmasked descriptors on a ``stride`` grid anchored at pixel (0, 0)."""
    if stride < 1:
        raise ParameterError("stride must be >= 1")
    sub_desc = field.descriptors[::stride, ::stride]
    sub_mask = field.mask[::stride, ::stride]
    return sub_desc[sub_mask]


def magnitude_histogram(
    stack: ResponseStack,
    channel: tuple[int, int],
    bins: int = 64,
    value_range: tuple[float, float] | None = None,
) -> MagnitudeHistogram:
    """Histogram of ``|response|`` over all pixels of one channel.

    The default range is ``[0, max]`` of that channel.
    """
    if tuple(channel) not in stack.channels:
        raise ParameterError(f"channel {channel} not in stack")
    mags = np.abs(stack.channel(*channel)).ravel()
    if value_range is None:
        top = float(mags.max())
        value_range = (0.0, top if top > 0 else 1.0)
    counts, edges = np.histogram(mags, bins=bins, range=value_range)
    return MagnitudeHistogram(tuple(channel), edges, counts.astype(np.float64))


def write_descriptor_dump(
    descriptors: np.ndarray, path: str | Path, *, stride: int, tau: float
) -> None:
    """Write one JSON header line followed by little-endian float32 rows."""
    descriptors = np.asarray(descriptors, dtype="<f4")
    if descriptors.ndim != 2:
        raise ParameterError("descriptors must be a 2-D array")
    header = {
        "count": int(descriptors.shape[0]),
        "dim": int(descriptors.shape[1]),
        "stride": int(stride),
        "tau": float(tau),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(descriptors.tobytes())


def read_descriptor_dump(path: str | Path) -> tuple[dict, np.ndarray]:
    from .errors import FormatError

    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            header = json.loads(line)
            count, dim = int(header["count"]), int(header["dim"])
        except (ValueError, KeyError, TypeError) as exc:
            raise FormatError(f"{path}: bad descriptor dump header") from exc
        payload = fh.read()
    if len(payload) != 4 * count * dim:
        raise FormatError(f"{path}: descriptor payload truncated")
    return header, np.frombuffer(payload, "<f4").reshape(count, dim)
