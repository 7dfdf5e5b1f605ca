"""Same-size 2-D convolution of a real image with every kernel of a bank.

Both paths compute a true convolution (kernel flipped) with zero padding:

    out[c, i, j] = sum_{a, b} img[i - a, j - b] * h_c[a, b]

with ``a, b`` the offsets from the kernel center. The direct path is the
reference; the FFT path transforms the image once and reuses cached kernel
transforms from the bank.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import ParameterError
from .filterbank import FilterBank
from .imageio import check_image

log = logging.getLogger(__name__)

# kernel_size**2 * image area above which "auto" switches to the FFT path
AUTO_FFT_THRESHOLD = 20_000


@dataclass(frozen=True, eq=False)
class ResponseStack:
    """Complex responses shaped ``(n_channels, height, width)``."""

    data: np.ndarray
    channels: tuple[tuple[int, int], ...]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def channel(self, wr: int, wt: int) -> np.ndarray:
        try:
            return self.data[self.channels.index((wr, wt))]
        except ValueError:
            raise ParameterError(f"channel {(wr, wt)} not in stack") from None

    def magnitudes(self) -> np.ndarray:
        return np.abs(self.data)


def fft_shape(image_shape: tuple[int, int], kernel_size: int) -> tuple[int, int]:
    """Padded transform size large enough to avoid circular wrap-around."""
    h, w = image_shape
    return (
        sfft.next_fast_len(h + kernel_size - 1),
        sfft.next_fast_len(w + kernel_size - 1),
    )


def _direct(img: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    n, k, _ = kernels.shape
    r = k // 2
    h, w = img.shape
    padded = np.zeros((h + 2 * r, w + 2 * r))
    padded[r : r + h, r : r + w] = img
    out = np.zeros((n, h, w), dtype=np.complex128)
    for a in range(-r, r + 1):
        for b in range(-r, r + 1):
            taps = kernels[:, a + r, b + r]
            if not np.any(taps):
                continue
            window = padded[r - a : r - a + h, r - b : r - b + w]
            out += taps[:, None, None] * window[None]
    return out


def _fft(img: np.ndarray, bank: FilterBank, workers: int) -> np.ndarray:
    h, w = img.shape
    r = bank.size // 2
    shape = fft_shape(img.shape, bank.size)
    img_f = sfft.fft2(img, s=shape, workers=workers)
    full = sfft.ifft2(bank.kernel_fft(shape) * img_f[None], axes=(-2, -1), workers=workers)
    return full[:, r : r + h, r : r + w]


def convolve_bank(
    img: np.ndarray,
    bank: FilterBank,
    method: str = "auto",
    *,
    workers: int = 1,
    single: bool = False,
) -> ResponseStack:
    """Convolve ``img`` with every kernel of ``bank``.

    ``method`` is ``"direct"``, ``"fft"`` or ``"auto"``. ``single`` returns
    ``complex64`` responses to halve memory; accumulation is always float64.
    """
    img = check_image(img)
    if len(bank) == 0:
        raise ParameterError("filter bank is empty")
    if method not in ("direct", "fft", "auto"):
        raise ParameterError(f"unknown convolution method {method!r}")
    if bank.size > min(img.shape):
        log.warning("kernel size %d exceeds image dimension %s", bank.size, img.shape)
    if method == "auto":
        method = "fft" if bank.size**2 * img.size > AUTO_FFT_THRESHOLD else "direct"
    data = _direct(img, bank.kernels) if method == "direct" else _fft(img, bank, workers)
    if single:
        data = data.astype(np.complex64)
    data.setflags(write=False)
    return ResponseStack(data, tuple(bank.channels))


def response_at(stack: ResponseStack, i: int, j: int) -> np.ndarray:
    """Channel-ordered complex responses at row ``i``, column ``j``."""
    if not (0 <= i < stack.height and 0 <= j < stack.width):
        raise IndexError(f"pixel ({i}, {j}) outside {stack.height}x{stack.width} stack")
    return stack.data[:, i, j].copy()
