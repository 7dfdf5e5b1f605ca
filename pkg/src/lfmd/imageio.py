"""Image and dataset I/O.

Images are plain 2-D ``float64`` numpy arrays of gray values in ``[0, 1]``
(row-major, ``shape == (height, width)``). Supported codecs are binary PGM
(P5, implemented here) and 8-bit PNG (through Pillow). MNIST style IDX files
are parsed directly.
"""

from __future__ import annotations

import gzip
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConsistencyError, FormatError, InputError, ParameterError

log = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

# IDX type code -> big-endian numpy dtype
_IDX_DTYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}

IMAGE_SUFFIXES = (".png", ".pgm")

_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class LabeledSet:
    """Images with integer class labels in ``[0, len(class_names))``."""

    images: tuple[np.ndarray, ...]
    labels: np.ndarray
    class_names: tuple[str, ...]
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        images = tuple(_freeze(np.asarray(im, dtype=np.float64)) for im in self.images)
        labels = _freeze(np.asarray(self.labels, dtype=np.int64).reshape(-1))
        if len(images) != labels.size:
            raise ConsistencyError(
                f"{len(images)} images but {labels.size} labels"
            )
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.class_names)):
            raise ParameterError("labels must lie in [0, number of classes)")
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", tuple(self.class_names))

    def __len__(self) -> int:
        return len(self.images)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def subset(self, indices: Iterable[int]) -> "LabeledSet":
        idx = [int(i) for i in indices]
        return LabeledSet(
            images=tuple(self.images[i] for i in idx),
            labels=self.labels[idx] if idx else np.zeros(0, dtype=np.int64),
            class_names=self.class_names,
            metadata=dict(self.metadata),
        )


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def check_image(img: np.ndarray) -> np.ndarray:
    """Validate an image array and return it as float64."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ParameterError(f"image must be a non-empty 2-D array, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ParameterError("image contains non-finite values")
    return img


# ---------------------------------------------------------------------------
# IDX
# ---------------------------------------------------------------------------


def _read_bytes(path: str | Path) -> bytes:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(2)
        fh.seek(0)
        if head == b"\x1f\x8b":
            with gzip.GzipFile(fileobj=fh) as gz:
                return gz.read()
        return fh.read()


def parse_idx(buf: bytes) -> np.ndarray:
    """Decode an IDX byte string into an array with its declared dtype and shape."""
    if len(buf) < 4:
        raise FormatError("IDX header truncated")
    zero, code, ndim = struct.unpack(">HBB", buf[:4])
    if zero != 0 or code not in _IDX_DTYPES or ndim < 1:
        raise FormatError(f"bad IDX magic 0x{int.from_bytes(buf[:4], 'big'):08x}")
    header_len = 4 + 4 * ndim
    if len(buf) < header_len:
        raise FormatError("IDX dimension header truncated")
    dims = struct.unpack(f">{ndim}I", buf[4:header_len])
    dtype = _IDX_DTYPES[code]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    payload = buf[header_len:]
    if len(payload) != expected:
        raise FormatError(
            f"IDX payload has {len(payload)} bytes, header implies {expected}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(dims)


def serialize_idx(arr: np.ndarray) -> bytes:
    """Encode an array as IDX bytes; the inverse of :func:`parse_idx`."""
    arr = np.asarray(arr)
    key = arr.dtype.newbyteorder(">")
    code = next((c for c, d in _IDX_DTYPES.items() if d == key), None)
    if code is None:
        raise ParameterError(f"dtype {arr.dtype} has no IDX type code")
    header = struct.pack(">HBB", 0, code, arr.ndim)
    header += struct.pack(f">{arr.ndim}I", *arr.shape)
    return header + arr.astype(key, copy=False).tobytes()


def read_idx(path: str | Path, magic: int | None = None) -> np.ndarray:
    buf = _read_bytes(path)
    if magic is not None and (len(buf) < 4 or int.from_bytes(buf[:4], "big") != magic):
        found = int.from_bytes(buf[:4], "big") if len(buf) >= 4 else None
        raise FormatError(
            f"{path}: expected IDX magic 0x{magic:08x}, found "
            + ("nothing" if found is None else f"0x{found:08x}")
        )
    return parse_idx(buf)


def write_idx(arr: np.ndarray, path: str | Path) -> None:
    data = serialize_idx(arr)
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "wb") as fh:
            fh.write(data)
    else:
        path.write_bytes(data)


def load_idx(
    images_path: str | Path,
    labels_path: str | Path,
    digit_filter: Iterable[int] | None = None,
) -> LabeledSet:
    """Load an MNIST style image/label IDX pair.

    Gray values are scaled to ``[0, 1]``. When ``digit_filter`` is given only
    those classes are kept and labels are re-indexed in ascending class order,
    so filtering ``{0..8}`` keeps the usual digit labels.
    """
    images = read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = read_idx(labels_path, IDX_LABELS_MAGIC)
    if images.ndim != 3 or labels.ndim != 1:
        raise FormatError("IDX image file must be 3-D and label file 1-D")
    if images.shape[0] != labels.shape[0]:
        raise ConsistencyError(
            f"{images.shape[0]} images but {labels.shape[0]} labels"
        )
    labels = labels.astype(np.int64)
    if digit_filter is None:
        classes = sorted(set(labels.tolist()))
    else:
        classes = sorted(set(int(d) for d in digit_filter))
    keep = np.flatnonzero(np.isin(labels, classes))
    remap = {c: i for i, c in enumerate(classes)}
    scale = 255.0 if images.dtype.kind == "u" else 1.0
    return LabeledSet(
        images=tuple(images[i].astype(np.float64) / scale for i in keep),
        labels=np.array([remap[int(labels[i])] for i in keep], dtype=np.int64),
        class_names=tuple(str(c) for c in classes),
        metadata={"source": str(images_path)},
    )


# ---------------------------------------------------------------------------
# PGM / PNG
# ---------------------------------------------------------------------------


def _pgm_tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    tokens: list[bytes] = []
    pos = 0
    n = len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos : pos + 1] == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("PGM header truncated")
        tokens.append(buf[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_pgm(path: str | Path) -> np.ndarray:
    buf = Path(path).read_bytes()
    tokens, offset = _pgm_tokens(buf, 4)
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PGM header") from exc
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise FormatError(f"{path}: invalid PGM dimensions or maxval")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * dtype.itemsize
    raster = buf[offset : offset + need]
    if len(raster) != need:
        raise FormatError(f"{path}: PGM raster truncated")
    return np.frombuffer(raster, dtype=dtype).reshape(height, width) / float(maxval)


def write_pgm(img: np.ndarray, path: str | Path) -> None:
    q = quantize(img)
    h, w = q.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(q.tobytes())


def quantize(img: np.ndarray) -> np.ndarray:
    """Map ``[0, 1]`` gray values to ``uint8`` with ``round(v * 255)``."""
    img = check_image(img)
    return np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def to_gray(arr: np.ndarray) -> np.ndarray:
    """Collapse an (H, W[, C]) array to luminance; alpha channels are dropped."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] in (1, 2):
        return arr[..., 0]
    if arr.ndim == 3 and arr.shape[2] in (3, 4):
        return arr[..., :3] @ _LUMA
    raise FormatError(f"unsupported pixel layout {arr.shape}")


def load_image(path: str | Path) -> np.ndarray:
    """Load a PGM or PNG file as a gray image in ``[0, 1]``."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        return read_pgm(path)
    if suffix == ".png":
        from PIL import Image as PILImage

        try:
            with PILImage.open(path) as im:
                im.load()
                if im.mode in ("I;16", "I;16B", "I"):
                    arr = np.asarray(im, dtype=np.float64) / 65535.0
                else:
                    if im.mode not in ("L", "LA", "RGB", "RGBA"):
                        im = im.convert("RGBA" if "A" in im.getbands() else "RGB")
                    arr = np.asarray(im, dtype=np.float64) / 255.0
        except (OSError, SyntaxError, ValueError) as exc:
            raise FormatError(f"{path}: cannot decode PNG ({exc})") from exc
        return np.clip(to_gray(arr), 0.0, 1.0)
    raise ParameterError(f"unsupported image format {path.suffix!r}")


def save_image(img: np.ndarray, path: str | Path) -> None:
    """Write an image as PNG or PGM, quantized with ``round(v * 255)``."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        write_pgm(img, path)
    elif suffix == ".png":
        from PIL import Image as PILImage

        PILImage.fromarray(quantize(img), mode="L").save(path)
    else:
        raise ParameterError(f"unsupported image format {path.suffix!r}")


def load_image_dir(root: str | Path) -> LabeledSet:
    """Load a ``root/<class>/<image>`` tree.

    Classes and files are ordered lexicographically. Files that fail to decode
    are skipped and counted in ``metadata["warnings"]``.
    """
    root = Path(root)
    if not root.is_dir():
        raise InputError(f"dataset root {root} does not exist")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    images: list[np.ndarray] = []
    labels: list[int] = []
    names: list[str] = []
    skipped: list[str] = []
    for cdir in class_dirs:
        files = sorted(
            p for p in cdir.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
        )
        loaded = []
        for f in files:
            try:
                loaded.append(load_image(f))
            except (FormatError, ParameterError) as exc:
                log.warning("skipping %s: %s", f, exc)
                skipped.append(str(f))
        if loaded:
            images.extend(loaded)
            labels.extend([len(names)] * len(loaded))
            names.append(cdir.name)
    if not images:
        raise InputError(f"no usable images under {root}")
    return LabeledSet(
        images=tuple(images),
        labels=np.array(labels, dtype=np.int64),
        class_names=tuple(names),
        metadata={"source": str(root), "warnings": len(skipped), "skipped": skipped},
    )


def preprocess_leaves(img: np.ndarray) -> np.ndarray:
    """Rescale to the full range, invert, and zero everything below the mean.

    Turns a dark leaf on an uneven bright background into a bright leaf on a
    uniformly zero background. A constant image maps to all zeros.
    """
    img = check_image(img)
    lo, hi = img.min(), img.max()
    if hi <= lo:
        return np.zeros_like(img)
    out = 1.0 - (img - lo) / (hi - lo)
    out[out < out.mean()] = 0.0
    return out


def class_balanced_split(
    labels: Sequence[int], n_train: int, n_test: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Draw disjoint per-class train/test index sets with a seeded RNG."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if idx.size < n_train + n_test:
            raise InputError(
                f"class {c} has {idx.size} images, need {n_train + n_test}"
            )
        perm = rng.permutation(idx)
        train.append(np.sort(perm[:n_train]))
        test.append(np.sort(perm[n_train : n_train + n_test]))
    return np.concatenate(train), np.concatenate(test)
