"""k-means codebooks and VLAD encoding of descriptor sets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .descriptor import DescriptorField
from .errors import FormatError, ParameterError

CODEBOOK_MAGIC = b"LFMC1"
DEFAULT_K = 64
DEFAULT_BETA = 0.5

_CHUNK = 32768


@dataclass(frozen=True, eq=False)
class Codebook:
    centers: np.ndarray
    rng_seed: int = 0
    inertia: float = float("nan")
    history: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        c = np.array(self.centers, dtype=np.float64, copy=True)
        if c.ndim != 2 or c.shape[0] < 1:
            raise ParameterError("codebook needs a (K, dim) array with K >= 1")
        if not np.all(np.isfinite(c)):
            raise ParameterError("codebook centers must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


def _sq_dists(x: np.ndarray, centers: np.ndarray, c_sq: np.ndarray) -> np.ndarray:
    d = (x * x).sum(axis=1)[:, None] - 2.0 * (x @ centers.T) + c_sq[None, :]
    np.maximum(d, 0.0, out=d)
    return d


def assign(x: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest center per row (lowest index on ties) and the squared distance."""
    x = np.asarray(x, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    c_sq = (centers * centers).sum(axis=1)
    labels = np.empty(x.shape[0], dtype=np.int64)
    for start in range(0, x.shape[0], _CHUNK):
        d = _sq_dists(x[start : start + _CHUNK], centers, c_sq)
        labels[start : start + _CHUNK] = d.argmin(axis=1)
    diff = x - centers[labels]
    return labels, np.einsum("ij,ij->i", diff, diff)


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    idx = [int(rng.integers(n))]
    closest = ((x - x[idx[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            raise ParameterError(f"fewer than {k} distinct descriptors")
        nxt = int(rng.choice(n, p=closest / total))
        idx.append(nxt)
        closest = np.minimum(closest, ((x - x[nxt]) ** 2).sum(axis=1))
    return x[idx].copy()


def kmeans_fit(
    descriptors: np.ndarray,
    k: int = DEFAULT_K,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> Codebook:
    """Lloyd's algorithm from a k-means++ start.

    Stops once no center moves more than ``tol`` or after ``max_iter``
    iterations. A cluster that empties is re-seeded with the point farthest
    from its current center. ``Codebook.history`` records the objective after
    every assignment step; it never increases.
    """
    x = np.asarray(descriptors, dtype=np.float64)
    if x.ndim != 2:
        raise ParameterError("descriptors must be a 2-D array")
    if k < 1 or x.shape[0] < k:
        raise ParameterError(f"need at least K={k} descriptors, got {x.shape[0]}")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(x, k, rng)
    history = []
    for _ in range(max_iter):
        labels, d2 = assign(x, centers)
        history.append(float(d2.sum()))
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, x)
        new = centers.copy()
        filled = counts > 0
        new[filled] = sums[filled] / counts[filled, None]
        taken: set[int] = set()
        for c in np.flatnonzero(~filled):
            order = np.argsort(-d2, kind="stable")
            far = next(int(i) for i in order if int(i) not in taken)
            taken.add(far)
            new[c] = x[far]
            d2[far] = 0.0
        shift = float(np.sqrt(((new - centers) ** 2).sum(axis=1)).max())
        centers = new
        if shift < tol:
            break
    labels, d2 = assign(x, centers)
    history.append(float(d2.sum()))
    return Codebook(centers, rng_seed=seed, inertia=history[-1], history=tuple(history))


def power_normalize(v: np.ndarray, beta: float = DEFAULT_BETA) -> np.ndarray:
    """``sign(v) * |v|**beta`` followed by L2 normalization; zero stays zero."""
    v = np.sign(v) * np.abs(v) ** beta
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


def vlad_residuals(descriptors: np.ndarray, codebook: Codebook) -> np.ndarray:
    """Per-center sums of ``x - c_k`` over descriptors nearest to ``c_k``."""
    x = np.asarray(descriptors, dtype=np.float64).reshape(-1, np.shape(descriptors)[-1])
    if x.shape[1] != codebook.dim:
        raise ParameterError(
            f"descriptor dim {x.shape[1]} does not match codebook dim {codebook.dim}"
        )
    v = np.zeros_like(codebook.centers)
    if x.shape[0]:
        labels, _ = assign(x, codebook.centers)
        np.add.at(v, labels, x - codebook.centers[labels])
    return v


def encode_vlad(
    descriptors: DescriptorField | np.ndarray,
    codebook: Codebook,
    beta: float = DEFAULT_BETA,
) -> np.ndarray:
    """VLAD vector of length ``K * dim`` with power-law and L2 normalization.

    A :class:`DescriptorField` contributes only its unmasked pixels.
    """
    if isinstance(descriptors, DescriptorField):
        descriptors = descriptors.kept()
    return power_normalize(vlad_residuals(descriptors, codebook).ravel(), beta)


def save_codebook(cb: Codebook, path: str | Path) -> None:
    header = {"K": cb.k, "dim": cb.dim, "seed": int(cb.rng_seed), "inertia": cb.inertia}
    with open(path, "wb") as fh:
        fh.write(CODEBOOK_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(cb.centers.astype("<f8").tobytes())


def load_codebook(path: str | Path) -> Codebook:
    with open(path, "rb") as fh:
        magic = fh.read(len(CODEBOOK_MAGIC))
        if magic != CODEBOOK_MAGIC:
            raise FormatError(f"{path}: not a codebook file (magic {magic!r})")
        try:
            header = json.loads(fh.readline())
            k, dim = int(header["K"]), int(header["dim"])
        except (ValueError, KeyError, TypeError) as exc:
            raise FormatError(f"{path}: bad codebook header") from exc
        payload = fh.read()
    if len(payload) != 8 * k * dim:
        raise FormatError(f"{path}: codebook payload truncated")
    centers = np.frombuffer(payload, "<f8").reshape(k, dim)
    return Codebook(centers, rng_seed=int(header["seed"]), inertia=float(header["inertia"]))
