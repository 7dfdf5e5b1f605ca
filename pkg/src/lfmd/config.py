"""Experiment configuration: a JSON file plus command-line overrides."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import ConfigError, LFMDError
from .filterbank import FilterParams
from .geometry import AUGMENT_MODES, AugmentSpec

DEFAULTS: dict[str, Any] = {
    "dataset": {
        "kind": "idx",
        "images": None,
        "labels": None,
        "root": None,
        "digit_filter": list(range(9)),
        "preprocess": "none",
        "train_per_class": 100,
        "test_per_class": 100,
    },
    "augment": {
        "resize_to": 48,
        "pad_to": 96,
        "scale_range": [0.5, 1.5],
        "variants": list(AUGMENT_MODES),
    },
    "filters": FilterParams(kernel_size=95, circular=True).to_dict(),
    "tau_rel": 1e-3,
    "foreground_rel": 0.05,
    "k": 64,
    "beta": 0.5,
    "C": 1.0,
    "svm_tol": 1e-4,
    "svm_max_epochs": 1000,
    "kmeans_max_iter": 100,
    "stride_codebook": 4,
    "stride_encode": 1,
    "codebook_images": 1000,
    "seed": 0,
    "repeats": 1,
    "threads": 1,
    "output_dir": "runs/default",
    "reconstruct": {
        "image": None,
        "crop": None,
        "alphas": [-1.0, -2.0, -3.0],
        "seeds": [0, 1],
        "kernel_size": 33,
        "iters": 5000,
        "snapshot_every": 0,
    },
    "invariance": {
        "image": None,
        "patches": 10,
        "patch_size": 65,
        "kernel_size": 33,
        "angles": 36,
        "scales": [0.5, 0.63, 0.8, 0.9, 1.0, 1.1, 1.25, 1.6, 2.0],
        "alphas": [0.0, -1.0, -2.0, -3.0],
    },
}

# settings that cannot change any result; left out of the hash and the metrics record
_NON_SUBSTANTIVE = ("output_dir", "threads")

_DATASET_KINDS = ("idx", "imagedir")
_PREPROCESS = ("none", "leaves")


def _merge(base: dict, override: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if key not in base:
            raise ConfigError(f"unknown config field {where}{key!r}")
        if isinstance(base[key], dict) and key != "filters":
            if not isinstance(val, dict):
                raise ConfigError(f"config field {where}{key} must be an object")
            out[key] = _merge(base[key], val, f"{where}{key}.")
        elif key == "filters":
            if not isinstance(val, dict):
                raise ConfigError("config field filters must be an object")
            unknown = set(val) - set(base[key])
            if unknown:
                raise ConfigError(f"unknown filters field(s) {sorted(unknown)}")
            out[key].update(val)
        else:
            out[key] = val
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved configuration; ``raw`` is the canonical JSON-compatible dict."""

    raw: dict

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def identity(self) -> dict:
        """The settings that determine results."""
        return {k: v for k, v in self.raw.items() if k not in _NON_SUBSTANTIVE}

    @property
    def hash(self) -> str:
        return config_hash(self.identity)

    @property
    def filter_params(self) -> FilterParams:
        f = self.raw["filters"]
        try:
            return FilterParams(
                radial_freqs=tuple(f["radial_freqs"]),
                angular_freqs=tuple(f["angular_freqs"]),
                alpha=f["alpha"],
                sigma=f["sigma"],
                kernel_size=f["kernel_size"],
                hole_enabled=bool(f["hole_enabled"]),
                circular=bool(f["circular"]),
            )
        except (LFMDError, TypeError, ValueError) as exc:
            raise ConfigError(f"filters: {exc}") from exc

    def augment_spec(self, mode: str, seed: int) -> AugmentSpec:
        a = self.raw["augment"]
        try:
            return AugmentSpec(mode, tuple(a["scale_range"]), a["resize_to"], a["pad_to"], seed)
        except (LFMDError, TypeError, ValueError) as exc:
            raise ConfigError(f"augment: {exc}") from exc

    @property
    def output_dir(self) -> Path:
        return Path(self.raw["output_dir"])

    def seeds(self, repeat: int = 0) -> dict[str, int]:
        """Per-stage seeds derived from the master seed and repeat index."""
        base = int(self.raw["seed"]) + 1000 * repeat
        return {"split": base, "augment": base + 1, "kmeans": base + 2, "svm": base + 3}


def config_hash(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _check_number(raw: dict, key: str, kind=float, positive=True, minimum=None):
    val = raw[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or (kind is int and int(val) != val):
        raise ConfigError(f"config field {key} must be {'an integer' if kind is int else 'a number'}")
    if positive and not val > 0:
        raise ConfigError(f"config field {key} must be positive")
    if minimum is not None and val < minimum:
        raise ConfigError(f"config field {key} must be >= {minimum}")


def validate(raw: dict, *, require_paths: bool = True) -> ExperimentConfig:
    cfg = ExperimentConfig(raw)
    cfg.filter_params  # raises ConfigError on bad filter settings
    for key in ("k", "stride_codebook", "stride_encode", "codebook_images", "repeats", "threads",
                "svm_max_epochs", "kmeans_max_iter"):
        _check_number(raw, key, int)
    for key in ("beta", "C", "svm_tol"):
        _check_number(raw, key)
    _check_number(raw, "tau_rel", positive=False, minimum=0)
    if raw["foreground_rel"] is not None:
        _check_number(raw, "foreground_rel", positive=False, minimum=0)
    _check_number(raw, "seed", int, positive=False, minimum=0)
    ds = raw["dataset"]
    if ds["kind"] not in _DATASET_KINDS:
        raise ConfigError(f"dataset.kind must be one of {_DATASET_KINDS}")
    if ds["preprocess"] not in _PREPROCESS:
        raise ConfigError(f"dataset.preprocess must be one of {_PREPROCESS}")
    for key in ("train_per_class",):
        _check_number(ds, key, int)
    if ds["test_per_class"] is not None:
        _check_number(ds, "test_per_class", int)
    for v in raw["augment"]["variants"]:
        if v not in AUGMENT_MODES:
            raise ConfigError(f"augment.variants: unknown variant {v!r}")
    cfg.augment_spec("original", 0)
    if require_paths:
        fields = ("images", "labels") if ds["kind"] == "idx" else ("root",)
        for f in fields:
            if not ds[f]:
                raise ConfigError(f"dataset.{f} is required for kind {ds['kind']!r}")
            if not Path(ds[f]).exists():
                raise ConfigError(f"dataset.{f}: path {ds[f]} does not exist")
    return cfg


def load_config(path: str | Path | None, overrides: dict | None = None,
                *, require_paths: bool = True) -> ExperimentConfig:
    """Merge a JSON config file and ``overrides`` over :data:`DEFAULTS`."""
    raw = copy.deepcopy(DEFAULTS)
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} does not exist")
        try:
            user = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config file must hold a JSON object")
        raw = _merge(raw, user)
    if overrides:
        raw = _merge(raw, overrides)
    return validate(raw, require_paths=require_paths)
