"""End-to-end experiment: features, codebook, VLAD, SVM, evaluation per variant."""

from __future__ import annotations

import contextlib
import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import classifier, encoder
from .config import ExperimentConfig
from .convolution import convolve_bank
from .descriptor import (
    DescriptorField,
    extract_field_relative,
    foreground_mask,
    restrict,
    sample_descriptors,
)
from .errors import ConfigError, InputError, LFMDError
from .filterbank import FilterBank, make_bank, save_bank
from .geometry import augment_set
from .imageio import LabeledSet, class_balanced_split, load_idx, load_image_dir, preprocess_leaves

log = logging.getLogger(__name__)


@contextlib.contextmanager
def stage(name: str):
    """Prefix library errors raised inside the block with the stage name."""
    try:
        yield
    except LFMDError as exc:
        if str(exc).startswith("["):
            raise
        raise type(exc)(f"[{name}] {exc}") from exc


def load_dataset(cfg: ExperimentConfig) -> LabeledSet:
    ds = cfg["dataset"]
    if ds["kind"] == "idx":
        data = load_idx(ds["images"], ds["labels"], ds["digit_filter"])
    else:
        data = load_image_dir(ds["root"])
    if ds["preprocess"] == "leaves":
        data = LabeledSet(
            tuple(preprocess_leaves(im) for im in data.images),
            data.labels,
            data.class_names,
            data.metadata,
        )
    return data


def split(data: LabeledSet, n_train: int, n_test: int | None, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Class-balanced split; ``n_test=None`` puts every remaining image in the test set."""
    if n_test is not None:
        return class_balanced_split(data.labels, n_train, n_test, seed)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in range(data.n_classes):
        idx = np.flatnonzero(data.labels == c)
        if idx.size <= n_train:
            raise InputError(f"class {data.class_names[c]} has {idx.size} images, need > {n_train}")
        perm = rng.permutation(idx)
        train.append(np.sort(perm[:n_train]))
        test.append(np.sort(perm[n_train:]))
    return np.concatenate(train), np.concatenate(test)


def image_field(
    img: np.ndarray, bank: FilterBank, tau_rel: float, foreground_rel: float | None = None
) -> DescriptorField:
    field = extract_field_relative(convolve_bank(img, bank, "fft"), tau_rel)
    if foreground_rel is not None:
        field = restrict(field, foreground_mask(img, foreground_rel))
    return field


def _map(fn: Callable, items: Iterable, threads: int) -> list:
    items = list(items)
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, items))


def fit_codebook(images, bank: FilterBank, cfg: ExperimentConfig, seed: int) -> encoder.Codebook:
    stride, tau, fg = cfg["stride_codebook"], cfg["tau_rel"], cfg["foreground_rel"]
    chunks = _map(lambda im: sample_descriptors(image_field(im, bank, tau, fg), stride), images, cfg["threads"])
    descs = np.concatenate(chunks)
    log.info("codebook: %d descriptors from %d images", descs.shape[0], len(chunks))
    return encoder.kmeans_fit(descs, cfg["k"], seed=seed, max_iter=cfg["kmeans_max_iter"])


def encode_images(images, bank: FilterBank, codebook: encoder.Codebook, cfg: ExperimentConfig) -> np.ndarray:
    stride, tau, fg, beta = cfg["stride_encode"], cfg["tau_rel"], cfg["foreground_rel"], cfg["beta"]

    def one(im):
        return encoder.encode_vlad(sample_descriptors(image_field(im, bank, tau, fg), stride), codebook, beta)

    return np.stack(_map(one, images, cfg["threads"]))


@dataclass
class RepeatResult:
    seeds: dict
    accuracy: dict[str, float]
    confusion: dict[str, np.ndarray]
    codebook_inertia: float
    svm_epochs: list[int]
    n_train: int
    n_test: int
    timings: dict[str, float] = field(default_factory=dict)


def run_repeat(data: LabeledSet, bank: FilterBank, cfg: ExperimentConfig, repeat: int) -> RepeatResult:
    seeds = cfg.seeds(repeat)
    ds = cfg["dataset"]
    timings = {}
    with stage("split"):
        tr, te = split(data, ds["train_per_class"], ds["test_per_class"], seeds["split"])
        train_set, test_set = data.subset(tr), data.subset(te)
    t0 = time.perf_counter()
    with stage("augment"):
        train_imgs = augment_set(train_set, cfg.augment_spec("original", seeds["augment"])).images
    with stage("codebook"):
        n_cb = min(cfg["codebook_images"], len(train_imgs))
        codebook = fit_codebook(train_imgs[:n_cb], bank, cfg, seeds["kmeans"])
    timings["codebook"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    with stage("encode"):
        X_train = encode_images(train_imgs, bank, codebook, cfg)
    with stage("train"):
        model = classifier.train(
            X_train, train_set.labels, C=cfg["C"], seed=seeds["svm"], tol=cfg["svm_tol"],
            max_epochs=cfg["svm_max_epochs"], class_names=data.class_names,
        )
    timings["train"] = time.perf_counter() - t0
    accuracy, confusion = {}, {}
    for variant in cfg["augment"]["variants"]:
        t0 = time.perf_counter()
        with stage(f"evaluate:{variant}"):
            test_imgs = augment_set(test_set, cfg.augment_spec(variant, seeds["augment"] + 7)).images
            X_test = encode_images(test_imgs, bank, codebook, cfg)
            accuracy[variant], confusion[variant] = classifier.evaluate(model, X_test, test_set.labels)
        timings[variant] = time.perf_counter() - t0
        log.info("repeat %d %s accuracy %.4f", repeat, variant, accuracy[variant])
    return RepeatResult(
        seeds, accuracy, confusion, codebook.inertia, list(model.info["epochs"]),
        len(train_set), len(test_set), timings,
    )


def summarize(cfg: ExperimentConfig, data: LabeledSet, results: list[RepeatResult]) -> dict:
    """Deterministic metrics record: no timings, no wall-clock stamps."""
    variants = cfg["augment"]["variants"]
    mean = {v: float(np.mean([r.accuracy[v] for r in results])) for v in variants}
    std = {v: float(np.std([r.accuracy[v] for r in results])) for v in variants}
    fp = cfg.filter_params
    return {
        "config_hash": cfg.hash,
        "config": cfg.identity,
        "dataset": {
            "classes": list(data.class_names),
            "n_images": len(data),
            "n_train": results[0].n_train,
            "n_test": results[0].n_test,
            "skipped": data.metadata.get("warnings", 0),
        },
        "dims": {"descriptor": fp.n_channels, "vlad": fp.n_channels * cfg["k"]},
        "accuracy": mean,
        "accuracy_std": std,
        "error_pct": {v: 100.0 * (1.0 - a) for v, a in mean.items()},
        "repeats": [
            {
                "seeds": r.seeds,
                "accuracy": r.accuracy,
                "codebook_inertia": r.codebook_inertia,
                "svm_epochs": r.svm_epochs,
            }
            for r in results
        ],
    }


def write_confusion_csv(path: Path, cfg: ExperimentConfig, names, results: list[RepeatResult]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={cfg.hash}\n")
        w = csv.writer(fh)
        w.writerow(["repeat", "variant", "true_class", *names])
        for i, r in enumerate(results):
            for variant, conf in r.confusion.items():
                for c, row in enumerate(conf):
                    w.writerow([i, variant, names[c], *row.tolist()])


def write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def run_experiment(cfg: ExperimentConfig, *, figures: bool = True) -> dict:
    """Run every repeat, write metrics/confusion/figures under ``cfg.output_dir``."""
    out = cfg.output_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output_dir: cannot create {out}: {exc}") from exc
    with stage("load"):
        data = load_dataset(cfg)
    log.info("loaded %d images in %d classes", len(data), data.n_classes)
    with stage("filters"):
        bank = make_bank(cfg.filter_params)
        save_bank(bank, out / "bank.lfmb")
    results = [run_repeat(data, bank, cfg, r) for r in range(cfg["repeats"])]
    metrics = summarize(cfg, data, results)
    write_json(out / "metrics.json", metrics)
    write_confusion_csv(out / "confusion.csv", cfg, data.class_names, results)
    write_json(
        out / "timing.json",
        {"config_hash": cfg.hash, "repeats": [r.timings for r in results]},
    )
    if figures:
        from . import plotting

        plotting.accuracy_bars(metrics, out / "accuracy.png", cfg.hash)
        plotting.confusion_grid(
            {v: sum(r.confusion[v] for r in results) for v in cfg["augment"]["variants"]},
            data.class_names, out / "confusion.png", cfg.hash,
        )
    return metrics
