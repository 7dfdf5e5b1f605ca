"""One-vs-rest linear SVM trained by dual coordinate descent.

Each binary problem minimizes ``0.5 * |w|^2 + C * sum(max(0, 1 - y_i w.x_i))``
over inputs augmented with a constant feature 1, so the bias is part of ``w``
and regularized with it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FormatError, ParameterError

MODEL_MAGIC = b"LFMM1"


@dataclass(frozen=True, eq=False)
class LinearModel:
    weights: np.ndarray  # (n_classes, dim)
    biases: np.ndarray  # (n_classes,)
    class_names: tuple[str, ...]
    C: float = 1.0
    tol: float = 1e-4
    info: dict = field(default_factory=dict, compare=False)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise ParameterError(f"input dim {X.shape[1]} != model dim {self.dim}")
        return X @ self.weights.T + self.biases[None, :]


@dataclass
class BinaryFit:
    w: np.ndarray
    alpha: np.ndarray
    epochs: int
    violation: float
    dual_objective: list[float]


def dual_cd_binary(
    X: np.ndarray,
    y: np.ndarray,
    C: float = 1.0,
    tol: float = 1e-4,
    max_epochs: int = 1000,
    rng: np.random.Generator | None = None,
) -> BinaryFit:
    """L1-loss linear SVM (no bias) by dual coordinate descent.

    ``y`` holds +1/-1. Each epoch visits coordinates in a fresh random order;
    iteration stops when the largest projected-gradient magnitude in an epoch
    falls below ``tol``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    n, d = X.shape
    q = np.einsum("ij,ij->i", X, X)
    alpha = np.zeros(n)
    w = np.zeros(d)
    objective = []
    violation = np.inf
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        violation = 0.0
        for i in rng.permutation(n):
            if q[i] <= 0:
                continue
            xi = X[i]
            g = y[i] * (w @ xi) - 1.0
            a = alpha[i]
            if a <= 0.0:
                pg = min(g, 0.0)
            elif a >= C:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg == 0.0:
                continue
            violation = max(violation, abs(pg))
            a_new = min(max(a - g / q[i], 0.0), C)
            if a_new != a:
                w += (a_new - a) * y[i] * xi
                alpha[i] = a_new
        objective.append(float(alpha.sum() - 0.5 * (w @ w)))
        if violation < tol:
            break
    return BinaryFit(w, alpha, epoch, float(violation), objective)


def primal_objective(w: np.ndarray, X: np.ndarray, y: np.ndarray, C: float) -> float:
    margins = 1.0 - y * (X @ w)
    return float(0.5 * (w @ w) + C * np.maximum(margins, 0.0).sum())


def augment(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.hstack([X, np.ones((X.shape[0], 1))])


def train(
    X: np.ndarray | Sequence[np.ndarray],
    y: Sequence[int],
    C: float = 1.0,
    seed: int = 0,
    tol: float = 1e-4,
    max_epochs: int = 1000,
    class_names: Sequence[str] | None = None,
) -> LinearModel:
    """Fit one binary SVM per class (class vs rest)."""
    try:
        X = np.asarray(X, dtype=np.float64)
    except ValueError as exc:
        raise ParameterError("all input vectors must share one dimension") from exc
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ParameterError("X must be (n_samples, dim) with one label per row")
    if not np.all(np.isfinite(X)):
        raise ParameterError("inputs must be finite")
    n_classes = int(y.max()) + 1 if class_names is None else len(class_names)
    if np.unique(y).size < 2:
        raise ParameterError("need at least two classes")
    names = tuple(class_names) if class_names is not None else tuple(str(c) for c in range(n_classes))
    Xa = augment(X)
    weights = np.zeros((n_classes, X.shape[1]))
    biases = np.zeros(n_classes)
    info = {"epochs": [], "violation": [], "dual_objective": []}
    for c in range(n_classes):
        yc = np.where(y == c, 1.0, -1.0)
        fit = dual_cd_binary(Xa, yc, C, tol, max_epochs, np.random.default_rng([seed, c]))
        weights[c] = fit.w[:-1]
        biases[c] = fit.w[-1]
        info["epochs"].append(fit.epochs)
        info["violation"].append(fit.violation)
        info["dual_objective"].append(fit.dual_objective)
    return LinearModel(weights, biases, names, float(C), float(tol), info)


def predict(model: LinearModel, X: np.ndarray) -> np.ndarray | int:
    """Arg-max class per row; a single vector returns a single index."""
    single = np.ndim(X) == 1
    labels = model.decision_function(X).argmax(axis=1)
    return int(labels[0]) if single else labels


def evaluate(model: LinearModel, X: np.ndarray, y: Sequence[int]) -> tuple[float, np.ndarray]:
    """Accuracy and a confusion matrix with rows = true class, cols = predicted."""
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise ParameterError("empty test set")
    pred = predict(model, np.atleast_2d(X))
    k = len(model.class_names)
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (y, pred), 1)
    return float((pred == y).mean()), confusion


def save_model(model: LinearModel, path: str | Path) -> None:
    header = {
        "classes": list(model.class_names),
        "dim": model.dim,
        "C": model.C,
        "tol": model.tol,
    }
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(np.ascontiguousarray(model.weights, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.biases, dtype="<f8").tobytes())


def load_model(path: str | Path) -> LinearModel:
    with open(path, "rb") as fh:
        if fh.read(len(MODEL_MAGIC)) != MODEL_MAGIC:
            raise FormatError(f"{path}: not a model file")
        try:
            header = json.loads(fh.readline())
            names, dim = tuple(header["classes"]), int(header["dim"])
        except (ValueError, KeyError, TypeError) as exc:
            raise FormatError(f"{path}: bad model header") from exc
        payload = fh.read()
    k = len(names)
    if len(payload) != 8 * k * (dim + 1):
        raise FormatError(f"{path}: model payload truncated")
    flat = np.frombuffer(payload, "<f8")
    return LinearModel(
        flat[: k * dim].reshape(k, dim).copy(),
        flat[k * dim :].copy(),
        names,
        float(header["C"]),
        float(header["tol"]),
    )
