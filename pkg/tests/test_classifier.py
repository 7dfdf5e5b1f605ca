import numpy as np
import pytest

from lfmd.classifier import (
    LinearModel,
    augment,
    dual_cd_binary,
    evaluate,
    load_model,
    predict,
    primal_objective,
    save_model,
    train,
)
from lfmd.errors import FormatError, ParameterError


def _toy(rng, n=50, d=5):
    X = rng.standard_normal((n, d))
    y = np.where(X[:, 0] + 0.5 * X[:, 1] + 0.3 * rng.standard_normal(n) > 0, 1.0, -1.0)
    return X, y


def _subgradient_primal(X, y, C, iters=100_000):
    # independent oracle: normalized subgradient descent on the primal, best iterate
    w = np.zeros(X.shape[1])
    best = np.inf
    for t in range(1, iters + 1):
        active = 1 - y * (X @ w) > 0
        g = w - C * (y[active, None] * X[active]).sum(0)
        w = w - 0.5 / np.sqrt(t) * g / max(1.0, np.linalg.norm(g))
        best = min(best, primal_objective(w, X, y, C))
    return best


def test_separable_two_class():
    X = np.array([[1.0, 0, 0, 0], [-1.0, 0, 0, 0]] * 3)
    y = np.array([0, 1] * 3)
    model = train(X, y, C=1.0)
    acc, _ = evaluate(model, X, y)
    assert acc == 1.0
    scores = model.decision_function(X)
    assert np.all(np.sign(scores[:, 0]) == np.where(y == 0, 1, -1))


def test_conflicting_duplicates_converge():
    X = np.array([[1.0, 2.0], [1.0, 2.0], [-1.0, 0.5]])
    y = np.array([1.0, -1.0, 1.0])
    fit = dual_cd_binary(augment(X), y, C=1.0, tol=1e-8, max_epochs=5000)
    assert fit.violation < 1e-8
    margins = y * (augment(X) @ fit.w)
    assert min(margins[0], margins[1]) < 1.0


def test_matches_primal_oracle(rng):
    X, y = _toy(rng)
    Xa = augment(X)
    fit = dual_cd_binary(Xa, y, C=1.0, tol=1e-6, max_epochs=10_000)
    ours = primal_objective(fit.w, Xa, y, 1.0)
    oracle = _subgradient_primal(Xa, y, 1.0)
    assert abs(ours - oracle) <= 1e-3 * oracle


def test_dual_feasible_and_monotone(rng):
    X, y = _toy(rng, 80, 6)
    fit = dual_cd_binary(augment(X), y, C=0.7, tol=1e-5)
    assert np.all(fit.alpha >= 0) and np.all(fit.alpha <= 0.7)
    obj = np.array(fit.dual_objective)
    assert np.all(np.diff(obj) >= -1e-10)
    # weak duality
    assert obj[-1] <= primal_objective(fit.w, augment(X), y, 0.7) + 1e-9


def test_deterministic(rng):
    X = rng.standard_normal((60, 8))
    y = rng.integers(0, 3, 60)
    a, b = train(X, y, seed=4), train(X, y, seed=4)
    np.testing.assert_array_equal(a.weights, b.weights)
    np.testing.assert_array_equal(a.biases, b.biases)


def test_single_class_rejected(rng):
    with pytest.raises(ParameterError):
        train(rng.random((5, 3)), [1] * 5)


def test_ragged_input_rejected():
    with pytest.raises(ParameterError):
        train([np.zeros(3), np.zeros(4)], [0, 1])


def test_predict_rules():
    w = np.zeros((3, 4))
    w[2, 1] = 5.0
    model = LinearModel(w, np.zeros(3), ("a", "b", "c"))
    assert predict(model, np.array([0.1, 0.9, 0.0, 0.2])) == 2
    zero = LinearModel(np.zeros((3, 4)), np.zeros(3), ("a", "b", "c"))
    assert predict(zero, np.ones(4)) == 0
    x = np.array([0.3, -0.2, 0.5, 0.1])
    rng = np.random.default_rng(0)
    free = LinearModel(rng.standard_normal((3, 4)), np.zeros(3), ("a", "b", "c"))
    assert predict(free, 7.5 * x) == predict(free, x)
    with pytest.raises(ParameterError):
        predict(model, np.ones(5))


def test_evaluate(rng):
    X = np.eye(3)
    model = LinearModel(np.eye(3), np.zeros(3), ("a", "b", "c"))
    acc, conf = evaluate(model, X, [0, 1, 2])
    assert acc == 1.0
    acc, conf = evaluate(model, np.vstack([X, X[:1]]), [0, 1, 2, 1])
    assert acc == 0.75
    np.testing.assert_array_equal(conf.sum(1), [1, 2, 1])
    with pytest.raises(ParameterError):
        evaluate(model, np.zeros((0, 3)), [])


def test_model_round_trip(tmp_path, rng):
    X = rng.standard_normal((30, 5))
    model = train(X, rng.integers(0, 3, 30), class_names=["x", "y", "z"])
    save_model(model, tmp_path / "m.lfmm")
    back = load_model(tmp_path / "m.lfmm")
    np.testing.assert_array_equal(back.weights, model.weights)
    np.testing.assert_array_equal(back.biases, model.biases)
    assert back.class_names == ("x", "y", "z") and back.C == 1.0
    (tmp_path / "bad").write_bytes(b"nope")
    with pytest.raises(FormatError):
        load_model(tmp_path / "bad")
