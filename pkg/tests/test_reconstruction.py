import numpy as np
import pytest

from conftest import smooth_image
from lfmd.errors import ParameterError
from lfmd.filterbank import FilterParams, make_bank
from lfmd.reconstruction import (
    abs_correlation,
    make_problem,
    recon_error,
    recon_grad,
    recon_value_and_grad,
    reconstruct,
    reconstruction_bank,
    write_trace_csv,
)


@pytest.fixture(scope="module")
def problem():
    rng = np.random.default_rng(7)
    return make_problem(smooth_image(rng, 16, sigma=1.5), reconstruction_bank(-2.0, kernel_size=9))


def _source(problem):
    rng = np.random.default_rng(7)
    return smooth_image(rng, 16, sigma=1.5)


def test_hole_rejected():
    with pytest.raises(ParameterError):
        make_problem(np.zeros((8, 8)), make_bank(FilterParams(kernel_size=5)))


def test_error_zero_at_source_sign_and_gain(problem):
    img = _source(problem)
    assert recon_error(img, problem) == 0.0
    assert recon_error(-img, problem) <= 1e-28
    assert recon_error(3.5 * img, problem) <= 1e-28
    assert recon_error(-0.2 * img, problem) <= 1e-28


def test_gradient_vanishes_at_source(problem):
    assert np.abs(recon_grad(_source(problem), problem)).max() <= 1e-10


def test_gradient_matches_finite_differences(problem):
    rng = np.random.default_rng(1)
    x = rng.random((16, 16))
    grad = recon_grad(x, problem)
    h = 1e-5
    for _ in range(50):
        i, j = rng.integers(16, size=2)
        xp, xm = x.copy(), x.copy()
        xp[i, j] += h
        xm[i, j] -= h
        fd = (recon_error(xp, problem) - recon_error(xm, problem)) / (2 * h)
        assert abs(fd - grad[i, j]) <= 1e-4 * max(abs(fd), 1e-8)


def test_gradient_orthogonal_to_estimate(problem):
    x = np.random.default_rng(2).random((16, 16))
    grad = recon_grad(x, problem)
    # E(c x) is constant in c, so the directional derivative along x is zero
    assert abs(np.sum(grad * x)) <= 1e-8 * np.linalg.norm(grad) * np.linalg.norm(x)
    h = 1e-6
    directional = (recon_error((1 + h) * x, problem) - recon_error((1 - h) * x, problem)) / (2 * h)
    assert abs(directional) <= 1e-8


def test_shape_mismatch(problem):
    with pytest.raises(ParameterError):
        recon_error(np.zeros((8, 8)), problem)
    with pytest.raises(ParameterError):
        recon_value_and_grad(np.zeros((16, 15)), problem)


def test_descent_is_monotone(problem):
    res = reconstruct(problem, seed=0, iters=150)
    trace = np.array(res.trace)
    assert np.all(np.diff(trace) < 0)
    assert trace[-1] < 0.5 * trace[0]
    assert len(res.steps) == len(trace) - 1


def test_deterministic_in_seed(problem):
    a = reconstruct(problem, seed=3, iters=20)
    b = reconstruct(problem, seed=3, iters=20)
    np.testing.assert_array_equal(a.image, b.image)


def test_snapshots(problem):
    res = reconstruct(problem, seed=0, iters=30, snapshot_every=10)
    assert sorted(res.snapshots) == [0, 10, 20, 30]


def test_abs_correlation_sign_blind(rng):
    a = rng.random((8, 8))
    assert abs_correlation(a, -a) == pytest.approx(1.0)
    assert abs_correlation(a, 2 * a + 1) == pytest.approx(1.0)
    assert abs_correlation(a, np.zeros_like(a)) == 0.0


def test_trace_csv(tmp_path):
    write_trace_csv([3.0, 2.5], tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines() == ["iteration,error", "0,3.0", "1,2.5"]
