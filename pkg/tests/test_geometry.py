import math

import numpy as np
import pytest
from scipy import ndimage

from conftest import smooth_image
from lfmd.errors import ParameterError
from lfmd.geometry import (
    AugmentSpec,
    EuclideanTransform,
    augment_set,
    log_polar,
    pad_center,
    resize,
    rotate,
    sample_bicubic,
    warp,
)
from lfmd.imageio import LabeledSet


def psnr(a, b, peak=1.0):
    mse = np.mean((a - b) ** 2)
    return 10 * math.log10(peak**2 / mse)


def tapered(rng, n=64):
    """Smooth content fading to zero outside a centered disk, so rotations keep it."""
    img = smooth_image(rng, n, sigma=3.0)
    y, x = np.mgrid[0:n, 0:n] - (n - 1) / 2.0
    r = np.hypot(x, y)
    return img * np.clip((n / 2 - 6 - r) / 6, 0, 1)


def reference_rotate(img, angle):
    """Independent resampler: scipy cubic spline about the same center."""
    n, m = img.shape
    yy, xx = np.mgrid[0:n, 0:m].astype(float)
    cy, cx = (n - 1) / 2, (m - 1) / 2
    c, s = math.cos(angle), math.sin(angle)
    sx = c * (xx - cx) + s * (yy - cy) + cx
    sy = -s * (xx - cx) + c * (yy - cy) + cy
    return ndimage.map_coordinates(img, [sy, sx], order=3, mode="constant")


def test_identity_is_exact(rng):
    img = rng.random((17, 23))
    np.testing.assert_array_equal(warp(img, EuclideanTransform()), img)


def test_identity_pad_is_exact(rng):
    img = rng.random((20, 20))
    out = warp(img, EuclideanTransform(), (40, 40))
    np.testing.assert_array_equal(out, pad_center(img, 40))


def test_catmull_rom_reproduces_linear_ramps():
    img = np.add.outer(np.arange(10.0), 2 * np.arange(10.0)) / 30
    ys = np.array([4.25, 5.5, 3.75])
    xs = np.array([4.5, 3.1, 6.9])
    np.testing.assert_allclose(sample_bicubic(img, ys, xs), (ys + 2 * xs) / 30, atol=1e-12)


def test_half_turn_twice(rng):
    img = smooth_image(rng, 48)
    twice = rotate(rotate(img, math.pi), math.pi)
    assert np.abs(twice - img).max() <= 2e-2


def test_rotation_direction_matches_reference(rng):
    img = tapered(rng)
    for angle in (0.3, 1.2, 2.5):
        ours = rotate(img, angle)
        ref = np.clip(reference_rotate(img, angle), 0, 1)
        assert psnr(ours, ref) >= 35


def test_scale_up_then_down(rng):
    n = 48
    y, x = np.mgrid[0:n, 0:n]
    ramp = 0.2 + 0.6 * (x + y) / (2 * (n - 1))
    up = warp(ramp, EuclideanTransform(scale=2.0), (2 * n, 2 * n))
    back = warp(up, EuclideanTransform(scale=0.5), (n, n))
    inner = (slice(3, -3), slice(3, -3))
    assert psnr(back[inner], ramp[inner]) >= 35


def test_rotation_composition(rng):
    for _ in range(5):
        img = tapered(rng)
        a1, a2 = rng.uniform(0, 2 * math.pi, 2)
        composed = rotate(rotate(img, a1), a2)
        direct = rotate(img, a1 + a2)
        assert psnr(composed, direct) >= 30


def test_transform_normalizes_angle():
    assert EuclideanTransform(angle=-math.pi / 2).angle == pytest.approx(3 * math.pi / 2)
    with pytest.raises(ParameterError):
        EuclideanTransform(scale=0)


def test_resize_shapes(rng):
    img = rng.random((28, 28))
    assert resize(img, 48).shape == (48, 48)
    assert resize(img, (10, 14)).shape == (10, 14)


def _digits(rng, n=6):
    imgs = tuple(np.clip(smooth_image(rng, 28) - 0.4, 0, 1) for _ in range(n))
    return LabeledSet(imgs, np.arange(n) % 2, ("a", "b"))


def test_augment_original_ignores_seed(rng):
    ds = _digits(rng)
    a = augment_set(ds, AugmentSpec("original", rng_seed=1))
    b = augment_set(ds, AugmentSpec("original", rng_seed=2))
    for x, y in zip(a.images, b.images):
        np.testing.assert_array_equal(x, y)


@pytest.mark.parametrize("mode", ["rotate", "scale", "rotate+scale"])
def test_augment_deterministic(rng, mode):
    ds = _digits(rng)
    spec = AugmentSpec(mode, rng_seed=7)
    a, b = augment_set(ds, spec), augment_set(ds, spec)
    for x, y in zip(a.images, b.images):
        np.testing.assert_array_equal(x, y)
    c = augment_set(ds, AugmentSpec(mode, rng_seed=8))
    assert any(not np.array_equal(x, y) for x, y in zip(a.images, c.images))


def test_augment_mnist_sizes(rng):
    out = augment_set(_digits(rng), AugmentSpec("rotate+scale", (0.5, 1.5), 48, 96, 0))
    assert all(im.shape == (96, 96) for im in out.images)
    assert out.labels.tolist() == [0, 1, 0, 1, 0, 1]


def test_augment_leaves_sizes(rng):
    leaves = LabeledSet((rng.random((60, 90)), rng.random((90, 40))), [0, 0], ("leaf",))
    out = augment_set(leaves, AugmentSpec("rotate+scale", (0.5, 1.0), 128, 256, 0))
    assert all(im.shape == (256, 256) for im in out.images)


def test_augment_spec_validation():
    with pytest.raises(ParameterError):
        AugmentSpec("shear")
    with pytest.raises(ParameterError):
        AugmentSpec(scale_range=(1.5, 0.5))
    with pytest.raises(ParameterError):
        AugmentSpec(resize_to=100, pad_to=96)


def test_log_polar_constant():
    out = log_polar(np.full((64, 64), 0.6), (64, 64))
    np.testing.assert_allclose(out, 0.6, atol=1e-12)


def test_log_polar_rotation_rolls_rows(rng):
    img = tapered(rng)
    h = 64
    base = log_polar(img, (h, 64))
    turned = log_polar(rotate(img, math.pi / 2), (h, 64))
    assert np.abs(turned - np.roll(base, h // 4, axis=0)).max() <= 5e-2


def test_log_polar_scale_shifts_columns(rng):
    img = tapered(rng, 96)
    w = 64
    s = 32 ** (8 / w)  # exactly 8 columns for R = 32 (image 64 after crop below)
    base = log_polar(img[16:80, 16:80], (64, w))
    scaled = log_polar(warp(img, EuclideanTransform(scale=s))[16:80, 16:80], (64, w))
    # columns j map to j + 8; compare on the region where both radii are inside
    valid = slice(8, 48)
    shifted = slice(16, 56)
    assert np.abs(scaled[:, shifted] - base[:, valid]).max() <= 5e-2
