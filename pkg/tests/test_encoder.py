import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfmd.descriptor import DescriptorField
from lfmd.encoder import (
    Codebook,
    encode_vlad,
    kmeans_fit,
    load_codebook,
    power_normalize,
    save_codebook,
    vlad_residuals,
)
from lfmd.errors import FormatError, ParameterError


def _blobs(rng, n_per=200):
    means = np.array([[0.0, 0.0, 0.0], [3.0, 0.0, 1.0], [0.0, 4.0, -2.0]])
    pts = np.concatenate([m + 0.2 * rng.standard_normal((n_per, 3)) for m in means])
    return pts, means


def _lloyd_oracle(x, k, rng, iters=100):
    # plain random-init Lloyd, kept separate from the library implementation
    c = x[rng.choice(len(x), k, replace=False)].copy()
    for _ in range(iters):
        d = ((x[:, None, :] - c[None]) ** 2).sum(-1)
        lab = d.argmin(1)
        for j in range(k):
            if np.any(lab == j):
                c[j] = x[lab == j].mean(0)
    d = ((x[:, None, :] - c[None]) ** 2).sum(-1)
    return d.min(1).sum()


def test_single_center_is_mean(rng):
    x = rng.random((50, 4))
    cb = kmeans_fit(x, 1, seed=0)
    np.testing.assert_allclose(cb.centers[0], x.mean(0), atol=1e-12)


def test_three_blobs(rng):
    x, means = _blobs(rng)
    cb = kmeans_fit(x, 3, seed=1)
    best = min(
        max(np.linalg.norm(cb.centers[list(p)] - means, axis=1))
        for p in itertools.permutations(range(3))
    )
    assert best <= 0.05
    oracle = min(_lloyd_oracle(x, 3, np.random.default_rng(s)) for s in range(20))
    assert cb.inertia <= 1.05 * oracle


def test_k_equals_n(rng):
    x = rng.random((12, 5))
    cb = kmeans_fit(x, 12, seed=3)
    assert cb.inertia == 0.0
    assert sorted(map(tuple, cb.centers)) == sorted(map(tuple, x))


def test_too_few_points(rng):
    with pytest.raises(ParameterError):
        kmeans_fit(rng.random((3, 2)), 4)


def test_objective_non_increasing(rng):
    x = rng.random((500, 6))
    cb = kmeans_fit(x, 16, seed=4, tol=0.0, max_iter=40)
    h = np.array(cb.history)
    assert np.all(np.diff(h) <= 1e-9 * h[0])


def test_empty_cluster_reseeded():
    # two far points plus a duplicated cluster: k-means++ on 3 distinct points
    x = np.array([[0.0, 0.0]] * 5 + [[10.0, 0.0]] * 5 + [[5.0, 8.0]])
    cb = kmeans_fit(x, 3, seed=0)
    assert len({tuple(c) for c in cb.centers}) == 3
    assert cb.inertia == 0.0


def test_kmeans_deterministic(rng):
    x = rng.random((300, 4))
    a, b = kmeans_fit(x, 8, seed=11), kmeans_fit(x, 8, seed=11)
    np.testing.assert_array_equal(a.centers, b.centers)


def test_vlad_zero_when_descriptors_are_centers():
    centers = np.array([[1.0, 0.0], [0.0, 1.0]])
    cb = Codebook(centers)
    v = encode_vlad(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]), cb)
    assert np.all(v == 0)


def test_vlad_hand_example():
    cb = Codebook(np.array([[0.5, 0.5]]))
    x = np.array([[0.59, 0.34]])  # residual (0.09, -0.16)
    np.testing.assert_allclose(encode_vlad(x, cb, beta=0.5), [0.6, -0.8], atol=1e-12)


def test_vlad_dimension_default_grid(rng):
    cb = Codebook(rng.random((64, 33)))
    assert encode_vlad(rng.random((100, 33)), cb).shape == (2112,)


def test_vlad_unit_norm(rng):
    cb = Codebook(rng.random((8, 5)))
    v = encode_vlad(rng.random((40, 5)), cb)
    assert abs(np.linalg.norm(v) - 1) <= 1e-9


def test_vlad_dim_mismatch(rng):
    with pytest.raises(ParameterError):
        encode_vlad(rng.random((4, 3)), Codebook(rng.random((2, 4))))


def test_vlad_tie_goes_to_lowest_center():
    cb = Codebook(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    r = vlad_residuals(np.array([[0.0, 0.5]]), cb)
    np.testing.assert_array_equal(r, [[-1.0, 0.5], [0.0, 0.0]])


def test_vlad_uses_only_unmasked_pixels(rng):
    desc = rng.random((3, 3, 4))
    mask = np.zeros((3, 3), bool)
    mask[0, 1] = mask[2, 2] = True
    desc[~mask] = 0
    field = DescriptorField(desc, mask, np.ones((3, 3)))
    cb = Codebook(rng.random((2, 4)))
    np.testing.assert_array_equal(encode_vlad(field, cb), encode_vlad(desc[mask], cb))


def test_beta_one_is_plain_normalized_vlad(rng):
    cb = Codebook(rng.random((4, 3)))
    x = rng.random((30, 3))
    raw = vlad_residuals(x, cb).ravel()
    np.testing.assert_allclose(encode_vlad(x, cb, beta=1.0), raw / np.linalg.norm(raw), atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 60))
def test_vlad_permutation_invariant(seed, n):
    rng = np.random.default_rng(seed)
    cb = Codebook(rng.random((5, 4)))
    x = rng.random((n, 4))
    a = encode_vlad(x, cb)
    b = encode_vlad(x[rng.permutation(n)], cb)
    assert np.abs(a - b).max() <= 1e-12


def test_power_normalize_zero():
    assert np.all(power_normalize(np.zeros(5)) == 0)


def test_codebook_round_trip(tmp_path, rng):
    cb = kmeans_fit(rng.random((100, 6)), 7, seed=5)
    save_codebook(cb, tmp_path / "c.lfmc")
    back = load_codebook(tmp_path / "c.lfmc")
    np.testing.assert_array_equal(back.centers, cb.centers)
    assert back.k == 7 and back.inertia == cb.inertia and back.rng_seed == 5
    assert (tmp_path / "c.lfmc").read_bytes()[:5] == b"LFMC1"


def test_codebook_wrong_magic(tmp_path):
    (tmp_path / "c.lfmc").write_bytes(b"LFMX1{}\n")
    with pytest.raises(FormatError):
        load_codebook(tmp_path / "c.lfmc")
