import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import ndimage

from huemef import fusion
from huemef.errors import StackError
from huemef.fusion import FusionParams


def _texture(size=64, seed=0):
    rng = np.random.default_rng(seed)
    base = ndimage.gaussian_filter(rng.random((size, size, 3)), (2, 2, 0))
    return np.clip(0.3 + (base - base.mean()) * 3, 0.05, 0.95)


def test_well_exposedness_values():
    assert fusion.well_exposedness(np.full((1, 1, 3), 0.5))[0, 0] == 1.0
    assert fusion.well_exposedness(np.full((1, 1, 3), 0.9))[0, 0] == pytest.approx(np.exp(-6.0), rel=1e-12)
    assert np.exp(-6.0) == pytest.approx(2.479e-3, rel=1e-3)


def test_flat_gray_weight_is_zero():
    img = np.full((8, 8, 3), 0.5)
    np.testing.assert_array_equal(fusion.contrast(img), 0.0)
    np.testing.assert_array_equal(fusion.saturation(img), 0.0)
    np.testing.assert_array_equal(fusion.quality_weight(img), 0.0)


def test_saturation_is_channel_std():
    img = np.array([[[0.2, 0.5, 0.8]]])
    assert fusion.saturation(img)[0, 0] == pytest.approx(np.std([0.2, 0.5, 0.8]))


def test_contrast_uses_channel_mean():
    img = np.zeros((5, 5, 3))
    img[2, 2] = [0.3, 0.6, 0.9]
    assert fusion.contrast(img)[2, 2] == pytest.approx(4 * 0.6)


def test_pyramid_shapes():
    img = np.zeros((37, 50, 3))
    pyr = fusion.gaussian_pyramid(img, 4)
    assert [p.shape[:2] for p in pyr] == [(37, 50), (19, 25), (10, 13), (5, 7)]
    assert fusion.default_levels((37, 50, 3)) == 5


@pytest.mark.parametrize("shape", [(64, 64, 3), (37, 50, 3), (5, 9, 3)])
def test_laplacian_round_trip(shape):
    img = np.random.default_rng(3).random(shape)
    levels = fusion.default_levels(shape)
    rec = fusion.collapse(fusion.laplacian_pyramid(img, levels))
    assert np.max(np.abs(rec - img)) < 1e-10


def test_single_image_identity():
    img = _texture()
    assert np.max(np.abs(fusion.fuse([img]) - img)) <= 1e-4


def test_copies_identity():
    img = _texture(seed=1)
    assert np.max(np.abs(fusion.fuse([img, img, img]) - img)) <= 1e-4


def test_black_and_textured():
    tex = _texture(seed=2)
    out = fusion.fuse([np.zeros_like(tex), tex])
    inner = (slice(8, -8), slice(8, -8))
    assert np.max(np.abs(out[inner] - tex[inner])) <= 1e-2


def test_permutation_byte_identical():
    rng = np.random.default_rng(5)
    stack = [rng.random((32, 32, 3)) for _ in range(4)]
    a = fusion.fuse(stack)
    b = fusion.fuse(stack[::-1])
    c = fusion.fuse([stack[2], stack[0], stack[3], stack[1]])
    assert a.tobytes() == b.tobytes() == c.tobytes()


def test_errors():
    with pytest.raises(StackError):
        fusion.fuse([])
    with pytest.raises(StackError):
        fusion.fuse([np.zeros((4, 4, 3)), np.zeros((4, 5, 3))])
    with pytest.raises(ValueError):
        FusionParams(sigma=0)
    with pytest.raises(ValueError):
        FusionParams(contrast_exp=-1)


def test_overshoot_is_reported_not_raised():
    step = np.zeros((32, 32, 3))
    step[:, 16:] = 1.0
    res = fusion.fuse_detailed([step, 1.0 - step])
    assert res.image.min() >= 0 and res.image.max() <= 1
    assert res.overshoot >= 0


@given(st.integers(1, 4), st.integers(0, 2**16))
def test_normalized_weights_sum_to_one(n, seed):
    rng = np.random.default_rng(seed)
    stack = [rng.random((12, 10, 3)) for _ in range(n)]
    w = fusion.normalized_weights(stack)
    assert np.all(w >= 0)
    np.testing.assert_allclose(w.sum(axis=0), 1.0, atol=1e-6)


@given(st.integers(0, 2**16))
def test_output_in_range(seed):
    rng = np.random.default_rng(seed)
    stack = [rng.random((16, 16, 3)) ** k for k in (0.5, 1, 2)]
    out = fusion.fuse(stack)
    assert out.min() >= 0 and out.max() <= 1
