import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from huemef import hdr
from huemef.color_hue import decompose
from huemef.errors import CalibrationError, StackError
from huemef.hdr import ExposureStack, ResponseCurve
from huemef.scenes import make_scene


def _radiance(size=96, seed=0):
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:size, 0:size] / (size - 1)
    base = np.exp(6 * x - 3)[..., None] * (0.3 + 0.7 * rng.random((size, size, 3)))
    return base * (0.5 + y)[..., None]


def test_stack_validation():
    img = np.zeros((4, 4, 3))
    with pytest.raises(StackError):
        ExposureStack((), ())
    with pytest.raises(StackError):
        ExposureStack((img, img), (0.0,))
    with pytest.raises(StackError):
        ExposureStack((img, np.zeros((4, 5, 3))), (0.0, 1.0))
    with pytest.raises(StackError):
        ExposureStack((img, img), (1.0, 0.0))
    s = ExposureStack((img, img), (-1, 1), t_ref=2.0)
    np.testing.assert_allclose(s.times, [1.0, 4.0])


def test_hat_weight():
    np.testing.assert_allclose(hdr.hat_weight([0.0, 0.5, 1.0, 0.25]), [0, 1, 0, 0.75])


def test_synthesize_identity_single():
    e = np.random.default_rng(0).random((8, 8, 3))
    st_ = hdr.synthesize_stack(e, [0], crf=lambda v: v, kappa=1.0)
    np.testing.assert_array_equal(st_.images[0], e)


def test_synthesize_constant():
    e = np.full((4, 4, 3), 0.18)
    s = hdr.synthesize_stack(e, [-2, 0, 2], crf=lambda v: v, kappa=1.0)
    assert [img[0, 0, 0] for img in s.images] == pytest.approx([0.045, 0.18, 0.72])


def test_synthesize_quantized():
    s = hdr.synthesize_stack(_radiance(16), [0], bit_depth=8)
    codes = s.images[0] * 255
    np.testing.assert_allclose(codes, np.round(codes), atol=1e-9)


@given(st.integers(0, 1000))
def test_synthesize_monotone_in_ev(seed):
    s = hdr.synthesize_stack(_radiance(12, seed), [-3, -1, 0, 2.5])
    for a, b in zip(s.images, s.images[1:]):
        assert np.all(a <= b)


def test_crf_identity():
    s = hdr.synthesize_stack(_radiance(), [-2, 0, 2], crf=lambda v: v)
    crf = hdr.estimate_crf(s, 5)
    v = np.linspace(0.05, 0.95, 200)
    assert np.max(np.abs(crf(v) - v)) <= 1e-3
    assert crf(1.0) == pytest.approx(1.0, abs=1e-9)


def test_crf_gamma():
    s = hdr.synthesize_stack(_radiance(128), [-4, -2, 0, 2, 4])
    crf = hdr.estimate_crf(s, 5)
    v = np.linspace(0.05, 0.95, 500)
    assert np.sqrt(np.mean((crf(v) - v**2.2) ** 2)) <= 0.01
    assert crf.is_monotone()
    assert crf.degree == 5


def test_crf_two_constant_images():
    s = ExposureStack((np.full((8, 8, 3), 0.25), np.full((8, 8, 3), 0.5)), (0.0, 1.0))
    crf = hdr.estimate_crf(s, 1)
    assert crf.residual == pytest.approx(0.0, abs=1e-12)
    assert crf(1.0) == pytest.approx(1.0)


def test_crf_insufficient_data():
    s = ExposureStack((np.full((8, 8, 3), 0.25), np.full((8, 8, 3), 0.5)), (0.0, 1.0))
    with pytest.raises(CalibrationError, match="insufficient calibration data"):
        hdr.estimate_crf(s, 5)
    with pytest.raises(CalibrationError):
        hdr.estimate_crf(ExposureStack((np.full((4, 4, 3), 0.5),), (0.0,)), 3)


def test_crf_seed_invariance_noiseless():
    s = hdr.synthesize_stack(_radiance(), [-2, 0, 2], crf=lambda v: v)
    for seed in (0, 1, 99):
        assert hdr.estimate_crf(s, 3, seed=seed).residual < 1e-12


def test_forward_inverts_curve():
    curve = ResponseCurve(np.array([0.0, 0.3, 0.7]))
    v = np.linspace(0, 1, 50)
    np.testing.assert_allclose(curve.forward(curve(v)), v, atol=1e-4)


def test_merge_single_identity():
    img = np.random.default_rng(2).uniform(0.2, 0.8, (10, 10, 3))
    s = ExposureStack((img,), (0.0,))
    out = hdr.merge_hdr(s, ResponseCurve.identity(), anchor=False)
    np.testing.assert_allclose(out, img, rtol=1e-12)
    anchored = hdr.merge_hdr(s, ResponseCurve.identity())
    ratio = anchored / img
    np.testing.assert_allclose(ratio, ratio.flat[0], rtol=1e-12)


def test_merge_two_exposures_exact():
    e = np.random.default_rng(3).uniform(0.15, 0.4, (10, 10, 3))
    s = ExposureStack((e, 2 * e), (0.0, 1.0))
    out = hdr.merge_hdr(s, ResponseCurve.identity(), anchor=False)
    np.testing.assert_allclose(out, e, rtol=1e-6)


def test_merge_exposure_consistency():
    e = _radiance(32)
    s = hdr.synthesize_stack(e, [-1, 0, 1], crf=lambda v: v, kappa=0.1)
    unclipped = np.all([img < 1 for img in s.images], axis=0) & np.all([img > 0 for img in s.images], axis=0)
    lin = [img / t for img, t in zip(s.images, s.times)]
    np.testing.assert_allclose(lin[0][unclipped], lin[2][unclipped], rtol=1e-6)


def test_merge_preserves_hue_identity_crf():
    e = _radiance(32)
    s = hdr.synthesize_stack(e, [-1, 0, 1], crf=lambda v: v, kappa=0.05)
    out = hdr.merge_hdr(s, ResponseCurve.identity())
    ok = np.all([(img > 0.1) & (img < 0.9) for img in s.images], axis=(0, -1))
    assert ok.any()
    np.testing.assert_allclose(decompose(out).c[ok], decompose(e).c[ok], atol=1e-9)


def test_round_trip_radiance():
    e = make_scene("chart", 128)
    s = hdr.synthesize_stack(e, [-4, -2, 0, 2, 4])
    crf = hdr.estimate_crf(s, 5)
    out = hdr.merge_hdr(s, crf)
    scale = hdr.exposure_anchor(e)
    well = np.any([(img > 0.1) & (img < 0.9) for img in s.images], axis=0)
    rel = np.abs(out - scale * e) / (scale * e)
    assert np.max(rel[well]) <= 0.02


def test_per_channel_crfs():
    s = hdr.synthesize_stack(_radiance(64), [-2, 0, 2])
    crfs = hdr.estimate_crfs(s, 3, per_channel=True)
    assert len(crfs) == 3
    assert all(c.is_monotone() for c in crfs)
