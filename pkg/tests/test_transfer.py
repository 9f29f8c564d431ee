import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from huemef.transfer import linear_to_srgb, log_average, luminance, srgb_to_linear


def test_srgb_known_values():
    assert srgb_to_linear(0.5) == pytest.approx(0.21404114, abs=1e-8)
    assert srgb_to_linear(0.04045) == pytest.approx(0.04045 / 12.92)
    assert linear_to_srgb(1.0) == pytest.approx(1.0)
    assert linear_to_srgb(-0.1) == 0.0


@given(st.floats(0.0, 1.0))
def test_srgb_round_trip(v):
    assert linear_to_srgb(srgb_to_linear(v)) == pytest.approx(v, abs=1e-12)


def test_luminance_and_log_average():
    img = np.ones((3, 3, 3)) * 0.18
    assert luminance(img)[0, 0] == pytest.approx(0.18)
    assert log_average(np.full((4, 4), 0.5), delta=0.0) == pytest.approx(0.5)
