import numpy as np
import pytest

from neurodec.errors import InvalidParamsError
from neurodec.hrf import HrfParams, canonical_hrf

# Double-gamma closed form evaluated at t = 0..30 step 2 with the default
# parameters, peak-normalized (frozen from a scratch evaluation).
EXPECTED_DEFAULT_TR2 = np.array([
    0.0,
    0.2248917190,
    0.9739294994,
    1.0,
    0.5614554114,
    0.1997009506,
    0.0042090901,
    -0.0795166342,
    -0.0969181918,
    -0.0801130123,
    -0.0532992651,
    -0.0302506013,
    -0.0151215326,
    -0.0068027629,
    -0.0027988005,
    -0.0010662993,
])


def test_default_kernel_matches_closed_form():
    k = canonical_hrf(HrfParams(), tr=2.0)
    assert len(k) == 16
    np.testing.assert_allclose(k, EXPECTED_DEFAULT_TR2, atol=5e-10)


def test_default_kernel_peaks_at_six_seconds():
    k = canonical_hrf(HrfParams(), tr=2.0)
    assert np.argmax(k) == 3  # sample 3 <-> t = 6 s


def test_peak_amplitude_normalized_to_one():
    for tr in (0.5, 1.0, 2.0, 3.0):
        k = canonical_hrf(HrfParams(), tr=tr)
        assert k.max() == pytest.approx(1.0)


def test_single_sample_kernel():
    k = canonical_hrf(HrfParams(kernel_length=2.0), tr=2.0)
    assert k.shape == (1,)
    assert k[0] == 0.0  # the double gamma vanishes at t = 0


def test_kernel_length_ceiling():
    assert len(canonical_hrf(HrfParams(kernel_length=31.0), tr=2.0)) == 16
    assert len(canonical_hrf(HrfParams(kernel_length=32.0), tr=2.0)) == 16
    assert len(canonical_hrf(HrfParams(kernel_length=33.0), tr=2.0)) == 17


def test_invalid_params_rejected():
    with pytest.raises(InvalidParamsError):
        HrfParams(peak_dispersion=0.0)
    with pytest.raises(InvalidParamsError):
        HrfParams(undershoot_dispersion=-1.0)
    with pytest.raises(InvalidParamsError):
        HrfParams(kernel_length=0.0)
    with pytest.raises(InvalidParamsError):
        canonical_hrf(HrfParams(), tr=0.0)
