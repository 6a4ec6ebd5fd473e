import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from secondorder.analytic import coherence_factor
from secondorder.errors import ValidationError
from secondorder.geometry import (
    SPEED_OF_LIGHT,
    DetectorSpec,
    DoubleSlitMask,
    OpticalSetup,
    ScanGrid,
    SourceProfile,
    default_masks,
    slit_positions,
    validate_coherence_regime,
)

MM = 1e-3


def test_slit_positions_centered():
    assert slit_positions(DoubleSlitMask(0.0, 0.57 * MM)) == (-0.285 * MM, 0.285 * MM)


def test_slit_positions_offset():
    x1, x2 = slit_positions(DoubleSlitMask(0.1 * MM, 0.2 * MM))
    assert x1 == pytest.approx(0.0, abs=1e-18)
    assert x2 == pytest.approx(0.2 * MM, rel=1e-15)


@given(
    center=st.floats(-1e-2, 1e-2, allow_nan=False),
    d=st.floats(1e-6, 1e-2, allow_nan=False),
)
def test_slit_positions_exact(center, d):
    x1, x2 = DoubleSlitMask(center, d).slits
    assert x1 == center - d / 2
    assert x2 == center + d / 2


def test_zero_separation_rejected():
    with pytest.raises(ValidationError, match="separation"):
        DoubleSlitMask(0.0, 0.0)


def test_overlapping_slits_rejected():
    with pytest.raises(ValidationError, match="slit_width"):
        DoubleSlitMask(0.0, 0.1 * MM, 0.1 * MM)
    with pytest.raises(ValidationError, match="slit_width"):
        DoubleSlitMask(0.0, 0.1 * MM, -1e-6)


@pytest.mark.parametrize("field", ["wavelength", "z_source_to_mask", "focal_length"])
@pytest.mark.parametrize("value", [0.0, -1.0, math.inf, math.nan])
def test_setup_rejects_non_positive_lengths(field, value):
    with pytest.raises(ValidationError) as err:
        OpticalSetup(**{field: value})
    assert err.value.field.startswith("setup.")


def test_source_profile_validation():
    with pytest.raises(ValidationError, match="coherence_length"):
        SourceProfile("gaussian", 0.0)
    with pytest.raises(ValidationError, match="shape"):
        SourceProfile("lorentzian", 1e-3)


def test_detector_and_scan_validation():
    assert DetectorSpec(0.0, 0.0).aperture == 0.0
    with pytest.raises(ValidationError):
        DetectorSpec(0.0, -1e-6)
    with pytest.raises(ValidationError, match="n_points"):
        ScanGrid("detector_T", 0.0, 1.0, 1)
    with pytest.raises(ValidationError, match="scan.stop"):
        ScanGrid("detector_T", 1.0, 1.0, 5)
    with pytest.raises(ValidationError, match="axis"):
        ScanGrid("detector_Z", 0.0, 1.0, 5)
    assert np.allclose(ScanGrid("detector_T", 0.0, 1.0, 5).positions(), [0, 0.25, 0.5, 0.75, 1.0])


def test_omega_derived_not_stored():
    s = OpticalSetup()
    assert "omega" not in {f.name for f in dataclasses.fields(s)}
    assert s.omega == pytest.approx(2 * math.pi * SPEED_OF_LIGHT / 980e-9, rel=1e-15)
    assert s.omega / SPEED_OF_LIGHT == pytest.approx(s.wavenumber, rel=1e-15)


def test_defaults_match_experiment():
    s = OpticalSetup()
    assert (s.wavelength, s.z_source_to_mask, s.focal_length) == (980e-9, 70e-3, 200e-3)
    assert s.source.coherence_length == 0.55e-3
    mC, mT = default_masks()
    assert (mC.separation, mT.separation) == (0.69e-3, 0.57e-3)


def test_coherence_length_definitions():
    # Hard edge: first zero of the source spectrum sits at the coherence length.
    he = OpticalSetup(source=SourceProfile("uniform-hard-edge", 0.55 * MM))
    assert coherence_factor(he, 0.55 * MM) == pytest.approx(0.0, abs=1e-15)
    assert he.source_width == pytest.approx(he.lambda_z / (0.55 * MM))
    # Gaussian: |g1| falls to 1/e at half the coherence length.
    g = OpticalSetup()
    assert coherence_factor(g, 0.275 * MM) == pytest.approx(math.exp(-1.0), rel=1e-12)


def test_regime_defaults():
    mC, mT = default_masks()
    rep = validate_coherence_regime(OpticalSetup(), mC, mT)
    assert rep.first_order_suppressed == {"C": True, "T": True}
    assert rep.pairs_correlated == (True, True)
    assert rep.pair_offsets == pytest.approx((60e-6, 60e-6), rel=1e-9)
    assert rep.disjoint_path_regime


def test_regime_small_separation_not_suppressed():
    lc = 0.55 * MM
    mC = DoubleSlitMask(0.0, lc / 10, 0.0, "C")
    mT = DoubleSlitMask(0.0, lc / 10, 0.0, "T")
    rep = validate_coherence_regime(OpticalSetup(), mC, mT)
    assert rep.first_order_suppressed == {"C": False, "T": False}


def test_regime_displaced_mask_uncorrelated():
    mC, mT = default_masks()
    rep = validate_coherence_regime(OpticalSetup(), mC, mT.moved(5 * 0.55 * MM))
    assert rep.pairs_correlated == (False, False)
    assert not rep.disjoint_path_regime


def test_regime_is_pure():
    mC, mT = default_masks()
    s = OpticalSetup()
    assert validate_coherence_regime(s, mC, mT) == validate_coherence_regime(s, mC, mT)
