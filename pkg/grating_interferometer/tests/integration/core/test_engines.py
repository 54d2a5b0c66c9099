import numpy as np
import pytest

from grating_interferometer.core.fringe_analysis import contrast_vs_detector, fit_fringes
from grating_interferometer.core.wave_engine import (
    QuantumBeamline,
    converge_source_points,
    scan_middle_grating,
)
from grating_interferometer.models.specs import CoherenceSpec

pytestmark = pytest.mark.integration

SHIFTS = np.arange(11) * 10e-9
BOUNDS = (25e-9, 200e-9)


def test_scan_middle_grating_matches_beamline_scan(default_geometry):
    coherence = CoherenceSpec(n_source_points=2)
    slit = default_geometry.detector_slit
    scan = scan_middle_grating(default_geometry, coherence, SHIFTS, slit)
    [reference] = QuantumBeamline(default_geometry, coherence).scan(SHIFTS, [slit])
    np.testing.assert_array_equal(scan.fluxes, reference.fluxes)
    assert scan.metadata["detector_center_m"] == 0.0


def test_contrast_vs_detector_fits_every_position(default_geometry):
    positions = [-2e-6, 0.0, 2e-6]
    coherence = CoherenceSpec(n_source_points=2)
    fits = contrast_vs_detector(default_geometry, coherence, positions, SHIFTS, BOUNDS)
    assert [p for p, _ in fits] == positions
    slit = default_geometry.detector_slit.with_offset(2e-6)
    expected = fit_fringes(scan_middle_grating(default_geometry, coherence, SHIFTS, slit), BOUNDS)
    assert fits[2][1].contrast == pytest.approx(expected.contrast, rel=1e-9)


def test_converge_source_points_respects_cap(default_geometry):
    coherence = CoherenceSpec(n_source_points=1, max_source_points=4, convergence_tol=1e-12)
    converged = converge_source_points(default_geometry, coherence, [default_geometry.detector_slit])
    assert converged.n_source_points == 4
