from __future__ import annotations

import numpy as np
import pytest

from phcbeta.errors import AbsenceError, ConvergenceError, ParameterError
from phcbeta.spectrum import (
    WIDTH_FLOOR_NM,
    SpectralModel,
    Spectrum,
    band_edge_position,
    detect_peaks,
    evaluate_model,
    fit_spectrum,
    gaussian_profile,
    lorentzian_profile,
)

GRID = np.arange(960.0, 976.0, 0.05)

TRUTH = SpectralModel(
    lorentzians=((965.2, 0.25, 30.0), (968.1, 0.18, 45.0), (971.6, 0.30, 25.0)),
    gaussian=(968.7, 2.5, 40.0),
    baseline=5.0,
)


def noisy_spectrum(rng, snr=60.0):
    clean = evaluate_model(TRUTH, GRID)
    noise = rng.normal(0.0, clean.max() / snr, GRID.size)
    return Spectrum(GRID, np.clip(clean + noise, 0.0, None))


def test_lorentzian_area_and_height():
    wl = np.linspace(900.0, 1040.0, 400001)
    prof = lorentzian_profile(wl, 970.0, 0.4, 12.0)
    # wide tails: the window still holds ~99.8% of the area
    assert np.trapezoid(prof, wl) == pytest.approx(12.0, rel=5e-3)
    assert prof.max() == pytest.approx(2.0 * 12.0 / (np.pi * 0.4), rel=1e-6)


def test_gaussian_profile_amplitude():
    assert gaussian_profile(968.7, 968.7, 2.5, 40.0) == pytest.approx(40.0)
    half = gaussian_profile(968.7 + 2.5 * np.sqrt(2 * np.log(2)), 968.7, 2.5, 40.0)
    assert half == pytest.approx(20.0, rel=1e-9)


def test_detect_peaks_finds_lines_within_one_pixel(rng):
    spec = noisy_spectrum(rng)
    found = detect_peaks(spec, min_prominence=0.05 * spec.intensity.max())
    assert len(found) == 3
    for truth, got in zip((965.2, 968.1, 971.6), found):
        assert abs(got - truth) <= 0.05 + 1e-9


def test_detect_peaks_rejects_nonpositive_prominence(rng):
    with pytest.raises(ParameterError):
        detect_peaks(noisy_spectrum(rng), 0.0)


def test_fit_recovers_truth_at_high_snr(rng):
    spec = noisy_spectrum(rng)
    candidates = detect_peaks(spec, min_prominence=0.05 * spec.intensity.max())
    model = fit_spectrum(spec, candidates)
    assert len(model.lorentzians) == 3
    for fit, truth in zip(model.lorentzians, TRUTH.lorentzians):
        assert abs(fit[0] - truth[0]) < 0.05
    assert abs(model.gaussian[0] - TRUTH.gaussian[0]) < 0.1
    assert model.residual_rms is not None
    assert model.residual_rms < 0.05 * spec.intensity.max()


def test_fitted_widths_respect_the_resolution_floor():
    # a one-pixel spike cannot fit narrower than half the resolution
    clean = np.full(GRID.size, 2.0)
    clean[200] = 500.0
    spec = Spectrum(GRID, clean)
    model = fit_spectrum(spec, [float(GRID[200])], fit_gaussian=False)
    assert model.lorentzians[0][1] >= WIDTH_FLOOR_NM - 1e-12


def test_close_candidates_merge_into_one_line():
    one = SpectralModel(lorentzians=((970.0, 0.2, 40.0),), gaussian=None,
                        baseline=2.0)
    spec = Spectrum(GRID, evaluate_model(one, GRID))
    model = fit_spectrum(spec, [970.0, 970.05], fit_gaussian=False)
    assert len(model.lorentzians) == 1
    assert model.lorentzians[0][0] == pytest.approx(970.0, abs=0.01)


def test_candidate_outside_grid_rejected(rng):
    with pytest.raises(ParameterError):
        fit_spectrum(noisy_spectrum(rng), [940.0])


def test_starved_fit_raises_with_diagnostics(rng):
    spec = noisy_spectrum(rng)
    with pytest.raises(ConvergenceError) as info:
        fit_spectrum(spec, [965.2, 968.1, 971.6], max_nfev=1)
    assert "initialization" in info.value.diagnostics
    assert info.value.diagnostics["nfev"] >= 1


def test_no_components_fits_plain_baseline():
    spec = Spectrum(GRID, np.full(GRID.size, 7.0))
    model = fit_spectrum(spec, [], fit_gaussian=False)
    assert model.lorentzians == ()
    assert model.gaussian is None
    assert model.baseline == pytest.approx(7.0)


def test_model_round_trips_through_dict():
    clone = SpectralModel.from_dict(TRUTH.to_dict())
    assert clone.lorentzians == TRUTH.lorentzians
    assert clone.gaussian == TRUTH.gaussian
    assert clone.baseline == TRUTH.baseline
    bare = SpectralModel(lorentzians=(), gaussian=None, baseline=0.0)
    assert SpectralModel.from_dict(bare.to_dict()).gaussian is None


def test_model_validation():
    with pytest.raises(ParameterError):
        SpectralModel(lorentzians=((970.0, -0.1, 1.0),), gaussian=None, baseline=0.0)
    with pytest.raises(ParameterError):
        SpectralModel(lorentzians=((970.0, 0.2, -1.0),), gaussian=None, baseline=0.0)
    with pytest.raises(ParameterError):
        SpectralModel(
            lorentzians=((970.0, 0.2, 1.0), (970.05, 0.2, 1.0)),
            gaussian=None,
            baseline=0.0,
        )
    with pytest.raises(ParameterError):
        SpectralModel(lorentzians=(), gaussian=(970.0, 0.0, 1.0), baseline=0.0)
    with pytest.raises(ParameterError):
        SpectralModel(lorentzians=(), gaussian=None, baseline=-1.0)


def test_spectrum_validation():
    with pytest.raises(ParameterError):
        Spectrum(np.array([1.0, 1.0, 2.0]), np.ones(3))
    with pytest.raises(ParameterError):
        Spectrum(np.array([1.0, 2.0]), np.array([1.0, -1.0]))
    with pytest.raises(ParameterError):
        Spectrum(np.array([1.0, 2.0, 3.0]), np.ones(2))


def test_band_edge_position():
    assert band_edge_position(TRUTH) == pytest.approx(968.7)
    bare = SpectralModel(lorentzians=((970.0, 0.2, 1.0),), gaussian=None,
                         baseline=0.0)
    with pytest.raises(AbsenceError):
        band_edge_position(bare)


def test_evaluate_model_is_sum_of_parts():
    wl = np.linspace(962.0, 974.0, 1001)
    total = evaluate_model(TRUTH, wl)
    parts = np.full(wl.shape, TRUTH.baseline)
    for c, w, a in TRUTH.lorentzians:
        parts += lorentzian_profile(wl, c, w, a)
    parts += gaussian_profile(wl, *TRUTH.gaussian)
    assert np.allclose(total, parts)
