from __future__ import annotations

import numpy as np
import pytest

from phcbeta.bands import WaveguideGeometry, build_dispersion_curve
from phcbeta.beta import (
    BROADENING_GRID,
    BetaResult,
    RatePoint,
    RateVsDetuning,
    extract_beta,
    fit_rate_model,
    format_report,
    multi_dot_report,
)
from phcbeta.emission import RateModelConfig, broadened_rate_curve
from phcbeta.errors import (
    InsufficientDetuningError,
    ParameterError,
    SpanError,
)

from oracles import quadratic_band

TRUE_MODEL = {"coupling_scale": 0.4, "gamma_bg": 0.8, "broadening_fwhm": 3.0e-4}


def make_series(label, detunings, rates, sigma=0.05, converged=None):
    converged = converged or [True] * len(detunings)
    points = tuple(
        RatePoint(
            detuning_nm=float(d),
            gamma_tot=float(g),
            sigma=sigma,
            temperature_K=20.0 + i,
            converged=bool(c),
        )
        for i, (d, g, c) in enumerate(zip(detunings, rates, converged))
    )
    return RateVsDetuning(label=label, points=points)


@pytest.fixture(scope="module")
def toy_curve():
    k, freq, _ = quadratic_band(0.26, 0.4)
    return build_dispersion_curve(k, freq, WaveguideGeometry())


@pytest.fixture(scope="module")
def model_series(toy_curve):
    config = RateModelConfig(gamma_0=1.1, **TRUE_MODEL)
    det = np.array([-4.0, -2.5, -1.2, -0.4, 0.5, 1.5, 3.0])
    wl = toy_curve.band_edge_wavelength_nm + det
    rates = broadened_rate_curve(toy_curve, config, wl).gamma_tot
    return make_series("model", det, rates)


def test_extract_beta_from_extrema():
    series = make_series(
        "QD3", [-2.0, -0.5, 0.8, 2.5], [3.1, 5.7, 1.4, 0.8]
    )
    result = extract_beta(series, gamma_0=1.1)
    assert result.gamma_res == 5.7
    assert result.gamma_nonres == 0.8
    assert result.beta == pytest.approx(4.9 / 5.7)
    assert result.purcell == pytest.approx(5.7 / 1.1)
    assert result.n_points_in_gap == 2
    assert result.lower_bound_flag


def test_extract_beta_ignores_unconverged_points():
    series = make_series(
        "QD3",
        [-0.5, 0.8, 2.5, -1.0],
        [9.9, 1.4, 0.8, 5.7],
        converged=[False, True, True, True],
    )
    result = extract_beta(series, gamma_0=1.1)
    assert result.gamma_res == 5.7  # the 9.9 outlier never converged


def test_extract_beta_requirements():
    good = make_series("x", [-1.0, 0.5, 1.0], [3.0, 1.0, 0.9])
    with pytest.raises(ParameterError):
        extract_beta(good, gamma_0=0.0)
    with pytest.raises(ParameterError):
        extract_beta(make_series("x", [-1.0, 1.0], [3.0, 1.0]), 1.1)
    all_resonant = make_series("x", [-2.0, -1.0, -0.5], [2.0, 3.0, 4.0])
    with pytest.raises(InsufficientDetuningError):
        extract_beta(all_resonant, 1.1)


def test_beta_result_must_be_self_consistent():
    with pytest.raises(ParameterError):
        BetaResult(
            label="x",
            gamma_res=5.7,
            gamma_nonres=0.8,
            beta=0.5,  # does not match the rates
            purcell=5.18,
            n_points_in_gap=1,
        )


def test_series_round_trip_and_validation():
    series = make_series("QD1", [-1.0, 0.5, 2.0], [4.0, 1.5, 0.9],
                         converged=[True, False, True])
    clone = RateVsDetuning.from_dict(series.to_dict())
    assert clone == series
    assert len(clone.converged_points()) == 2
    with pytest.raises(ParameterError):
        RateVsDetuning(label="bad", points=({"detuning_nm": 0.0},))


def test_rate_model_free_fit_recovers_truth(model_series, toy_curve):
    fit = fit_rate_model(model_series, toy_curve, gamma_0=1.1)
    assert fit.converged
    assert fit.coupling_scale == pytest.approx(TRUE_MODEL["coupling_scale"], rel=1e-3)
    assert fit.gamma_bg == pytest.approx(TRUE_MODEL["gamma_bg"], rel=1e-3)
    assert fit.broadening_fwhm == pytest.approx(
        TRUE_MODEL["broadening_fwhm"], rel=1e-2
    )
    assert fit.diagnostics["mode"] == "free-broadening"


def test_rate_model_fixed_broadening_is_exact(model_series, toy_curve):
    fit = fit_rate_model(
        model_series, toy_curve, gamma_0=1.1,
        fixed_broadening=TRUE_MODEL["broadening_fwhm"],
    )
    assert fit.coupling_scale == pytest.approx(TRUE_MODEL["coupling_scale"], abs=1e-9)
    assert fit.gamma_bg == pytest.approx(TRUE_MODEL["gamma_bg"], abs=1e-9)
    assert fit.residual < 1e-12
    assert fit.diagnostics["mode"] == "fixed-broadening"


def test_free_fit_never_loses_to_a_grid_point(model_series, toy_curve):
    free = fit_rate_model(model_series, toy_curve, gamma_0=1.1)
    for g in BROADENING_GRID[::4]:
        pinned = fit_rate_model(
            model_series, toy_curve, gamma_0=1.1, fixed_broadening=float(g)
        )
        assert free.residual <= pinned.residual + 1e-12


def test_rate_model_input_validation(model_series, toy_curve):
    with pytest.raises(ParameterError):
        fit_rate_model(model_series, toy_curve, gamma_0=-1.0)
    short = make_series("x", [-1.0, -0.5, 0.5, 1.0], [3.0, 4.0, 1.0, 0.9])
    with pytest.raises(ParameterError):
        fit_rate_model(short, toy_curve, gamma_0=1.1)
    one_sided = make_series(
        "x", [-3.0, -2.0, -1.0, -0.5, -0.2], [2.0, 2.5, 3.0, 4.0, 6.0]
    )
    with pytest.raises(SpanError):
        fit_rate_model(one_sided, toy_curve, gamma_0=1.1)
    bad_sigma = make_series(
        "x", [-2.0, -1.0, -0.5, 0.5, 1.0], [3.0, 3.5, 4.0, 1.0, 0.9],
        sigma=0.0,
    )
    with pytest.raises(ParameterError):
        fit_rate_model(bad_sigma, toy_curve, gamma_0=1.1)


def test_multi_dot_report_keeps_far_detuned_emitters():
    near = make_series("QD1", [-1.0, 0.5, 1.5], [5.0, 1.2, 0.9])
    far = make_series("QD9", [-20.0, -18.0, -15.0], [1.1, 1.0, 1.05])
    report = multi_dot_report([near, far], gamma_0=1.1)
    assert len(report.rows) == 2
    assert report.rows[0].result is not None
    assert report.rows[1].result is None
    assert "broadband" in report.rows[1].note
    assert report.rows[1].mean_rate == pytest.approx(np.mean([1.1, 1.0, 1.05]))
    assert report.beta_min == report.beta_max == report.rows[0].result.beta


def test_report_dict_and_text():
    near = make_series("QD1", [-1.0, 0.5, 1.5], [5.0, 1.2, 0.9])
    other = make_series("QD2", [-1.0, 0.4, 1.2], [4.0, 1.5, 1.2])
    report = multi_dot_report([near, other], gamma_0=1.1)
    record = report.to_dict()
    assert [row["label"] for row in record["rows"]] == ["QD1", "QD2"]
    assert record["beta_min"] == pytest.approx(min(r.result.beta for r in report.rows))
    text = format_report(report)
    assert "lower bound" in text
    assert "beta range" in text
    assert "QD2" in text
