from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from phcbeta.errors import (
    ExtrapolationWarning,
    NoCrossingError,
    ParameterError,
    RankDeficiencyError,
)
from phcbeta.tuning import (
    DetuningEntry,
    DetuningSeries,
    TuningCurve,
    detuning_series,
    fit_tuning,
    resonance_temperature,
    shift_rate,
)

TEMPS = np.linspace(10.0, 60.0, 26)


def quadratic(c0, c1, c2, label="curve"):
    return TuningCurve(label=label, coefficients=(c0, c1, c2), domain=(10.0, 60.0))


def test_exact_quadratic_recovery():
    coeffs = (966.31, 0.0482, 2.1e-4)
    wl = coeffs[0] + coeffs[1] * TEMPS + coeffs[2] * TEMPS**2
    curve = fit_tuning(TEMPS, wl, label="qd")
    assert curve.label == "qd"
    assert curve.fit_rms < 1e-9
    for got, want in zip(curve.coefficients, coeffs):
        assert got == pytest.approx(want, abs=1e-9)
    assert curve.domain == (10.0, 60.0)


@given(
    c0=st.floats(min_value=900.0, max_value=1000.0),
    c1=st.floats(min_value=-0.1, max_value=0.1),
    c2=st.floats(min_value=-0.01, max_value=0.01),
)
def test_fit_reproduces_any_quadratic(c0, c1, c2):
    wl = c0 + c1 * TEMPS + c2 * TEMPS**2
    curve = fit_tuning(TEMPS, wl)
    probe = np.array([12.5, 31.0, 57.5])
    want = c0 + c1 * probe + c2 * probe**2
    assert np.max(np.abs(curve.evaluate(probe) - want)) < 1e-7


def test_fit_under_noise_recovers_shift_rate():
    truth = (967.0, 0.050, 1.0e-4)
    for seed in range(10):
        noise = np.random.default_rng(seed).normal(0.0, 0.02, TEMPS.size)
        wl = truth[0] + truth[1] * TEMPS + truth[2] * TEMPS**2 + noise
        curve = fit_tuning(TEMPS, wl)
        mid = 35.0
        want = truth[1] + 2.0 * truth[2] * mid
        assert abs(shift_rate(curve, mid) - want) < 0.005


def test_fit_rejects_rank_deficient_designs():
    with pytest.raises(RankDeficiencyError):
        fit_tuning([10.0, 10.0, 10.0, 20.0], [1.0, 1.0, 1.0, 2.0])
    with pytest.raises(ParameterError):
        fit_tuning([10.0, 20.0], [1.0, 2.0, 3.0])


def test_resonance_exact_quadratic():
    qd = quadratic(967.0, 0.05, 2.0e-4, "qd")
    edge = quadratic(968.05, 0.02, 5.0e-5, "edge")
    d2, d1, d0 = 1.5e-4, 0.03, -1.05
    t_true = (-d1 + np.sqrt(d1 * d1 - 4 * d2 * d0)) / (2 * d2)
    result = resonance_temperature(qd, edge)
    assert not result.degenerate
    assert result.primary_K == pytest.approx(t_true, abs=1e-9)
    assert result.domain == (10.0, 60.0)


def test_resonance_reports_both_in_domain_roots():
    qd = quadratic(970.0, 0.0, 0.0, "qd")
    # difference 1e-3 (T - 20)(T - 40) has both roots inside the domain
    edge = quadratic(970.0 - 0.8, 0.06, -1.0e-3, "edge")
    result = resonance_temperature(qd, edge)
    assert result.roots_K == pytest.approx((20.0, 40.0), abs=1e-9)
    assert result.primary_K == pytest.approx(20.0, abs=1e-9)


def test_resonance_degenerate_curves():
    qd = quadratic(967.0, 0.05, 1e-4)
    twin = quadratic(967.0, 0.05, 1e-4)
    result = resonance_temperature(qd, twin)
    assert result.degenerate
    assert result.primary_K is None
    assert result.roots_K == ()


def test_resonance_failure_modes():
    base = quadratic(967.0, 0.05, 0.0)
    with pytest.raises(NoCrossingError):  # parallel offset
        resonance_temperature(base, quadratic(968.0, 0.05, 0.0))
    with pytest.raises(NoCrossingError):  # no real root
        resonance_temperature(
            quadratic(970.0, 0.0, 1e-3), quadratic(969.0, 0.0, 0.0)
        )
    with pytest.raises(NoCrossingError):  # crossing beyond the domain
        resonance_temperature(base, quadratic(966.0, 0.06, 0.0))
    far = TuningCurve("far", (967.0, 0.05, 0.0), (100.0, 200.0))
    with pytest.raises(NoCrossingError):  # domains do not overlap
        resonance_temperature(base, far)


def test_evaluate_warns_only_outside_domain():
    curve = quadratic(967.0, 0.05, 0.0)
    with warnings.catch_warnings(record=True) as seen:
        warnings.simplefilter("always")
        curve.evaluate(30.0)
        curve.evaluate(80.0, warn=False)
    assert not seen
    with pytest.warns(ExtrapolationWarning):
        curve.evaluate(80.0)
    with pytest.warns(ExtrapolationWarning):
        shift_rate(curve, 5.0)


def test_detuning_series_consistency():
    qd = quadratic(967.0, 0.05, 0.0, "qd")
    edge = quadratic(968.05, 0.02, 0.0, "edge")
    series = detuning_series(qd, edge, [20.0, 35.0, 50.0, 75.0])
    assert np.allclose(
        series.detunings(),
        qd.evaluate(series.temperatures(), warn=False)
        - edge.evaluate(series.temperatures(), warn=False),
    )
    assert [e.in_domain for e in series.entries] == [True, True, True, False]
    # the sign convention: past the crossing (35 K) the emitter sits in the gap
    assert series.entries[0].detuning_nm < 0
    assert series.entries[2].detuning_nm > 0


def test_detuning_series_rejects_inconsistent_entries():
    entry = DetuningEntry(
        temperature_K=20.0,
        qd_wavelength_nm=968.0,
        band_edge_wavelength_nm=968.5,
        detuning_nm=+0.5,  # should be -0.5
        in_domain=True,
    )
    with pytest.raises(ParameterError):
        DetuningSeries(entries=(entry,))


def test_curve_round_trips_through_dict():
    curve = TuningCurve("edge", (968.05, 0.02, 5e-5), (8.0, 55.0), fit_rms=0.013)
    clone = TuningCurve.from_dict(curve.to_dict())
    assert clone == curve


def test_curve_validation():
    with pytest.raises(ParameterError):
        TuningCurve("bad", (1.0, 2.0), (10.0, 60.0))
    with pytest.raises(ParameterError):
        TuningCurve("bad", (1.0, 2.0, 3.0), (60.0, 10.0))
