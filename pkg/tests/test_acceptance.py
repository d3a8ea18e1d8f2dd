"""Acceptance gate: one test per headline requirement.

Each test prints a single ``criterion N: PASS/FAIL`` line (visible with
``pytest tests/test_acceptance.py -s``) and asserts the same condition, so
a FAIL line always comes with a failing test. Numbers quoted in the lines
are the published summary values the implementation must land on.
"""

from __future__ import annotations

import time

import numpy as np

from phcbeta.bands import (
    PlaneWaveBasis,
    WaveguideGeometry,
    calibrate_effective_index,
    group_index,
    solve_bands,
    zone_boundary_edge,
)
from phcbeta.decayfit import fit_decay
from phcbeta.emission import beta_factor, purcell_factor
from phcbeta.scenario import run_qd3_scenario
from phcbeta.spectrum import (
    SpectralModel,
    Spectrum,
    detect_peaks,
    evaluate_model,
    fit_spectrum,
)
from phcbeta.tcspc import (
    AcquisitionConfig,
    DecayParams,
    InstrumentResponse,
    simulate_decay,
)
from phcbeta.tuning import TuningCurve, fit_tuning, resonance_temperature


def report(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    print(line)
    assert passed, line


def test_criterion_1_headline_beta_and_purcell():
    beta = beta_factor(5.7, 0.8)
    purcell = purcell_factor(5.7, 1.1)
    ok = abs(beta - 0.860) <= 0.015 and abs(purcell - 5.18) <= 0.01
    report(1, ok, f"beta {beta:.4f} (0.860 +- 0.015), "
                  f"Purcell {purcell:.3f} (5.18 +- 0.01)")


def test_criterion_2_beta_vs_residual_background():
    b43 = beta_factor(5.7, 0.43)
    b05 = beta_factor(5.7, 0.05)
    ok = abs(b43 - 0.925) <= 0.01 and abs(b05 - 0.991) <= 0.01
    report(2, ok, f"beta at background 0.43 -> {b43 * 100:.1f}% (92.5 +- 1), "
                  f"at 0.05 -> {b05 * 100:.1f}% (99.1 +- 1)")


def test_criterion_3_band_solver_checks(reference_curve):
    # free-space limit: no holes leaves plane waves in a uniform slab
    uniform = WaveguideGeometry(hole_radius_ratio=0.0, supercell_rows=7)
    basis = PlaneWaveBasis.for_geometry(uniform, reciprocal_cutoff=3)
    worst = 0.0
    for k in (0.0, 0.17, 0.5):
        freqs = solve_bands(uniform, basis, k, n_bands=15)
        q = basis.g_reduced + np.array([k, 0.0])
        exact = np.sort(np.hypot(q[:, 0], q[:, 1]))[:15] / uniform.effective_index
        scale = np.maximum(exact, 1e-12)
        worst = max(worst, float(np.max(np.abs(freqs - exact) / scale)))

    # basis-size convergence of the band edge
    nominal = WaveguideGeometry()
    edge_4, _ = zone_boundary_edge(nominal)
    edge_8, _ = zone_boundary_edge(
        nominal, PlaneWaveBasis.for_geometry(nominal, reciprocal_cutoff=8)
    )
    shift = abs(edge_8 / edge_4 - 1.0)

    # band side of the edge; red of the edge wavelength is in the gap
    probe_nm = reference_curve.band_edge_wavelength_nm - 0.05
    ng = group_index(reference_curve, reference_curve.lattice_constant / probe_nm)

    ok = worst < 1e-9 and shift < 1e-3 and ng > 100.0
    report(3, ok, f"free-space limit rel err {worst:.2e} (< 1e-9), "
                  f"edge shift on basis doubling {shift * 100:.3f}% (< 0.1%), "
                  f"n_g {ng:.0f} at 0.05 nm from the edge (> 100)")


def test_criterion_4_edge_calibration():
    result = calibrate_effective_index(WaveguideGeometry(), 968.4)
    err = abs(result.band_edge_wavelength_nm - 968.4)
    ok = err <= 0.1
    report(4, ok, f"n_eff {result.effective_index:.6f} puts the edge at "
                  f"{result.band_edge_wavelength_nm:.3f} nm "
                  f"(968.4 +- 0.1, {result.iterations} iterations)")


def test_criterion_5_rate_recovery_statistics():
    irf = InstrumentResponse()  # 280 ps FWHM
    config = AcquisitionConfig()  # 76 MHz window, 1e5 counts
    start = time.monotonic()
    details = []
    ok = True
    for gamma_fast in (0.8, 2.0, 5.7):
        params = DecayParams(amp_fast=0.8, gamma_fast=gamma_fast,
                             amp_slow=0.2, gamma_slow=gamma_fast / 4.0)
        errors = np.empty(100)
        for trial in range(100):
            hist, _ = simulate_decay(params, irf, config, seed=trial)
            errors[trial] = fit_decay(hist).params.gamma_fast / gamma_fast - 1.0
        hits = int(np.count_nonzero(np.abs(errors) <= 0.05))
        bias = abs(float(np.median(errors)))
        ok = ok and hits >= 95 and bias < 0.02
        details.append(f"{gamma_fast}/ns {hits}/100 within 5%, "
                       f"median bias {bias * 100:.2f}%")
    elapsed = time.monotonic() - start
    ok = ok and elapsed < 600.0
    report(5, ok, "; ".join(details) + f"; {elapsed:.0f} s (< 600)")


def test_criterion_6_five_lines_and_band_edge():
    wavelength = np.arange(958.0, 978.0, 0.05)
    truth = SpectralModel(
        lorentzians=((962.4, 0.22, 55.0), (964.9, 0.30, 70.0),
                     (967.35, 0.18, 60.0), (970.1, 0.25, 80.0),
                     (973.6, 0.35, 65.0)),
        gaussian=(968.7, 2.4, 45.0),
        baseline=6.0,
    )
    clean = evaluate_model(truth, wavelength)
    # noise pinned so the weakest line peaks at exactly SNR 50
    peaks = [2.0 * area / (np.pi * width) for _, width, area in truth.lorentzians]
    noise = min(peaks) / 50.0
    want = sorted(center for center, _, _ in truth.lorentzians)

    worst_line, worst_edge, found = 0.0, 0.0, True
    for seed in range(10):
        rng = np.random.default_rng(seed)
        spec = Spectrum(wavelength, np.clip(
            clean + rng.normal(0.0, noise, wavelength.size), 0.0, None))
        model = fit_spectrum(
            spec, detect_peaks(spec, 0.05 * float(spec.intensity.max())))
        got = sorted(center for center, _, _ in model.lorentzians)
        if len(got) != 5 or model.gaussian is None:
            found = False
            break
        worst_line = max(worst_line,
                         max(abs(g - w) for g, w in zip(got, want)))
        worst_edge = max(worst_edge, abs(model.gaussian[0] - 968.7))

    ok = found and worst_line <= 0.05 and worst_edge <= 0.1
    report(6, ok, "5 lines recovered in 10/10 noise draws, "
                  f"worst line center err {worst_line * 1000:.1f} pm (<= 50), "
                  f"worst band-edge err {worst_edge * 1000:.1f} pm (<= 100)")


def test_criterion_7_resonance_temperature():
    qd = TuningCurve("qd", (967.0, 0.05, 2.0e-4), (10.0, 60.0))
    edge = TuningCurve("edge", (968.05, 0.02, 5.0e-5), (10.0, 60.0))
    c0, c1, c2 = (np.array(qd.coefficients) - edge.coefficients)
    exact = (-c1 + np.sqrt(c1 * c1 - 4.0 * c2 * c0)) / (2.0 * c2)
    exact_err = abs(resonance_temperature(qd, edge).primary_K - exact)

    temps = np.linspace(10.0, 60.0, 51)  # 1 K steps over the scan range
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        noisy_qd = fit_tuning(
            temps, np.polyval(qd.coefficients[::-1], temps)
            + rng.normal(0.0, 0.02, temps.size), label="qd")
        noisy_edge = fit_tuning(
            temps, np.polyval(edge.coefficients[::-1], temps)
            + rng.normal(0.0, 0.02, temps.size), label="edge")
        found = resonance_temperature(noisy_qd, noisy_edge).primary_K
        worst = max(worst, abs(found - exact))

    ok = exact_err < 1e-9 and worst <= 0.5
    report(7, ok, f"noiseless crossing err {exact_err:.1e} K (< 1e-9), "
                  f"worst of 20 draws at 0.02 nm noise {worst:.3f} K (<= 0.5)")


def test_criterion_8_end_to_end_scenario(reference_geometry):
    from phcbeta.bands import extract_guided_band, solve_band_structure

    start = time.monotonic()
    curve = extract_guided_band(solve_band_structure(reference_geometry))
    result = run_qd3_scenario(curve, seed=0)
    elapsed = time.monotonic() - start

    checks = result.checks
    ok = (checks["beta_within_0p02"] and checks["coupling_within_20pct"]
          and elapsed < 900.0)
    report(8, ok, f"recovered beta {checks['beta_recovered']:.4f} vs injected "
                  f"{checks['beta_injected']:.4f} (+- 0.02), fitted coupling "
                  f"{checks['coupling_fitted']:.4f} vs {checks['coupling_true']:.4f} "
                  f"(+- 20%), {elapsed:.0f} s (< 900)")


def test_criterion_9_raw_data_statement():
    report(9, True, "raw time-tag and spectrometer records were never "
                    "published, so recovery is checked against synthetic "
                    "data and the published summary numbers only")
