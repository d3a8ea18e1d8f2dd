"""FastAPI application over the core toolkit.

Every endpoint converts its request body to core types, calls one core
function, and converts the result back. No physics lives here. Toolkit
errors map to 422 responses carrying the error class name.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI
from fastapi.requests import Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..bands import (
    calibrate_effective_index,
    extract_guided_band,
    solve_band_structure,
)
from ..beta import extract_beta, fit_rate_model, format_report, multi_dot_report
from ..decayfit import fit_decay, fitted_curve, rate_series
from ..emission import (
    RateModelConfig,
    beta_factor,
    broadened_rate_curve,
    lossless_rate_curve,
    purcell_factor,
)
from ..errors import ParameterError, PhcBetaError
from ..scenario import build_reference_waveguide, run_four_dot_report, run_qd3_scenario
from ..spectrum import detect_peaks, fit_spectrum
from ..tcspc import simulate_decay
from ..tuning import fit_tuning, resonance_temperature
from .schemas import (
    BandsRequest,
    CalibrateRequest,
    DispersionModel,
    ExtractBetaRequest,
    HeadlineRequest,
    FitBatchRequest,
    FitDecayRequest,
    FitRateModelRequest,
    FitSpectrumRequest,
    FitTuningRequest,
    GeometryModel,
    HistogramModel,
    RateCurveRequest,
    ReportRequest,
    ResonanceRequest,
    ScenarioRequest,
    SeriesModel,
    SimulateDecayRequest,
    SpectralFitModel,
    TuningCurveModel,
)


def _rate_fit_payload(fit) -> dict:
    return {
        "coupling_scale": fit.coupling_scale,
        "gamma_bg": fit.gamma_bg,
        "broadening_fwhm": fit.broadening_fwhm,
        "residual": fit.residual,
        "converged": fit.converged,
        "diagnostics": fit.diagnostics,
    }


def _fitted_rate_curve(curve, fit, gamma_0: float, detunings) -> dict:
    """Fitted model sampled on a fine detuning grid, for plot overlays."""
    det = np.asarray(detunings, dtype=float)
    grid = np.linspace(det.min(), det.max(), 201)
    config = RateModelConfig(
        coupling_scale=fit.coupling_scale,
        gamma_bg=fit.gamma_bg,
        gamma_0=gamma_0,
        broadening_fwhm=fit.broadening_fwhm,
    )
    rc = broadened_rate_curve(curve, config, curve.band_edge_wavelength_nm + grid)
    return {"detuning_nm": grid.tolist(), "gamma_tot": rc.gamma_tot.tolist()}


def create_app() -> FastAPI:
    app = FastAPI(title="phcbeta", version=__version__)

    @app.exception_handler(PhcBetaError)
    async def _domain_error(request: Request, exc: PhcBetaError) -> JSONResponse:
        return JSONResponse(
            status_code=422,
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/bands/solve")
    def bands_solve(body: BandsRequest) -> dict:
        geometry = body.geometry.to_core()
        curve = extract_guided_band(solve_band_structure(geometry))
        return {"dispersion": DispersionModel.from_core(curve).model_dump()}

    @app.post("/bands/calibrate")
    def bands_calibrate(body: CalibrateRequest) -> dict:
        result = calibrate_effective_index(
            body.geometry.to_core(),
            body.target_wavelength_nm,
            tolerance_nm=body.tolerance_nm,
        )
        return {
            "effective_index": result.effective_index,
            "band_edge_wavelength_nm": result.band_edge_wavelength_nm,
            "residual_nm": result.residual_nm,
            "iterations": result.iterations,
            "target_nm": result.target_nm,
        }

    @app.post("/rates/curve")
    def rates_curve(body: RateCurveRequest) -> dict:
        curve = body.dispersion.to_core()
        config = body.config.to_core()
        wl = None if body.wavelengths_nm is None else np.asarray(body.wavelengths_nm)
        if config.broadening_fwhm > 0:
            rc = broadened_rate_curve(curve, config, wl)
        elif wl is None:
            raise ParameterError(
                "the unbroadened model needs explicit wavelengths_nm"
            )
        else:
            rc = lossless_rate_curve(curve, config, wl)
        return {
            "wavelength_nm": rc.wavelength_nm.tolist(),
            "detuning_nm": rc.detuning_nm.tolist(),
            "gamma_tot": rc.gamma_tot.tolist(),
            "band_edge_wavelength_nm": rc.band_edge_wavelength_nm,
        }

    @app.post("/decay/simulate")
    def decay_simulate(body: SimulateDecayRequest) -> dict:
        hist, expected = simulate_decay(
            body.params.to_core(),
            body.irf.to_core(),
            body.acquisition.to_core(),
            seed=body.seed,
        )
        return {
            "histogram": HistogramModel.from_core(hist).model_dump(),
            "expected": expected.tolist(),
            "time_ns": hist.bin_centers_ns.tolist(),
        }

    @app.post("/decay/fit")
    def decay_fit(body: FitDecayRequest) -> dict:
        hist = body.histogram.to_core()
        result = fit_decay(hist, restart_seed=body.restart_seed)
        return {
            "fit": result.to_dict(),
            "total_counts": hist.total_counts,
            "time_ns": hist.bin_centers_ns.tolist(),
            "model": fitted_curve(hist, result).tolist(),
        }

    @app.post("/decay/fit-batch")
    def decay_fit_batch(body: FitBatchRequest) -> dict:
        tagged = [(item.tag, item.histogram.to_core()) for item in body.items]
        entries = rate_series(tagged, restart_seed=body.restart_seed)
        return {
            "entries": [
                {
                    "tag": e.tag,
                    "gamma_tot": e.gamma_tot,
                    "sigma": e.sigma,
                    "converged": e.converged,
                    "model_selected": e.model_selected,
                    "low_statistics": e.low_statistics,
                    "total_counts": e.total_counts,
                }
                for e in entries
            ]
        }

    @app.post("/spectrum/fit")
    def spectrum_fit(body: FitSpectrumRequest) -> dict:
        spec = body.spectrum.to_core()
        candidates = body.candidates
        if candidates is None:
            prominence = body.min_prominence
            if prominence is None:
                prominence = 0.05 * float(np.max(spec.intensity))
            candidates = detect_peaks(spec, prominence)
        model = fit_spectrum(spec, candidates, fit_gaussian=body.fit_gaussian)
        return {
            "model": SpectralFitModel.from_core(model).model_dump(),
            "candidates": [float(c) for c in candidates],
        }

    @app.post("/tuning/fit")
    def tuning_fit(body: FitTuningRequest) -> dict:
        curve = fit_tuning(
            np.asarray(body.temperatures_K),
            np.asarray(body.wavelengths_nm),
            label=body.label,
        )
        return {"curve": TuningCurveModel.from_core(curve).model_dump()}

    @app.post("/tuning/resonance")
    def tuning_resonance(body: ResonanceRequest) -> dict:
        result = resonance_temperature(body.qd.to_core(), body.edge.to_core())
        return {
            "primary_K": result.primary_K,
            "roots_K": list(result.roots_K),
            "degenerate": result.degenerate,
            "domain": list(result.domain),
        }

    @app.post("/beta/extract")
    def beta_extract(body: ExtractBetaRequest) -> dict:
        result = extract_beta(body.series.to_core(), body.gamma_0)
        return {"result": result.to_dict()}

    @app.post("/beta/fit-model")
    def beta_fit_model(body: FitRateModelRequest) -> dict:
        series = body.series.to_core()
        curve = body.dispersion.to_core()
        fit = fit_rate_model(
            series, curve, body.gamma_0, fixed_broadening=body.fixed_broadening
        )
        detunings = [p.detuning_nm for p in series.points]
        return {
            "fit": _rate_fit_payload(fit),
            "model_curve": _fitted_rate_curve(curve, fit, body.gamma_0, detunings),
        }

    @app.post("/beta/headline")
    def beta_headline(body: HeadlineRequest) -> dict:
        return {
            "beta": beta_factor(body.gamma_res, body.gamma_nonres),
            "purcell": purcell_factor(body.gamma_res, body.gamma_0),
        }

    @app.post("/beta/report")
    def beta_report(body: ReportRequest) -> dict:
        report = multi_dot_report(
            [s.to_core() for s in body.series_list], body.gamma_0
        )
        return {"report": report.to_dict(), "text": format_report(report)}

    @app.post("/scenario/qd3")
    def scenario_qd3(body: ScenarioRequest) -> dict:
        _, curve, calibration = build_reference_waveguide(
            effective_index=body.effective_index
        )
        result = run_qd3_scenario(curve, seed=body.seed, gamma_0=body.gamma_0)
        return {
            "checks": result.checks,
            "broadening_fwhm": result.broadening_fwhm,
            "series": SeriesModel.from_core(result.series).model_dump(),
            "beta": result.beta_recovered.to_dict(),
            "rate_fit": _rate_fit_payload(result.rate_fit),
            "model_curve": _fitted_rate_curve(
                curve,
                result.rate_fit,
                body.gamma_0,
                result.truth.detunings_nm,
            ),
            "truth": {
                "detunings_nm": list(result.truth.detunings_nm),
                "rates": list(result.truth.rates),
                "beta_injected": result.truth.beta_injected,
            },
            "effective_index": curve.effective_index,
            "calibrated": calibration is not None,
        }

    @app.post("/scenario/four-dot")
    def scenario_four_dot(body: ScenarioRequest) -> dict:
        _, curve, _ = build_reference_waveguide(
            effective_index=body.effective_index
        )
        result = run_four_dot_report(curve, seed=body.seed, gamma_0=body.gamma_0)
        return {
            "report": result.report.to_dict(),
            "text": format_report(result.report),
            "broadening_fwhm": result.broadening_fwhm,
            "truths": [
                {
                    "label": t.label,
                    "beta_injected": t.beta_injected,
                    "coupling_scale": t.config.coupling_scale,
                }
                for t in result.truths
            ],
        }

    return app
