from __future__ import annotations

import numpy as np
import pytest
from fastapi.testclient import TestClient

from phcbeta import __version__
from phcbeta.bands import WaveguideGeometry, build_dispersion_curve
from phcbeta.service import create_app
from phcbeta.service.schemas import DispersionModel

from oracles import quadratic_band


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app()) as c:
        yield c


@pytest.fixture(scope="module")
def dispersion_payload():
    k, freq, _ = quadratic_band(0.26, 0.4)
    curve = build_dispersion_curve(k, freq, WaveguideGeometry())
    return DispersionModel.from_core(curve).model_dump()


def simulate(client, seed=3, **params):
    params = {"amp_fast": 0.8, "gamma_fast": 2.0, "amp_slow": 0.2,
              "gamma_slow": 0.5, **params}
    resp = client.post("/decay/simulate", json={"params": params, "seed": seed})
    assert resp.status_code == 200
    return resp.json()


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok", "version": __version__}


def test_malformed_body_is_a_422(client):
    resp = client.post("/decay/simulate", json={"params": {"amp_fast": 1.0}})
    assert resp.status_code == 422  # missing gamma_fast and seed


def test_domain_errors_map_to_structured_422(client):
    resp = client.post(
        "/beta/headline", json={"gamma_res": 0.8, "gamma_nonres": 5.7}
    )
    assert resp.status_code == 422
    body = resp.json()
    assert body["error"] == "OrderingError"
    assert "gamma_res" in body["message"]


def test_simulate_then_fit_round_trip(client):
    sim = simulate(client)
    assert len(sim["histogram"]["counts"]) == 526
    assert sim["histogram"]["seed"] == 3
    assert np.isclose(sum(sim["expected"]), 1e5)

    resp = client.post("/decay/fit", json={"histogram": sim["histogram"]})
    assert resp.status_code == 200
    out = resp.json()
    assert out["fit"]["model_selected"] == "bi"
    assert out["fit"]["gamma_fast"] == pytest.approx(2.0, rel=0.05)
    assert len(out["model"]) == 526
    assert out["total_counts"] == sum(sim["histogram"]["counts"])


def test_batch_fit_preserves_tags(client):
    fast = simulate(client, seed=20, gamma_fast=3.0, amp_slow=0.0, gamma_slow=0.0)
    slow = simulate(client, seed=21, gamma_fast=0.9, amp_slow=0.0, gamma_slow=0.0)
    resp = client.post(
        "/decay/fit-batch",
        json={
            "items": [
                {"tag": {"temperature_K": 15.0}, "histogram": fast["histogram"]},
                {"tag": "slow", "histogram": slow["histogram"]},
            ]
        },
    )
    assert resp.status_code == 200
    entries = resp.json()["entries"]
    assert entries[0]["tag"] == {"temperature_K": 15.0}
    assert entries[1]["tag"] == "slow"
    assert entries[0]["gamma_tot"] == pytest.approx(3.0, rel=0.05)
    assert entries[1]["gamma_tot"] == pytest.approx(0.9, rel=0.05)


def test_rates_curve_requires_wavelengths_without_broadening(
    client, dispersion_payload
):
    resp = client.post("/rates/curve", json={"dispersion": dispersion_payload})
    assert resp.status_code == 422
    assert resp.json()["error"] == "ParameterError"


def test_rates_curve_broadened_default_grid(client, dispersion_payload):
    resp = client.post(
        "/rates/curve",
        json={
            "dispersion": dispersion_payload,
            "config": {"broadening_fwhm": 2e-4},
        },
    )
    assert resp.status_code == 200
    out = resp.json()
    assert len(out["wavelength_nm"]) == 2001
    gam = np.array(out["gamma_tot"])
    assert np.all(np.isfinite(gam))
    assert gam.max() > 2.0


def test_spectrum_fit_with_auto_candidates(client):
    from phcbeta.spectrum import SpectralModel, evaluate_model

    wl = np.arange(963.0, 974.0, 0.05)
    truth = SpectralModel(
        lorentzians=((966.3, 0.2, 40.0), (969.8, 0.25, 30.0)),
        gaussian=(968.7, 2.0, 25.0),
        baseline=3.0,
    )
    rng = np.random.default_rng(1)
    intensity = np.clip(
        evaluate_model(truth, wl) + rng.normal(0, 1.5, wl.size), 0, None
    )
    resp = client.post(
        "/spectrum/fit",
        json={
            "spectrum": {
                "wavelength_nm": wl.tolist(),
                "intensity": intensity.tolist(),
            }
        },
    )
    assert resp.status_code == 200
    out = resp.json()
    assert len(out["candidates"]) == 2
    centers = sorted(l["center_nm"] for l in out["model"]["lorentzians"])
    assert centers[0] == pytest.approx(966.3, abs=0.05)
    assert centers[1] == pytest.approx(969.8, abs=0.05)
    assert out["model"]["gaussian"]["center_nm"] == pytest.approx(968.7, abs=0.1)


def test_tuning_fit_and_resonance(client):
    temps = np.arange(10.0, 61.0, 5.0)
    qd_wl = 967.0 + 0.05 * temps
    edge_wl = 968.05 + 0.02 * temps
    fit = lambda wl, label: client.post(
        "/tuning/fit",
        json={
            "temperatures_K": temps.tolist(),
            "wavelengths_nm": wl.tolist(),
            "label": label,
        },
    ).json()["curve"]
    qd, edge = fit(qd_wl, "qd"), fit(edge_wl, "edge")
    assert qd["coefficients"][1] == pytest.approx(0.05, abs=1e-9)
    resp = client.post("/tuning/resonance", json={"qd": qd, "edge": edge})
    assert resp.status_code == 200
    assert resp.json()["primary_K"] == pytest.approx(35.0, abs=1e-6)


def test_beta_extract_and_report(client):
    points = [
        {"detuning_nm": d, "gamma_tot": g, "sigma": 0.05, "temperature_K": t}
        for d, g, t in [(-2.0, 3.1, 15.0), (-0.5, 5.7, 22.0),
                        (0.8, 1.4, 30.0), (2.5, 0.8, 45.0)]
    ]
    series = {"label": "QD3", "points": points}
    resp = client.post("/beta/extract", json={"series": series})
    assert resp.status_code == 200
    result = resp.json()["result"]
    assert result["beta"] == pytest.approx(4.9 / 5.7)
    assert result["purcell"] == pytest.approx(5.7 / 1.1)

    resp = client.post("/beta/report", json={"series_list": [series]})
    assert resp.status_code == 200
    out = resp.json()
    assert "lower bound" in out["text"]
    assert out["report"]["rows"][0]["label"] == "QD3"


def test_beta_headline_values(client):
    resp = client.post(
        "/beta/headline", json={"gamma_res": 5.7, "gamma_nonres": 0.8}
    )
    out = resp.json()
    assert out["beta"] == pytest.approx(0.860, abs=0.015)
    assert out["purcell"] == pytest.approx(5.18, abs=0.01)


def test_beta_fit_model_recovers_injection(client, dispersion_payload):
    from phcbeta.emission import RateModelConfig, broadened_rate_curve

    k, freq, _ = quadratic_band(0.26, 0.4)
    curve = build_dispersion_curve(k, freq, WaveguideGeometry())
    config = RateModelConfig(
        coupling_scale=0.4, gamma_bg=0.8, gamma_0=1.1, broadening_fwhm=3e-4
    )
    det = np.array([-4.0, -2.5, -1.2, -0.4, 0.5, 1.5, 3.0])
    rates = broadened_rate_curve(
        curve, config, curve.band_edge_wavelength_nm + det
    ).gamma_tot
    series = {
        "label": "model",
        "points": [
            {"detuning_nm": float(d), "gamma_tot": float(g), "sigma": 0.05,
             "temperature_K": 20.0}
            for d, g in zip(det, rates)
        ],
    }
    resp = client.post(
        "/beta/fit-model",
        json={"series": series, "dispersion": dispersion_payload},
    )
    assert resp.status_code == 200
    out = resp.json()
    assert out["fit"]["coupling_scale"] == pytest.approx(0.4, rel=1e-2)
    assert out["fit"]["gamma_bg"] == pytest.approx(0.8, rel=1e-2)
    assert len(out["model_curve"]["detuning_nm"]) == 201
