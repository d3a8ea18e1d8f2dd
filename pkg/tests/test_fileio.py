from __future__ import annotations

import json

import numpy as np
import pytest

from phcbeta import fileio
from phcbeta.bands import WaveguideGeometry, build_dispersion_curve
from phcbeta.emission import RateCurve
from phcbeta.errors import ParameterError
from phcbeta.spectrum import SpectralModel, Spectrum
from phcbeta.tcspc import (
    AcquisitionConfig,
    DecayParams,
    InstrumentResponse,
    simulate_decay,
)
from phcbeta.tuning import TuningCurve

from oracles import quadratic_band


def small_histogram(seed=5):
    config = AcquisitionConfig(n_bins=64, total_signal_counts=2e4)
    hist, _ = simulate_decay(
        DecayParams(1.0, 2.0), InstrumentResponse(t0_ns=0.4), config, seed=seed
    )
    return hist


def test_geometry_json_round_trip(tmp_path):
    geometry = WaveguideGeometry(effective_index=2.76, supercell_rows=9)
    path = fileio.dump_geometry(tmp_path / "geometry.json", geometry)
    assert fileio.load_geometry(path) == geometry


def test_geometry_key_value_format(tmp_path):
    path = tmp_path / "device.txt"
    path.write_text(
        "# nominal fabrication run\n"
        "lattice_constant = 256\n"
        "hole_radius_ratio : 0.30\n"
        "\n"
        "effective_index = 2.763457  # calibrated\n"
        "supercell_rows = 11\n"
    )
    geometry = fileio.load_geometry(path)
    assert geometry.lattice_constant == 256.0
    assert geometry.effective_index == 2.763457
    assert geometry.supercell_rows == 11


def test_geometry_errors_name_file_and_line(tmp_path):
    bad_line = tmp_path / "bad.txt"
    bad_line.write_text("lattice_constant = 256\nnot a key value pair\n")
    with pytest.raises(ParameterError, match=r"bad\.txt:2"):
        fileio.load_geometry(bad_line)

    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"hole_diameter": 120.0}))
    with pytest.raises(ParameterError, match="hole_diameter"):
        fileio.load_geometry(unknown)

    non_object = tmp_path / "list.json"
    non_object.write_text("{}")
    fileio.load_geometry(non_object)  # empty object means all defaults


def test_dispersion_csv_blanks_undefined_group_index(tmp_path):
    k, freq, _ = quadratic_band(0.26, 0.4)
    curve = build_dispersion_curve(k, freq, WaveguideGeometry())
    path = fileio.write_dispersion_csv(tmp_path / "dispersion.csv", curve)
    lines = path.read_text().splitlines()
    assert lines[0] == "k_2pi_over_a,freq_a_over_lambda,wavelength_nm,group_index"
    assert len(lines) == 1 + curve.points_k.size
    # the zone-boundary row has an infinite group index, written as empty
    assert lines[-1].endswith(",")
    first = lines[1].split(",")
    assert float(first[0]) == pytest.approx(curve.points_k[0])
    assert float(first[2]) == pytest.approx(256.0 / curve.points_freq[0])


def test_dispersion_json_round_trip(tmp_path):
    k, freq, _ = quadratic_band(0.26, 0.4)
    curve = build_dispersion_curve(
        k, freq, WaveguideGeometry(), gap_window=(0.25, 0.29)
    )
    path = fileio.dump_dispersion_json(tmp_path / "curve.json", curve)
    clone = fileio.load_dispersion_json(path)
    assert np.array_equal(clone.points_k, curve.points_k)
    assert np.array_equal(clone.ng_values, curve.ng_values)
    assert clone.gap_window == curve.gap_window


def test_rate_csv_writes_inf_for_the_edge(tmp_path):
    rc = RateCurve(
        wavelength_nm=np.array([960.0, 968.4]),
        detuning_nm=np.array([-8.4, 0.0]),
        gamma_tot=np.array([2.5, np.inf]),
        band_edge_wavelength_nm=968.4,
    )
    path = fileio.write_rate_csv(tmp_path / "rates.csv", rc)
    lines = path.read_text().splitlines()
    assert lines[0] == "wavelength_nm,detuning_nm,gamma_tot_per_ns"
    assert lines[2].split(",")[2] == "inf"


def test_histogram_round_trip_is_exact(tmp_path):
    hist = small_histogram()
    csv_path, sidecar = fileio.write_histogram(tmp_path / "decay.csv", hist)
    assert sidecar == tmp_path / "decay.json"
    loaded = fileio.load_histogram(csv_path)
    assert np.array_equal(loaded.counts, hist.counts)
    assert loaded.seed == hist.seed
    assert loaded.irf.t0_ns == hist.irf.t0_ns
    assert loaded.config.resolved_bins == 64
    assert loaded.config.total_signal_counts == 2e4


def test_histogram_mismatches_are_rejected(tmp_path):
    hist = small_histogram()
    csv_path, _ = fileio.write_histogram(tmp_path / "decay.csv", hist)
    lines = csv_path.read_text().splitlines()

    (tmp_path / "short.csv").write_text("\n".join(lines[:-3]) + "\n")
    with pytest.raises(ParameterError, match="rows"):
        fileio.load_histogram(tmp_path / "short.csv", tmp_path / "decay.json")

    lines[0] = "t,n"
    (tmp_path / "badheader.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(ParameterError, match="header"):
        fileio.load_histogram(tmp_path / "badheader.csv", tmp_path / "decay.json")


def test_batch_manifest_order_tags_and_relative_paths(tmp_path):
    sub = tmp_path / "runs"
    for i, seed in enumerate((5, 6)):
        fileio.write_histogram(sub / f"decay{i}.csv", small_histogram(seed))
    manifest = tmp_path / "batch.json"
    manifest.write_text(
        json.dumps(
            [
                {"file": "runs/decay0.csv", "tag": {"temperature_K": 20.0}},
                {"file": "runs/decay1.csv"},
            ]
        )
    )
    pairs = fileio.read_batch_manifest(manifest)
    assert len(pairs) == 2
    assert pairs[0][0] == {"temperature_K": 20.0}
    assert pairs[1][0] == {}
    assert pairs[0][1].seed == 5
    assert pairs[1][1].seed == 6


def test_batch_manifest_rejects_bad_shapes(tmp_path):
    not_list = tmp_path / "notlist.json"
    not_list.write_text("{}")
    with pytest.raises(ParameterError, match="list"):
        fileio.read_batch_manifest(not_list)
    missing = tmp_path / "missing.json"
    missing.write_text(json.dumps([{"tag": 1}]))
    with pytest.raises(ParameterError, match="file"):
        fileio.read_batch_manifest(missing)


def test_spectrum_csv_round_trip(tmp_path):
    wl = np.arange(960.0, 961.0, 0.05)
    spec = Spectrum(wl, np.linspace(1.0, 2.0, wl.size))
    path = fileio.write_spectrum_csv(tmp_path / "spec.csv", spec)
    loaded = fileio.load_spectrum_csv(path)
    assert np.allclose(loaded.wavelength_nm, spec.wavelength_nm)
    assert np.allclose(loaded.intensity, spec.intensity)


def test_spectrum_csv_parse_error_names_line(tmp_path):
    path = tmp_path / "spec.csv"
    path.write_text("wavelength_nm,intensity\n960.0,1.0\n960.05,oops\n")
    with pytest.raises(ParameterError, match=r"spec\.csv:3"):
        fileio.load_spectrum_csv(path)


def test_spectral_model_json(tmp_path):
    model = SpectralModel(
        lorentzians=((968.1, 0.2, 12.0),), gaussian=(968.7, 2.5, 8.0), baseline=1.0
    )
    path = fileio.dump_spectral_model_json(tmp_path / "model.json", model)
    assert SpectralModel.from_dict(fileio.load_json(path)) == model


def test_tuning_files_round_trip(tmp_path):
    temps = np.arange(10.0, 61.0, 5.0)
    wl = 967.0 + 0.05 * temps
    path = fileio.write_tuning_csv(tmp_path / "tuning.csv", temps, wl)
    t2, w2 = fileio.load_tuning_csv(path)
    assert np.allclose(t2, temps)
    assert np.allclose(w2, wl)

    curve = TuningCurve("qd", (967.0, 0.05, 0.0), (10.0, 60.0), fit_rms=0.01)
    json_path = fileio.dump_tuning_curve_json(tmp_path / "curve.json", curve)
    assert fileio.load_tuning_curve_json(json_path) == curve


def test_writes_are_atomic_and_overwrite(tmp_path):
    target = tmp_path / "out.json"
    fileio.dump_json(target, {"a": 1})
    fileio.dump_json(target, {"a": 2})
    assert fileio.load_json(target) == {"a": 2}
    leftovers = [p for p in tmp_path.iterdir() if p.suffix == ".tmp"]
    assert leftovers == []
