"""File formats: geometry, dispersion, rate curves, histograms, spectra,
tuning data, fit results.

Every writer goes through an atomic write-then-rename so a crashed run never
leaves a torn file, and floats are formatted identically from run to run so
seeded outputs are byte-stable.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .bands import DispersionCurve, WaveguideGeometry
from .errors import OutOfDomainError, ParameterError
from .spectrum import SpectralModel, Spectrum
from .tcspc import AcquisitionConfig, DecayHistogram, InstrumentResponse
from .tuning import TuningCurve

FLOAT_FORMAT = "{:.12g}"


def atomic_write_text(path, text: str) -> Path:
    """Write text to ``path`` via a same-directory temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def dump_json(path, obj) -> Path:
    return atomic_write_text(
        path, json.dumps(obj, indent=2, sort_keys=True) + "\n"
    )


def load_json(path) -> dict:
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


def _fmt(value: float) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ""
    if np.isinf(value):
        return "inf" if value > 0 else "-inf"
    return FLOAT_FORMAT.format(float(value))


def _write_csv(path, header: list[str], rows) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return atomic_write_text(path, buf.getvalue())


# geometry ------------------------------------------------------------------

_GEOMETRY_FIELDS = {
    "lattice_constant": float,
    "hole_radius_ratio": float,
    "effective_index": float,
    "supercell_rows": int,
    "membrane_thickness": float,
    "waveguide_length_note": str,
}


def load_geometry(path) -> WaveguideGeometry:
    """Geometry from JSON or from `key = value` text; field names match
    WaveguideGeometry exactly."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        raw = json.loads(text)
        if not isinstance(raw, dict):
            raise ParameterError(f"{path}: geometry JSON must be an object")
    else:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            for sep in ("=", ":"):
                if sep in line:
                    key, _, value = line.partition(sep)
                    raw[key.strip()] = value.strip()
                    break
            else:
                raise ParameterError(
                    f"{path}:{lineno}: expected `key = value`, got {line!r}"
                )
    kwargs = {}
    for key, value in raw.items():
        if key not in _GEOMETRY_FIELDS:
            raise ParameterError(f"{path}: unknown geometry field {key!r}")
        kwargs[key] = _GEOMETRY_FIELDS[key](value)
    return WaveguideGeometry(**kwargs)


def dump_geometry(path, geometry: WaveguideGeometry) -> Path:
    return dump_json(
        path,
        {
            "lattice_constant": geometry.lattice_constant,
            "hole_radius_ratio": geometry.hole_radius_ratio,
            "effective_index": geometry.effective_index,
            "supercell_rows": geometry.supercell_rows,
            "membrane_thickness": geometry.membrane_thickness,
            "waveguide_length_note": geometry.waveguide_length_note,
        },
    )


# dispersion ----------------------------------------------------------------

DISPERSION_HEADER = ["k_2pi_over_a", "freq_a_over_lambda", "wavelength_nm",
                     "group_index"]


def write_dispersion_csv(path, curve: DispersionCurve) -> Path:
    """Tabulated guided band; group_index left empty where undefined."""
    from .bands import group_index

    rows = []
    for k, freq in zip(curve.points_k, curve.points_freq):
        lam = curve.lattice_constant / freq
        try:
            ng = group_index(curve, freq)
            ng_cell = "" if np.isinf(ng) else _fmt(float(ng))
        except OutOfDomainError:
            ng_cell = ""
        rows.append([_fmt(float(k)), _fmt(float(freq)), _fmt(float(lam)), ng_cell])
    return _write_csv(path, DISPERSION_HEADER, rows)


def dump_dispersion_json(path, curve: DispersionCurve) -> Path:
    return dump_json(path, curve.to_dict())


def load_dispersion_json(path) -> DispersionCurve:
    return DispersionCurve.from_dict(load_json(path))


# rate curves ---------------------------------------------------------------

RATE_HEADER = ["wavelength_nm", "detuning_nm", "gamma_tot_per_ns"]


def write_rate_csv(path, rate_curve) -> Path:
    rows = [
        [_fmt(float(w)), _fmt(float(d)), _fmt(float(g))]
        for w, d, g in zip(
            rate_curve.wavelength_nm, rate_curve.detuning_nm, rate_curve.gamma_tot
        )
    ]
    return _write_csv(path, RATE_HEADER, rows)


# histograms ----------------------------------------------------------------

HISTOGRAM_HEADER = ["time_ns", "counts"]


def write_histogram(csv_path, hist: DecayHistogram, *, sidecar_path=None) -> tuple:
    """Histogram CSV plus JSON sidecar (IRF, acquisition, seed)."""
    csv_path = Path(csv_path)
    if sidecar_path is None:
        sidecar_path = csv_path.with_suffix(".json")
    rows = [
        [_fmt(float(t)), str(int(round(c)))]
        for t, c in zip(hist.bin_centers_ns, hist.counts)
    ]
    _write_csv(csv_path, HISTOGRAM_HEADER, rows)
    irf = hist.irf
    sidecar = {
        "irf": {
            "fwhm_ps": irf.fwhm_ps,
            "t0_ns": irf.t0_ns,
            "table": None
            if irf.table is None
            else {
                "times_ns": [float(t) for t in irf.table[0]],
                "amplitudes": [float(a) for a in irf.table[1]],
            },
        },
        "acquisition": {
            "repetition_period_ns": hist.config.repetition_period_ns,
            "bin_width_ps": hist.config.bin_width_ps,
            "n_bins": hist.config.resolved_bins,
            "total_signal_counts": hist.config.total_signal_counts,
            "background_rate": hist.config.background_rate,
        },
        "seed": hist.seed,
    }
    dump_json(sidecar_path, sidecar)
    return csv_path, Path(sidecar_path)


def load_histogram(csv_path, sidecar_path=None) -> DecayHistogram:
    csv_path = Path(csv_path)
    if sidecar_path is None:
        sidecar_path = csv_path.with_suffix(".json")
    meta = load_json(sidecar_path)
    irf_meta = meta["irf"]
    table = irf_meta.get("table")
    irf = InstrumentResponse(
        fwhm_ps=float(irf_meta["fwhm_ps"]),
        t0_ns=float(irf_meta["t0_ns"]),
        table=None
        if table is None
        else (np.asarray(table["times_ns"]), np.asarray(table["amplitudes"])),
    )
    acq = meta["acquisition"]
    config = AcquisitionConfig(
        repetition_period_ns=float(acq["repetition_period_ns"]),
        bin_width_ps=float(acq["bin_width_ps"]),
        n_bins=int(acq["n_bins"]),
        total_signal_counts=float(acq["total_signal_counts"]),
        background_rate=float(acq["background_rate"]),
    )
    counts = []
    with open(csv_path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header != HISTOGRAM_HEADER:
            raise ParameterError(
                f"{csv_path}: expected header {HISTOGRAM_HEADER}, got {header}"
            )
        for row in reader:
            counts.append(float(row[1]))
    counts = np.asarray(counts)
    if counts.size != config.resolved_bins:
        raise ParameterError(
            f"{csv_path}: {counts.size} rows but sidecar declares "
            f"{config.resolved_bins} bins"
        )
    return DecayHistogram(
        bin_edges_ns=config.bin_edges_ns,
        counts=counts,
        irf=irf,
        config=config,
        seed=meta.get("seed"),
    )


def read_batch_manifest(path) -> list:
    """Batch fit input: JSON list of {"file": ..., "tag": {...}} records.

    Returns (tag, histogram) pairs in file order. Paths are resolved
    relative to the manifest's directory.
    """
    path = Path(path)
    records = load_json(path)
    if not isinstance(records, list):
        raise ParameterError(f"{path}: batch manifest must be a JSON list")
    out = []
    for i, rec in enumerate(records):
        if "file" not in rec:
            raise ParameterError(f"{path}: record {i} lacks a 'file' key")
        csv_path = path.parent / rec["file"]
        sidecar = rec.get("sidecar")
        sidecar_path = path.parent / sidecar if sidecar else None
        hist = load_histogram(csv_path, sidecar_path)
        out.append((rec.get("tag", {}), hist))
    return out


# spectra -------------------------------------------------------------------

SPECTRUM_HEADER = ["wavelength_nm", "intensity"]


def write_spectrum_csv(path, spectrum: Spectrum) -> Path:
    rows = [
        [_fmt(float(w)), _fmt(float(i))]
        for w, i in zip(spectrum.wavelength_nm, spectrum.intensity)
    ]
    return _write_csv(path, SPECTRUM_HEADER, rows)


def load_spectrum_csv(path) -> Spectrum:
    wl, inten = [], []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header != SPECTRUM_HEADER:
            raise ParameterError(
                f"{path}: expected header {SPECTRUM_HEADER}, got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            try:
                wl.append(float(row[0]))
                inten.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise ParameterError(f"{path}:{lineno}: bad row {row!r}") from exc
    return Spectrum(wavelength_nm=np.asarray(wl), intensity=np.asarray(inten))


def dump_spectral_model_json(path, model: SpectralModel) -> Path:
    return dump_json(path, model.to_dict())


# tuning --------------------------------------------------------------------

TUNING_HEADER = ["temperature_K", "wavelength_nm"]


def load_tuning_csv(path) -> tuple:
    temps, wl = [], []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header != TUNING_HEADER:
            raise ParameterError(
                f"{path}: expected header {TUNING_HEADER}, got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            try:
                temps.append(float(row[0]))
                wl.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise ParameterError(f"{path}:{lineno}: bad row {row!r}") from exc
    return np.asarray(temps), np.asarray(wl)


def write_tuning_csv(path, temperatures_K, wavelengths_nm) -> Path:
    rows = [
        [_fmt(float(t)), _fmt(float(w))]
        for t, w in zip(temperatures_K, wavelengths_nm)
    ]
    return _write_csv(path, TUNING_HEADER, rows)


def dump_tuning_curve_json(path, curve: TuningCurve) -> Path:
    return dump_json(path, curve.to_dict())


def load_tuning_curve_json(path) -> TuningCurve:
    return TuningCurve.from_dict(load_json(path))
