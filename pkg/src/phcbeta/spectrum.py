"""Photoluminescence spectrum decomposition.

Sharp emitter lines ride on a broad band-edge feature; the model is a sum of
Lorentzians (one per line, parameterized by center, FWHM and area) plus one
optional Gaussian (center, sigma, peak amplitude) over a constant baseline.
Peak detection seeds a bounded nonlinear least-squares fit. Lorentzian widths
are floored at half the 0.15 nm instrument resolution so a sparse grid cannot
collapse a line into a delta spike.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, signal

from .errors import AbsenceError, ConvergenceError, ParameterError

RESOLUTION_NM = 0.15
WIDTH_FLOOR_NM = 0.5 * RESOLUTION_NM
MIN_CENTER_SEPARATION_NM = 0.1
MAX_LORENTZIAN_FWHM_NM = 5.0
MAX_GAUSSIAN_SIGMA_NM = 20.0


@dataclass(frozen=True)
class Spectrum:
    """Measured or synthetic spectrum on a strictly increasing grid."""

    wavelength_nm: np.ndarray
    intensity: np.ndarray
    resolution_nm: float = RESOLUTION_NM

    def __post_init__(self):
        wl = np.asarray(self.wavelength_nm, dtype=float)
        inten = np.asarray(self.intensity, dtype=float)
        if wl.ndim != 1 or wl.size == 0:
            raise ParameterError("wavelength grid must be a non-empty 1-d array")
        if inten.shape != wl.shape:
            raise ParameterError("intensity and wavelength lengths differ")
        if np.any(np.diff(wl) <= 0):
            raise ParameterError("wavelengths must be strictly increasing")
        if np.any(inten < 0):
            raise ParameterError("intensities must be non-negative")
        object.__setattr__(self, "wavelength_nm", wl)
        object.__setattr__(self, "intensity", inten)


@dataclass(frozen=True)
class SpectralModel:
    """Fitted decomposition: Lorentzian lines + optional Gaussian + baseline."""

    lorentzians: tuple  # of (center_nm, fwhm_nm, area)
    gaussian: tuple | None  # (center_nm, sigma_nm, amplitude)
    baseline: float
    residual_rms: float | None = None

    def __post_init__(self):
        lor = tuple(
            (float(c), float(w), float(a)) for c, w, a in self.lorentzians
        )
        for _, w, a in lor:
            if w <= 0:
                raise ParameterError("lorentzian widths must be positive")
            if a < 0:
                raise ParameterError("lorentzian areas must be non-negative")
        centers = sorted(c for c, _, _ in lor)
        for lo, hi in zip(centers, centers[1:]):
            if hi - lo <= MIN_CENTER_SEPARATION_NM:
                raise ParameterError(
                    "lorentzian centers closer than "
                    f"{MIN_CENTER_SEPARATION_NM} nm: {lo} and {hi}"
                )
        if self.gaussian is not None:
            c, s, amp = self.gaussian
            if s <= 0:
                raise ParameterError("gaussian sigma must be positive")
            if amp < 0:
                raise ParameterError("gaussian amplitude must be non-negative")
            object.__setattr__(self, "gaussian", (float(c), float(s), float(amp)))
        if self.baseline < 0:
            raise ParameterError("baseline must be non-negative")
        object.__setattr__(self, "lorentzians", lor)

    def to_dict(self) -> dict:
        return {
            "lorentzians": [
                {"center_nm": c, "fwhm_nm": w, "area": a}
                for c, w, a in self.lorentzians
            ],
            "gaussian": None
            if self.gaussian is None
            else {
                "center_nm": self.gaussian[0],
                "sigma_nm": self.gaussian[1],
                "amplitude": self.gaussian[2],
            },
            "baseline": self.baseline,
            "residual_rms": self.residual_rms,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SpectralModel":
        gau = data.get("gaussian")
        return cls(
            lorentzians=tuple(
                (d["center_nm"], d["fwhm_nm"], d["area"])
                for d in data["lorentzians"]
            ),
            gaussian=None
            if gau is None
            else (gau["center_nm"], gau["sigma_nm"], gau["amplitude"]),
            baseline=float(data["baseline"]),
            residual_rms=data.get("residual_rms"),
        )


def lorentzian_profile(wavelength_nm, center_nm, fwhm_nm, area):
    """Area-normalized Lorentzian; peak height is 2*area/(pi*fwhm)."""
    x = (np.asarray(wavelength_nm, dtype=float) - center_nm) / (0.5 * fwhm_nm)
    return area * 2.0 / (np.pi * fwhm_nm) / (1.0 + x * x)


def gaussian_profile(wavelength_nm, center_nm, sigma_nm, amplitude):
    x = np.asarray(wavelength_nm, dtype=float) - center_nm
    return amplitude * np.exp(-0.5 * (x / sigma_nm) ** 2)


def evaluate_model(model: SpectralModel, wavelength_nm) -> np.ndarray:
    wl = np.asarray(wavelength_nm, dtype=float)
    out = np.full(wl.shape, float(model.baseline))
    for center, fwhm, area in model.lorentzians:
        out += lorentzian_profile(wl, center, fwhm, area)
    if model.gaussian is not None:
        out += gaussian_profile(wl, *model.gaussian)
    return out


def detect_peaks(spec: Spectrum, min_prominence: float) -> list[float]:
    """Candidate line centers: local maxima of the median-smoothed spectrum
    with at least the requested prominence, sorted by wavelength."""
    if min_prominence <= 0:
        raise ParameterError("min_prominence must be positive")
    smoothed = signal.medfilt(spec.intensity, kernel_size=3)
    idx, _ = signal.find_peaks(smoothed, prominence=min_prominence)
    return [float(w) for w in spec.wavelength_nm[idx]]


def _smooth_envelope(spec: Spectrum) -> np.ndarray:
    step = float(np.median(np.diff(spec.wavelength_nm)))
    window = int(round(2.0 / max(step, 1e-6)))
    window = max(window | 1, 5)  # odd, wide enough to erase narrow lines
    window = min(window, spec.intensity.size | 1)
    return signal.medfilt(spec.intensity, kernel_size=window)


def _merge_close_centers(centers: list[float]) -> list[float]:
    merged: list[float] = []
    for c in sorted(centers):
        if merged and c - merged[-1] <= MIN_CENTER_SEPARATION_NM:
            merged[-1] = 0.5 * (merged[-1] + c)
        else:
            merged.append(c)
    return merged


def fit_spectrum(
    spec: Spectrum,
    candidates,
    fit_gaussian: bool = True,
    *,
    max_nfev: int = 20000,
) -> SpectralModel:
    """Bounded least squares of the summed line model over the spectrum.

    ``candidates`` seeds one Lorentzian each (centers closer than the minimum
    separation are merged first). With ``fit_gaussian`` the broad component
    is seeded from a wide median envelope. Returns the model with its
    unweighted residual RMS attached.
    """
    wl = spec.wavelength_nm
    inten = spec.intensity
    centers = _merge_close_centers([float(c) for c in candidates])
    for c in centers:
        if not (wl[0] <= c <= wl[-1]):
            raise ParameterError(f"candidate center {c} outside the grid")

    baseline0 = float(np.percentile(inten, 10.0))
    envelope = _smooth_envelope(spec)
    n_lor = len(centers)

    x0: list[float] = []
    lo: list[float] = []
    hi: list[float] = []
    scale: list[float] = []
    for c in centers:
        idx = int(np.argmin(np.abs(wl - c)))
        height = max(float(inten[idx] - envelope[idx]), 1.0)
        fwhm0 = max(2.0 * spec.resolution_nm, 2.0 * WIDTH_FLOOR_NM)
        area0 = height * np.pi * fwhm0 / 2.0
        x0 += [c, fwhm0, area0]
        lo += [wl[0], WIDTH_FLOOR_NM, 0.0]
        hi += [wl[-1], MAX_LORENTZIAN_FWHM_NM, np.inf]
        scale += [spec.resolution_nm, spec.resolution_nm, max(area0, 1.0)]

    if fit_gaussian:
        g_idx = int(np.argmax(envelope))
        amp0 = max(float(envelope[g_idx] - baseline0), 1.0)
        above = envelope - baseline0 > 0.5 * amp0
        if above.any():
            width = float(wl[above][-1] - wl[above][0])
        else:
            width = 2.0
        sigma0 = float(np.clip(width / 2.355, 0.2, MAX_GAUSSIAN_SIGMA_NM / 2))
        x0 += [float(wl[g_idx]), sigma0, amp0]
        lo += [wl[0], WIDTH_FLOOR_NM, 0.0]
        hi += [wl[-1], MAX_GAUSSIAN_SIGMA_NM, np.inf]
        scale += [0.5, 0.5, max(amp0, 1.0)]

    x0.append(max(baseline0, 0.0))
    lo.append(0.0)
    hi.append(np.inf)
    scale.append(max(baseline0, 1.0))

    def unpack(x: np.ndarray):
        lor = [
            (x[3 * i], x[3 * i + 1], x[3 * i + 2]) for i in range(n_lor)
        ]
        pos = 3 * n_lor
        gau = None
        if fit_gaussian:
            gau = (x[pos], x[pos + 1], x[pos + 2])
            pos += 3
        return lor, gau, x[pos]

    def residual(x: np.ndarray) -> np.ndarray:
        lor, gau, base = unpack(x)
        model = np.full(wl.shape, base)
        for c, w, a in lor:
            model += lorentzian_profile(wl, c, w, a)
        if gau is not None:
            model += gaussian_profile(wl, *gau)
        return model - inten

    x0_arr = np.asarray(x0)
    if x0_arr.size == 1:
        # nothing but a constant baseline to fit
        base = float(np.mean(inten))
        rms = float(np.sqrt(np.mean((inten - base) ** 2)))
        return SpectralModel(lorentzians=(), gaussian=None, baseline=base,
                             residual_rms=rms)

    result = optimize.least_squares(
        residual,
        x0_arr,
        bounds=(np.asarray(lo), np.asarray(hi)),
        x_scale=np.asarray(scale),
        max_nfev=max_nfev,
    )
    if result.status <= 0:
        raise ConvergenceError(
            "spectrum fit did not converge",
            diagnostics={"initialization": x0, "nfev": int(result.nfev)},
        )

    lor, gau, base = unpack(result.x)
    lor = [(float(c), float(w), float(a)) for c, w, a in lor]
    lor.sort(key=lambda item: item[0])
    # optimizer may push two seeds onto one line; fold such pairs together
    folded: list[tuple[float, float, float]] = []
    for c, w, a in lor:
        if folded and c - folded[-1][0] <= MIN_CENTER_SEPARATION_NM:
            c0, w0, a0 = folded[-1]
            total = a0 + a
            if total > 0:
                cm = (c0 * a0 + c * a) / total
                wm = (w0 * a0 + w * a) / total
            else:
                cm, wm = 0.5 * (c0 + c), 0.5 * (w0 + w)
            folded[-1] = (cm, wm, total)
        else:
            folded.append((c, w, a))

    rms = float(np.sqrt(np.mean(residual(result.x) ** 2)))
    return SpectralModel(
        lorentzians=tuple(folded),
        gaussian=None if gau is None else tuple(float(v) for v in gau),
        baseline=float(base),
        residual_rms=rms,
    )


def band_edge_position(model: SpectralModel) -> float:
    """Wavelength of the broad band-edge component."""
    if model.gaussian is None:
        raise AbsenceError("model has no gaussian band-edge component")
    return float(model.gaussian[0])
