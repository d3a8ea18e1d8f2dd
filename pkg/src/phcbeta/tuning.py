"""Temperature tuning of emitter lines and of the band edge.

Both tune quadratically in temperature over the ranges used here, with the
emitter shifting roughly 0.05 nm/K against the band edge's 0.02 nm/K, so
heating drags an emitter across the edge. This module fits those quadratics,
evaluates shift rates and detunings, and finds the crossing temperature.
Evaluation outside a curve's fitted domain is allowed but raises an
ExtrapolationWarning rather than an error.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .errors import (
    ExtrapolationWarning,
    NoCrossingError,
    ParameterError,
    RankDeficiencyError,
)

COEFFICIENT_EPS = 1e-12  # nm scale below which a polynomial term is "zero"


@dataclass(frozen=True)
class TuningCurve:
    """Quadratic wavelength(T) = c0 + c1*T + c2*T^2 over a fitted domain."""

    label: str
    coefficients: tuple  # (c0 nm, c1 nm/K, c2 nm/K^2)
    domain: tuple  # (T_min, T_max) K
    fit_rms: float = 0.0

    def __post_init__(self):
        if len(self.coefficients) != 3:
            raise ParameterError("coefficients must be (c0, c1, c2)")
        lo, hi = self.domain
        if not lo < hi:
            raise ParameterError("domain must satisfy T_min < T_max")
        object.__setattr__(
            self, "coefficients", tuple(float(c) for c in self.coefficients)
        )
        object.__setattr__(self, "domain", (float(lo), float(hi)))

    def in_domain(self, temperature_K) -> np.ndarray:
        t = np.asarray(temperature_K, dtype=float)
        lo, hi = self.domain
        return (t >= lo) & (t <= hi)

    def evaluate(self, temperature_K, *, warn: bool = True):
        """Wavelength at T; extrapolation beyond the domain is flagged."""
        t = np.asarray(temperature_K, dtype=float)
        if warn and not bool(np.all(self.in_domain(t))):
            warnings.warn(
                f"evaluating tuning curve '{self.label}' outside its domain "
                f"{self.domain}",
                ExtrapolationWarning,
                stacklevel=2,
            )
        c0, c1, c2 = self.coefficients
        out = c0 + t * (c1 + t * c2)
        return float(out) if np.isscalar(temperature_K) else out

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "coefficients": list(self.coefficients),
            "domain": list(self.domain),
            "fit_rms": self.fit_rms,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TuningCurve":
        return cls(
            label=str(data["label"]),
            coefficients=tuple(data["coefficients"]),
            domain=tuple(data["domain"]),
            fit_rms=float(data.get("fit_rms", 0.0)),
        )


@dataclass(frozen=True)
class DetuningEntry:
    temperature_K: float
    qd_wavelength_nm: float
    band_edge_wavelength_nm: float
    detuning_nm: float  # qd - band edge; positive lies inside the gap
    in_domain: bool


@dataclass(frozen=True)
class DetuningSeries:
    entries: tuple

    def __post_init__(self):
        for e in self.entries:
            expected = e.qd_wavelength_nm - e.band_edge_wavelength_nm
            if abs(e.detuning_nm - expected) > 1e-9:
                raise ParameterError(
                    f"detuning inconsistent at T={e.temperature_K} K"
                )

    def detunings(self) -> np.ndarray:
        return np.array([e.detuning_nm for e in self.entries])

    def temperatures(self) -> np.ndarray:
        return np.array([e.temperature_K for e in self.entries])


def fit_tuning(temperatures_K, wavelengths_nm, *, label: str = "curve") -> TuningCurve:
    """Degree-2 ordinary least squares of wavelength against temperature."""
    t = np.asarray(temperatures_K, dtype=float)
    w = np.asarray(wavelengths_nm, dtype=float)
    if t.shape != w.shape or t.ndim != 1:
        raise ParameterError("temperatures and wavelengths must match 1-d")
    if np.unique(t).size < 3:
        raise RankDeficiencyError(
            "need at least 3 distinct temperatures for a quadratic fit"
        )
    # fit in a scaled window for conditioning, then convert to plain powers
    poly = Polynomial.fit(t, w, deg=2)
    coef = poly.convert().coef
    c0, c1, c2 = np.pad(coef, (0, max(0, 3 - coef.size)))[:3]
    resid = w - poly(t)
    return TuningCurve(
        label=label,
        coefficients=(float(c0), float(c1), float(c2)),
        domain=(float(t.min()), float(t.max())),
        fit_rms=float(np.sqrt(np.mean(resid**2))),
    )


def shift_rate(curve: TuningCurve, temperature_K: float) -> float:
    """d(wavelength)/dT at T, in nm/K; extrapolation warns but returns."""
    if not bool(np.all(curve.in_domain(temperature_K))):
        warnings.warn(
            f"shift rate of '{curve.label}' requested outside domain "
            f"{curve.domain}",
            ExtrapolationWarning,
            stacklevel=2,
        )
    _, c1, c2 = curve.coefficients
    return float(c1 + 2.0 * c2 * temperature_K)


def detuning_series(
    qd: TuningCurve, edge: TuningCurve, temperatures_K
) -> DetuningSeries:
    """Evaluate both curves and their difference; out-of-domain points are
    kept but flagged."""
    entries = []
    for t in np.asarray(temperatures_K, dtype=float).ravel():
        lam_qd = qd.evaluate(float(t), warn=False)
        lam_edge = edge.evaluate(float(t), warn=False)
        entries.append(
            DetuningEntry(
                temperature_K=float(t),
                qd_wavelength_nm=lam_qd,
                band_edge_wavelength_nm=lam_edge,
                detuning_nm=lam_qd - lam_edge,
                in_domain=bool(qd.in_domain(t) and edge.in_domain(t)),
            )
        )
    return DetuningSeries(entries=tuple(entries))


@dataclass(frozen=True)
class ResonanceResult:
    """Crossing temperature(s) of two tuning curves.

    ``degenerate`` marks identical curves (resonant everywhere); then no
    discrete roots are reported.
    """

    primary_K: float | None
    roots_K: tuple
    degenerate: bool
    domain: tuple


def resonance_temperature(qd: TuningCurve, edge: TuningCurve) -> ResonanceResult:
    """Smallest in-domain real root of qd(T) - edge(T) = 0.

    The domain is the intersection of the two fitted domains. Two in-domain
    roots are both reported, the smaller marked primary. Identical curves
    give a degenerate result instead of roots.
    """
    lo = max(qd.domain[0], edge.domain[0])
    hi = min(qd.domain[1], edge.domain[1])
    if not lo < hi:
        raise NoCrossingError("tuning-curve domains do not overlap")

    d0, d1, d2 = (a - b for a, b in zip(qd.coefficients, edge.coefficients))
    scale = max(
        1.0,
        *(abs(c) for c in qd.coefficients),
        *(abs(c) for c in edge.coefficients),
    )
    tiny = COEFFICIENT_EPS * scale
    if abs(d0) < tiny and abs(d1) < tiny and abs(d2) < tiny:
        return ResonanceResult(
            primary_K=None, roots_K=(), degenerate=True, domain=(lo, hi)
        )

    if abs(d2) < tiny:
        if abs(d1) < tiny:
            raise NoCrossingError(
                "curves are parallel within tolerance and never cross"
            )
        roots = np.array([-d0 / d1])
    else:
        disc = d1 * d1 - 4.0 * d2 * d0
        if disc < 0:
            raise NoCrossingError("quadratic difference has no real root")
        sq = np.sqrt(disc)
        # Citardauq pairing avoids cancellation for small |d0| or |d2|
        q = -0.5 * (d1 + np.copysign(sq, d1)) if d1 != 0 else 0.5 * sq
        if q != 0:
            roots = np.array([q / d2, d0 / q])
        else:
            roots = np.array([0.0, -d1 / d2])

    in_dom = np.sort(roots[(roots >= lo) & (roots <= hi)])
    if in_dom.size == 0:
        raise NoCrossingError(
            f"no resonance crossing inside the shared domain ({lo}, {hi}) K"
        )
    return ResonanceResult(
        primary_K=float(in_dom[0]),
        roots_K=tuple(float(r) for r in in_dom),
        degenerate=False,
        domain=(lo, hi),
    )
