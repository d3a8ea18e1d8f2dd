"""Rate-vs-detuning assembly, beta extraction, and rate-model fitting.

The coupling fraction is computed from extrema of the measured series:

    beta = (Gamma_res - Gamma_nonres) / Gamma_res

with Gamma_res the fastest converged rate and Gamma_nonres the slowest
converged rate inside the gap (detuning > 0). Because Gamma_nonres still
contains any residual nonradiative decay, the result is always a lower
bound, and every BetaResult says so. Unconverged fit points never enter
the extrema but stay in reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .bands import DispersionCurve
from .emission import RateModelConfig, beta_factor, broadened_rate_curve, purcell_factor
from .errors import (
    InsufficientDetuningError,
    OrderingError,
    ParameterError,
    SpanError,
)

BROADENING_GRID = np.geomspace(1e-5, 5e-3, 13)  # a/lambda units
MIN_POINTS_TOTAL = 3
MIN_POINTS_MODEL = 5


@dataclass(frozen=True)
class RatePoint:
    """One fitted decay rate at a known detuning from the band edge."""

    detuning_nm: float
    gamma_tot: float  # 1/ns
    sigma: float  # 1/ns, one-sigma uncertainty on gamma_tot
    temperature_K: float
    converged: bool = True


@dataclass(frozen=True)
class RateVsDetuning:
    """A tagged series of rate points; order and flags are preserved."""

    label: str
    points: tuple
    band_edge_source: str = "spectrum"  # provenance of the detuning axis

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        for p in self.points:
            if not isinstance(p, RatePoint):
                raise ParameterError("points must be RatePoint instances")

    def converged_points(self) -> list[RatePoint]:
        return [p for p in self.points if p.converged]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "band_edge_source": self.band_edge_source,
            "points": [
                {
                    "detuning_nm": p.detuning_nm,
                    "gamma_tot": p.gamma_tot,
                    "sigma": p.sigma,
                    "temperature_K": p.temperature_K,
                    "converged": p.converged,
                }
                for p in self.points
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RateVsDetuning":
        return cls(
            label=str(data["label"]),
            points=tuple(RatePoint(**p) for p in data["points"]),
            band_edge_source=str(data.get("band_edge_source", "spectrum")),
        )


@dataclass(frozen=True)
class BetaResult:
    """Extracted coupling fraction for one emitter; always a lower bound."""

    label: str
    gamma_res: float
    gamma_nonres: float
    beta: float
    purcell: float
    n_points_in_gap: int
    lower_bound_flag: bool = True

    def __post_init__(self):
        expected = beta_factor(self.gamma_res, self.gamma_nonres)
        if abs(self.beta - expected) > 1e-12:
            raise ParameterError("beta inconsistent with its defining rates")
        if not 0.0 <= self.beta <= 1.0:
            raise ParameterError("beta must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "gamma_res": self.gamma_res,
            "gamma_nonres": self.gamma_nonres,
            "beta": self.beta,
            "purcell": self.purcell,
            "n_points_in_gap": self.n_points_in_gap,
            "lower_bound_flag": self.lower_bound_flag,
        }


def extract_beta(series: RateVsDetuning, gamma_0: float) -> BetaResult:
    """Extrema-based beta: fastest converged rate anywhere over slowest
    converged in-gap rate. Raises when the series cannot support that."""
    if not gamma_0 > 0:
        raise ParameterError("gamma_0 must be positive")
    converged = series.converged_points()
    if len(converged) < MIN_POINTS_TOTAL:
        raise ParameterError(
            f"need at least {MIN_POINTS_TOTAL} converged points, "
            f"got {len(converged)}"
        )
    in_gap = [p for p in converged if p.detuning_nm > 0]
    if not in_gap:
        raise InsufficientDetuningError(
            f"series '{series.label}' has no converged in-gap point "
            "(detuning > 0); cannot bound the non-resonant rate"
        )
    gamma_res = max(p.gamma_tot for p in converged)
    gamma_nonres = min(p.gamma_tot for p in in_gap)
    if gamma_nonres > gamma_res:
        raise OrderingError(
            "in-gap minimum exceeds the overall maximum; inconsistent series"
        )
    return BetaResult(
        label=series.label,
        gamma_res=float(gamma_res),
        gamma_nonres=float(gamma_nonres),
        beta=beta_factor(gamma_res, gamma_nonres),
        purcell=purcell_factor(gamma_res, gamma_0),
        n_points_in_gap=len(in_gap),
    )


@dataclass(frozen=True)
class RateModelFit:
    """Best-fit (C, Gamma_bg, broadening) of the broadened rate model."""

    coupling_scale: float
    gamma_bg: float
    broadening_fwhm: float  # a/lambda units
    residual: float  # weighted chi-square per degree of freedom
    converged: bool
    diagnostics: dict = field(default_factory=dict)


def _model_basis(
    curve: DispersionCurve, gamma_0: float, detunings: np.ndarray, gamma: float
) -> np.ndarray:
    """Waveguide-rate basis vector X(gamma): model = C*X + gamma_bg."""
    wavelengths = curve.band_edge_wavelength_nm + detunings
    config = RateModelConfig(
        coupling_scale=1.0, gamma_bg=0.0, gamma_0=gamma_0, broadening_fwhm=gamma
    )
    return broadened_rate_curve(curve, config, wavelengths).gamma_tot


def _profiled_linear(x: np.ndarray, y: np.ndarray, w: np.ndarray):
    """Weighted LSQ of y ~ C*x + b with C in (0,1], b >= 0."""

    def rss(c, b):
        return float(np.sum(w * (c * x + b - y) ** 2))

    sw = np.sum(w)
    sx = np.sum(w * x)
    sy = np.sum(w * y)
    sxx = np.sum(w * x * x)
    sxy = np.sum(w * x * y)
    det = sw * sxx - sx * sx
    candidates = []
    if det > 0:
        c = (sw * sxy - sx * sy) / det
        b = (sxx * sy - sx * sxy) / det
        if 0.0 < c <= 1.0 and b >= 0.0:
            candidates.append((c, b))
    # boundary solutions
    if sxx > 0:
        c = float(np.clip(sxy / sxx, 1e-9, 1.0))  # b = 0
        candidates.append((c, 0.0))
    b = max(float((sy - sx) / sw), 0.0)  # C = 1
    candidates.append((1.0, b))
    b = max(float(sy / sw), 0.0)  # C -> 0
    candidates.append((1e-9, b))
    best = min(candidates, key=lambda cb: rss(*cb))
    return best[0], best[1], rss(*best)


def fit_rate_model(
    series: RateVsDetuning,
    dispersion: DispersionCurve,
    gamma_0: float,
    *,
    fixed_broadening: float | None = None,
) -> RateModelFit:
    """Weighted (1/sigma^2) fit of the broadened rate model to a series.

    The linear pair (C, Gamma_bg) is profiled exactly on a broadening grid,
    the best triple is refined by simplex, and the linear pair is re-profiled
    at the refined broadening. ``fixed_broadening`` pins the kernel width and
    fits only the linear pair (the nested model).
    """
    if not gamma_0 > 0:
        raise ParameterError("gamma_0 must be positive")
    pts = series.converged_points()
    if len(pts) < MIN_POINTS_MODEL:
        raise ParameterError(
            f"need at least {MIN_POINTS_MODEL} converged points, got {len(pts)}"
        )
    det = np.array([p.detuning_nm for p in pts])
    if not (np.any(det > 0) and np.any(det < 0)):
        raise SpanError(
            "converged points must span both sides of the band edge"
        )
    y = np.array([p.gamma_tot for p in pts])
    sig = np.array([p.sigma for p in pts])
    if np.any(~np.isfinite(sig)) or np.any(sig <= 0):
        raise ParameterError("every converged point needs a positive sigma")
    w = 1.0 / sig**2
    dof = max(len(pts) - 3, 1)

    def profile(gamma: float):
        x = _model_basis(dispersion, gamma_0, det, gamma)
        return _profiled_linear(x, y, w)

    if fixed_broadening is not None:
        if not fixed_broadening > 0:
            raise ParameterError("fixed_broadening must be positive")
        c, b, rss = profile(fixed_broadening)
        return RateModelFit(
            coupling_scale=c,
            gamma_bg=b,
            broadening_fwhm=float(fixed_broadening),
            residual=rss / dof,
            converged=True,
            diagnostics={"mode": "fixed-broadening", "n_points": len(pts)},
        )

    grid = [(float(g), *profile(float(g))) for g in BROADENING_GRID]
    g0, c0, b0, rss0 = min(grid, key=lambda row: row[3])

    penalty_scale = 1e3 * (1.0 + rss0)

    def objective(theta: np.ndarray) -> float:
        c, b, g = theta
        penalty = 0.0
        if not 1e-9 < c <= 1.0:
            penalty += min(abs(c - 1e-9), abs(c - 1.0)) + 1.0
            c = float(np.clip(c, 1e-9, 1.0))
        if b < 0:
            penalty += 1.0 + abs(b)
            b = 0.0
        if g <= 0:
            penalty += 1.0 + abs(g)
            g = 1e-8
        x = _model_basis(dispersion, gamma_0, det, g)
        return float(np.sum(w * (c * x + b - y) ** 2)) + penalty_scale * penalty

    res = optimize.minimize(
        objective,
        np.array([c0, b0, g0]),
        method="Nelder-Mead",
        options={"maxfev": 4000, "xatol": 1e-10, "fatol": 1e-14,
                 "adaptive": True},
    )
    g_ref = float(np.clip(res.x[2], 1e-9, None))
    c_ref, b_ref, rss_ref = profile(g_ref)
    if rss_ref > rss0:  # the refine must never lose to its own seed
        c_ref, b_ref, g_ref, rss_ref = c0, b0, g0, rss0
    return RateModelFit(
        coupling_scale=float(c_ref),
        gamma_bg=float(b_ref),
        broadening_fwhm=float(g_ref),
        residual=rss_ref / dof,
        converged=bool(res.success),
        diagnostics={
            "mode": "free-broadening",
            "n_points": len(pts),
            "grid_seed": {"broadening": g0, "rss": rss0},
            "nfev": int(res.nfev),
        },
    )


@dataclass(frozen=True)
class DotReportRow:
    label: str
    result: BetaResult | None
    note: str = ""
    mean_rate: float | None = None


@dataclass(frozen=True)
class MultiDotReport:
    rows: tuple
    beta_min: float | None
    beta_max: float | None

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "label": r.label,
                    "result": None if r.result is None else r.result.to_dict(),
                    "note": r.note,
                    "mean_rate": r.mean_rate,
                }
                for r in self.rows
            ],
            "beta_min": self.beta_min,
            "beta_max": self.beta_max,
        }


def multi_dot_report(series_list, gamma_0: float) -> MultiDotReport:
    """Per-emitter beta table. A series with no in-gap point (an emitter too
    far from the edge to cross it) is reported as broadband-coupled with its
    mean rate instead of a beta value; other failures are recorded per row."""
    rows = []
    for series in series_list:
        try:
            result = extract_beta(series, gamma_0)
            rows.append(DotReportRow(label=series.label, result=result))
        except InsufficientDetuningError:
            rates = [p.gamma_tot for p in series.converged_points()]
            mean = float(np.mean(rates)) if rates else None
            rows.append(
                DotReportRow(
                    label=series.label,
                    result=None,
                    note=(
                        "no in-gap point; coupling to the broadband "
                        "continuum, rate roughly constant"
                    ),
                    mean_rate=mean,
                )
            )
        except (OrderingError, ParameterError) as exc:
            rows.append(
                DotReportRow(label=series.label, result=None, note=str(exc))
            )
    betas = [r.result.beta for r in rows if r.result is not None]
    return MultiDotReport(
        rows=tuple(rows),
        beta_min=min(betas) if betas else None,
        beta_max=max(betas) if betas else None,
    )


def format_report(report: MultiDotReport) -> str:
    """Plain-text table of a multi-emitter report."""
    lines = [
        f"{'emitter':<10}{'beta':>8}{'G_res':>9}{'G_nonres':>10}"
        f"{'F_p':>7}{'in-gap':>8}  note",
        "-" * 64,
    ]
    for r in report.rows:
        if r.result is not None:
            b = r.result
            lines.append(
                f"{r.label:<10}{b.beta:>8.3f}{b.gamma_res:>9.3f}"
                f"{b.gamma_nonres:>10.3f}{b.purcell:>7.2f}"
                f"{b.n_points_in_gap:>8d}  lower bound"
            )
        else:
            rate = "" if r.mean_rate is None else f" (~{r.mean_rate:.2f} /ns)"
            lines.append(f"{r.label:<10}{'-':>8}{'-':>9}{'-':>10}{'-':>7}{'-':>8}  {r.note}{rate}")
    if report.beta_min is not None:
        lines.append("-" * 64)
        lines.append(
            f"beta range: {report.beta_min:.3f} to {report.beta_max:.3f}"
        )
    return "\n".join(lines)
