"""Hand-rendered SVG plots.

No plotting library: every figure is assembled from explicit SVG elements
with fixed canvas geometry, a deterministic 1-2-5 tick chooser, and fixed
float formatting, so identical data produces byte-identical files that can
be golden-tested. Four figure kinds cover the pipeline: dispersion, decay
(log intensity), spectrum, and rates versus detuning with dashed extrema
guides.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .errors import ParameterError

WIDTH = 640
HEIGHT = 420
MARGIN_LEFT = 72
MARGIN_RIGHT = 24
MARGIN_TOP = 32
MARGIN_BOTTOM = 56

AXIS_COLOR = "#222222"
DATA_COLOR = "#1f77b4"
MODEL_COLOR = "#d62728"
GUIDE_COLOR = "#555555"


def _fmt(value: float) -> str:
    out = f"{value:.6g}"
    return "0" if out == "-0" else out


def _nice_step(span: float, target: int = 6) -> float:
    raw = span / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            return mult * mag
    return 10.0 * mag


def _linear_ticks(lo: float, hi: float) -> list[float]:
    if hi <= lo:
        return [lo]
    step = _nice_step(hi - lo)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _decade_ticks(lo: float, hi: float) -> list[float]:
    ticks = []
    exp = math.floor(math.log10(lo))
    while 10.0**exp <= hi * (1 + 1e-9):
        if 10.0**exp >= lo * (1 - 1e-9):
            ticks.append(10.0**exp)
        exp += 1
    return ticks or [lo]


class _Frame:
    """Affine map from data coordinates to the pixel plot box."""

    def __init__(self, x_lo, x_hi, y_lo, y_hi, *, log_y: bool = False):
        if x_hi <= x_lo:
            pad = max(abs(x_lo), 1.0) * 0.1
            x_lo, x_hi = x_lo - pad, x_hi + pad
        if log_y:
            y_lo = max(y_lo, 1e-300)
            y_hi = max(y_hi, y_lo * 10)
        elif y_hi <= y_lo:
            pad = max(abs(y_lo), 1.0) * 0.1
            y_lo, y_hi = y_lo - pad, y_hi + pad
        self.x_lo, self.x_hi = float(x_lo), float(x_hi)
        self.y_lo, self.y_hi = float(y_lo), float(y_hi)
        self.log_y = log_y
        self.px_lo = MARGIN_LEFT
        self.px_hi = WIDTH - MARGIN_RIGHT
        self.py_lo = HEIGHT - MARGIN_BOTTOM
        self.py_hi = MARGIN_TOP

    def sx(self, x: float) -> float:
        frac = (x - self.x_lo) / (self.x_hi - self.x_lo)
        return self.px_lo + frac * (self.px_hi - self.px_lo)

    def sy(self, y: float) -> float:
        if self.log_y:
            frac = (math.log10(max(y, 1e-300)) - math.log10(self.y_lo)) / (
                math.log10(self.y_hi) - math.log10(self.y_lo)
            )
        else:
            frac = (y - self.y_lo) / (self.y_hi - self.y_lo)
        return self.py_lo + frac * (self.py_hi - self.py_lo)


def _svg_open() -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]


def _axes(frame: _Frame, x_label: str, y_label: str, title: str) -> list[str]:
    parts = [
        f'<rect x="{frame.px_lo}" y="{frame.py_hi}" '
        f'width="{frame.px_hi - frame.px_lo}" '
        f'height="{frame.py_lo - frame.py_hi}" fill="none" '
        f'stroke="{AXIS_COLOR}" stroke-width="1"/>'
    ]
    for t in _linear_ticks(frame.x_lo, frame.x_hi):
        x = frame.sx(t)
        parts.append(
            f'<line x1="{x:.2f}" y1="{frame.py_lo}" x2="{x:.2f}" '
            f'y2="{frame.py_lo + 5}" stroke="{AXIS_COLOR}" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{frame.py_lo + 18}" font-size="11" '
            f'font-family="monospace" text-anchor="middle" '
            f'fill="{AXIS_COLOR}">{_fmt(t)}</text>'
        )
    y_ticks = (
        _decade_ticks(frame.y_lo, frame.y_hi)
        if frame.log_y
        else _linear_ticks(frame.y_lo, frame.y_hi)
    )
    for t in y_ticks:
        y = frame.sy(t)
        parts.append(
            f'<line x1="{frame.px_lo - 5}" y1="{y:.2f}" x2="{frame.px_lo}" '
            f'y2="{y:.2f}" stroke="{AXIS_COLOR}" stroke-width="1"/>'
        )
        label = f"1e{int(round(math.log10(t)))}" if frame.log_y else _fmt(t)
        parts.append(
            f'<text x="{frame.px_lo - 8}" y="{y + 4:.2f}" font-size="11" '
            f'font-family="monospace" text-anchor="end" '
            f'fill="{AXIS_COLOR}">{label}</text>'
        )
    parts.append(
        f'<text x="{(frame.px_lo + frame.px_hi) / 2:.2f}" y="{HEIGHT - 14}" '
        f'font-size="13" font-family="monospace" text-anchor="middle" '
        f'fill="{AXIS_COLOR}">{x_label}</text>'
    )
    parts.append(
        f'<text x="18" y="{(frame.py_lo + frame.py_hi) / 2:.2f}" '
        f'font-size="13" font-family="monospace" text-anchor="middle" '
        f'fill="{AXIS_COLOR}" transform="rotate(-90 18 '
        f'{(frame.py_lo + frame.py_hi) / 2:.2f})">{y_label}</text>'
    )
    if title:
        parts.append(
            f'<text x="{(frame.px_lo + frame.px_hi) / 2:.2f}" y="20" '
            f'font-size="13" font-family="monospace" text-anchor="middle" '
            f'fill="{AXIS_COLOR}">{title}</text>'
        )
    return parts


def _polyline(frame: _Frame, xs, ys, color: str, *, dashed: bool = False,
              width: float = 1.5) -> str:
    pts = " ".join(
        f"{frame.sx(float(x)):.2f},{frame.sy(float(y)):.2f}"
        for x, y in zip(xs, ys)
    )
    dash = ' stroke-dasharray="6 4"' if dashed else ""
    return (
        f'<polyline points="{pts}" fill="none" stroke="{color}" '
        f'stroke-width="{width}"{dash}/>'
    )


def _markers(frame: _Frame, xs, ys, color: str, radius: float = 3.0) -> list[str]:
    return [
        f'<circle cx="{frame.sx(float(x)):.2f}" cy="{frame.sy(float(y)):.2f}" '
        f'r="{radius}" fill="{color}"/>'
        for x, y in zip(xs, ys)
    ]


def _finish(parts: list[str]) -> str:
    return "\n".join(parts + ["</svg>"]) + "\n"


def plot_dispersion(points_k, points_freq, *, edge_k=None, edge_freq=None) -> str:
    k = np.asarray(points_k, dtype=float)
    f = np.asarray(points_freq, dtype=float)
    frame = _Frame(float(k.min()), float(k.max()), float(f.min()), float(f.max()))
    parts = _svg_open()
    parts += _axes(frame, "k (2pi/a)", "frequency (a/lambda)", "guided band")
    if k.size >= 2:
        parts.append(_polyline(frame, k, f, DATA_COLOR))
    parts += _markers(frame, k, f, DATA_COLOR, radius=2.0)
    if edge_k is not None and edge_freq is not None:
        parts += _markers(frame, [edge_k], [edge_freq], MODEL_COLOR, radius=4.0)
    return _finish(parts)


def plot_decay(time_ns, counts, *, expected=None) -> str:
    t = np.asarray(time_ns, dtype=float)
    c = np.asarray(counts, dtype=float)
    positive = c[c > 0]
    if positive.size == 0:
        raise ParameterError("decay plot needs at least one positive count")
    y_lo = 10.0 ** math.floor(math.log10(positive.min()))
    y_hi = 10.0 ** math.ceil(math.log10(positive.max()))
    frame = _Frame(float(t.min()), float(t.max()), y_lo, y_hi, log_y=True)
    parts = _svg_open()
    parts += _axes(frame, "time (ns)", "counts", "decay histogram")
    mask = c > 0
    if mask.sum() >= 2:
        parts.append(_polyline(frame, t[mask], c[mask], DATA_COLOR, width=1.0))
    else:
        parts += _markers(frame, t[mask], c[mask], DATA_COLOR)
    if expected is not None:
        e = np.asarray(expected, dtype=float)
        em = e > 0
        parts.append(_polyline(frame, t[em], e[em], MODEL_COLOR, dashed=True))
    return _finish(parts)


def plot_spectrum(wavelength_nm, intensity, *, model=None) -> str:
    w = np.asarray(wavelength_nm, dtype=float)
    i = np.asarray(intensity, dtype=float)
    y_hi = float(i.max()) if i.size else 1.0
    frame = _Frame(float(w.min()), float(w.max()), 0.0, y_hi * 1.05)
    parts = _svg_open()
    parts += _axes(frame, "wavelength (nm)", "intensity (counts)", "spectrum")
    if w.size >= 2:
        parts.append(_polyline(frame, w, i, DATA_COLOR, width=1.0))
    else:
        parts += _markers(frame, w, i, DATA_COLOR)
    if model is not None:
        from .spectrum import evaluate_model

        parts.append(
            _polyline(frame, w, evaluate_model(model, w), MODEL_COLOR, dashed=True)
        )
    return _finish(parts)


def plot_rates_vs_detuning(
    detuning_nm,
    gamma_tot,
    *,
    sigma=None,
    gamma_res: float | None = None,
    gamma_nonres: float | None = None,
    model_detuning=None,
    model_gamma=None,
) -> str:
    d = np.asarray(detuning_nm, dtype=float)
    g = np.asarray(gamma_tot, dtype=float)
    y_hi = float(g.max())
    if gamma_res is not None:
        y_hi = max(y_hi, gamma_res)
    frame = _Frame(float(d.min()), float(d.max()), 0.0, y_hi * 1.1)
    parts = _svg_open()
    parts += _axes(
        frame, "detuning (nm)", "decay rate (1/ns)", "rates vs detuning"
    )
    if model_detuning is not None and model_gamma is not None:
        parts.append(
            _polyline(frame, model_detuning, model_gamma, MODEL_COLOR, width=1.2)
        )
    if sigma is not None:
        s = np.asarray(sigma, dtype=float)
        for x, y, e in zip(d, g, s):
            parts.append(
                f'<line x1="{frame.sx(float(x)):.2f}" '
                f'y1="{frame.sy(float(y - e)):.2f}" '
                f'x2="{frame.sx(float(x)):.2f}" '
                f'y2="{frame.sy(float(y + e)):.2f}" '
                f'stroke="{DATA_COLOR}" stroke-width="1"/>'
            )
    parts += _markers(frame, d, g, DATA_COLOR)
    for value, name in ((gamma_res, "G_res"), (gamma_nonres, "G_nonres")):
        if value is None:
            continue
        y = frame.sy(float(value))
        parts.append(
            f'<line x1="{frame.px_lo}" y1="{y:.2f}" x2="{frame.px_hi}" '
            f'y2="{y:.2f}" stroke="{GUIDE_COLOR}" stroke-width="1" '
            f'stroke-dasharray="6 4"/>'
        )
        parts.append(
            f'<text x="{frame.px_hi - 6}" y="{y - 5:.2f}" font-size="11" '
            f'font-family="monospace" text-anchor="end" '
            f'fill="{GUIDE_COLOR}">{name} = {_fmt(float(value))}</text>'
        )
    return _finish(parts)


PLOT_KINDS = ("dispersion", "decay", "spectrum", "rates-vs-detuning")


def emit_plot(kind: str, data: dict, path=None) -> str | None:
    """Render one figure kind from a plain data dict; optionally write it.

    Empty input data is a warned no-op returning None, never an exception.
    """
    if kind not in PLOT_KINDS:
        raise ParameterError(f"unknown plot kind {kind!r}; options: {PLOT_KINDS}")
    key = {
        "dispersion": "points_k",
        "decay": "time_ns",
        "spectrum": "wavelength_nm",
        "rates-vs-detuning": "detuning_nm",
    }[kind]
    values = data.get(key)
    if values is None or len(np.atleast_1d(values)) == 0:
        warnings.warn(f"no data for {kind} plot; skipping", stacklevel=2)
        return None
    if kind == "dispersion":
        svg = plot_dispersion(
            data["points_k"],
            data["points_freq"],
            edge_k=data.get("edge_k"),
            edge_freq=data.get("edge_freq"),
        )
    elif kind == "decay":
        svg = plot_decay(
            data["time_ns"], data["counts"], expected=data.get("expected")
        )
    elif kind == "spectrum":
        svg = plot_spectrum(
            data["wavelength_nm"], data["intensity"], model=data.get("model")
        )
    else:
        svg = plot_rates_vs_detuning(
            data["detuning_nm"],
            data["gamma_tot"],
            sigma=data.get("sigma"),
            gamma_res=data.get("gamma_res"),
            gamma_nonres=data.get("gamma_nonres"),
            model_detuning=data.get("model_detuning"),
            model_gamma=data.get("model_gamma"),
        )
    if path is not None:
        from .fileio import atomic_write_text

        atomic_write_text(path, svg)
    return svg
