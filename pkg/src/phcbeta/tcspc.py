"""Forward model and sampler for pulsed time-correlated photon counting.

A bi-exponential decay convolved with a Gaussian instrument response has the
exponentially-modified-Gaussian closed form; per-bin expectations come from
exact CDF differences, so no time-axis discretization error enters. Pulses
repeat with the laser period and earlier pulses wrap into the window until
their remaining weight is negligible. Sampling is Poisson with an explicit
seed.

Both closed forms are written with erfcx so they stay finite for any
rate/width combination:

    pdf(x) = (G/2) * erfcx(z) * exp(-x^2 / (2 s^2))
    cdf(x) = ndtr(x/s) - (1/2) * erfcx(z) * exp(-x^2 / (2 s^2))

with x = t - t0, s the IRF sigma, G the decay rate and
z = (G*s - x/s) / sqrt(2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DegenerateInputError, ParameterError

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
DEFAULT_REPETITION_PERIOD_NS = 1e3 / 76.0  # 76 MHz pulse train
WRAP_TAIL_FRACTION = 1e-6


@dataclass(frozen=True)
class InstrumentResponse:
    """Gaussian instrument response: FWHM in ps, arrival offset t0 in ns.

    ``table`` optionally carries a measured response as (times_ns,
    amplitudes); when present the forward model switches to discrete
    periodic convolution against it and ``fwhm_ps`` is ignored.
    """

    fwhm_ps: float = 280.0
    t0_ns: float = 2.0
    table: tuple | None = None

    def __post_init__(self):
        if not self.fwhm_ps > 0:
            raise ParameterError("IRF fwhm_ps must be positive")
        if self.table is not None:
            times, amps = self.table
            times = np.asarray(times, dtype=float)
            amps = np.asarray(amps, dtype=float)
            if times.shape != amps.shape or times.ndim != 1 or times.size < 3:
                raise ParameterError("IRF table needs matching 1D arrays, >= 3 points")
            if np.any(amps < 0) or amps.sum() <= 0:
                raise ParameterError("IRF table amplitudes must be >= 0, not all zero")

    @property
    def sigma_ns(self) -> float:
        return self.fwhm_ps * 1e-3 * FWHM_TO_SIGMA


@dataclass(frozen=True)
class AcquisitionConfig:
    """Binning and normalization of one acquisition."""

    repetition_period_ns: float = DEFAULT_REPETITION_PERIOD_NS
    bin_width_ps: float = 25.0
    n_bins: int | None = None  # default: as many full bins as fit one period
    total_signal_counts: float = 1e5
    background_rate: float = 0.0  # counts per bin

    def __post_init__(self):
        if not self.repetition_period_ns > 0:
            raise ParameterError("repetition_period_ns must be positive")
        if not self.bin_width_ps > 0:
            raise ParameterError("bin_width_ps must be positive")
        if self.total_signal_counts < 0 or self.background_rate < 0:
            raise ParameterError("counts must be >= 0")
        n = self.resolved_bins
        if n < 8:
            raise ParameterError("need at least 8 bins")
        if n * self.bin_width_ps * 1e-3 > self.repetition_period_ns * (1 + 1e-9):
            raise ParameterError("bins must not extend past one repetition period")

    @property
    def resolved_bins(self) -> int:
        if self.n_bins is not None:
            return int(self.n_bins)
        return int(
            math.floor(self.repetition_period_ns / (self.bin_width_ps * 1e-3) + 1e-9)
        )

    @property
    def bin_edges_ns(self) -> np.ndarray:
        return np.arange(self.resolved_bins + 1) * (self.bin_width_ps * 1e-3)


@dataclass(frozen=True)
class DecayParams:
    """Bi-exponential decay amplitudes (relative weights) and rates (1/ns).

    Rates must satisfy gamma_fast > gamma_slow > 0 whenever both amplitudes
    are positive; a vanishing amplitude frees the matching rate.
    """

    amp_fast: float
    gamma_fast: float
    amp_slow: float = 0.0
    gamma_slow: float = 0.0

    def __post_init__(self):
        if self.amp_fast < 0 or self.amp_slow < 0:
            raise ParameterError("amplitudes must be >= 0")
        if self.amp_fast > 0 and not self.gamma_fast > 0:
            raise ParameterError("gamma_fast must be positive when amp_fast > 0")
        if self.amp_slow > 0 and not self.gamma_slow > 0:
            raise ParameterError("gamma_slow must be positive when amp_slow > 0")
        if self.amp_fast > 0 and self.amp_slow > 0:
            if not self.gamma_fast > self.gamma_slow:
                raise ParameterError("gamma_fast must exceed gamma_slow")

    def components(self) -> list[tuple[float, float]]:
        comps = []
        if self.amp_fast > 0:
            comps.append((self.amp_fast, self.gamma_fast))
        if self.amp_slow > 0:
            comps.append((self.amp_slow, self.gamma_slow))
        return comps


def _emg_pieces(t, gamma, sigma_ns: float, t0_ns: float):
    x = np.asarray(t, dtype=float) - t0_ns
    gamma = np.asarray(gamma, dtype=float)
    x, gamma = np.broadcast_arrays(x, gamma)
    z = (gamma * sigma_ns - x / sigma_ns) / math.sqrt(2.0)
    return x, gamma, z


def emg_pdf(t, gamma, sigma_ns: float, t0_ns: float) -> np.ndarray:
    """Unit-area exponential decay reconvolved with a Gaussian.

    Evaluated in two overflow-safe branches: erfcx on the rising side
    (z >= 0) and the plain exponential form on the tail side, where the
    exponent Gamma^2 sigma^2/2 - Gamma*x is necessarily <= 0.
    """
    x, gamma, z = _emg_pieces(t, gamma, sigma_ns, t0_ns)
    out = np.empty_like(x)
    pos = z >= 0
    neg = ~pos
    out[pos] = (
        0.5
        * gamma[pos]
        * special.erfcx(z[pos])
        * np.exp(-(x[pos] ** 2) / (2.0 * sigma_ns**2))
    )
    c = 0.5 * (gamma[neg] * sigma_ns) ** 2 - gamma[neg] * x[neg]
    out[neg] = 0.5 * gamma[neg] * special.erfc(z[neg]) * np.exp(c)
    return out


def emg_cdf(t, gamma, sigma_ns: float, t0_ns: float) -> np.ndarray:
    x, gamma, z = _emg_pieces(t, gamma, sigma_ns, t0_ns)
    base = special.ndtr(x / sigma_ns)
    out = np.empty_like(x)
    pos = z >= 0
    neg = ~pos
    out[pos] = base[pos] - 0.5 * special.erfcx(z[pos]) * np.exp(
        -(x[pos] ** 2) / (2.0 * sigma_ns**2)
    )
    c = 0.5 * (gamma[neg] * sigma_ns) ** 2 - gamma[neg] * x[neg]
    out[neg] = base[neg] - 0.5 * special.erfc(z[neg]) * np.exp(c)
    return out


def wrap_pulse_count(gamma_slow: float, period_ns: float, t0_ns: float) -> int:
    """Pulses to sum so the truncated tail is < 1e-6 of the slow amplitude."""
    if gamma_slow <= 0:
        raise ParameterError("need a positive slowest rate")
    needed = (-math.log(WRAP_TAIL_FRACTION) / gamma_slow + t0_ns) / period_ns
    return max(1, int(math.ceil(needed)) + 1)


def component_bin_integrals(
    gammas, sigma_ns: float, t0_ns: float, edges_ns: np.ndarray, period_ns: float
) -> np.ndarray:
    """Per-bin integrals of unit-area wrapped EMG pulses, one row per rate.

    Wrap-around: the pulse train contributes EMG(t + k*T) for k = 0..K where
    K keeps the geometric tail below WRAP_TAIL_FRACTION of the slowest
    component.
    """
    gammas = np.asarray(gammas, dtype=float)
    k_max = wrap_pulse_count(float(gammas.min()), period_ns, t0_ns)
    shifts = np.arange(k_max + 1) * period_ns
    # (n_comp, k, n_edges)
    t = edges_ns[None, None, :] + shifts[None, :, None]
    cdf = emg_cdf(t, gammas[:, None, None], sigma_ns, t0_ns)
    return np.diff(cdf, axis=2).sum(axis=1)


def _tabulated_bin_integrals(
    gammas, irf: InstrumentResponse, config: AcquisitionConfig
) -> np.ndarray:
    """Discrete periodic convolution path for a measured IRF table.

    The exponential is bin-integrated over one full period with the exact
    geometric wrap factor, then circularly convolved with the IRF mass
    vector resampled onto the acquisition binning and shifted by t0.
    """
    width_ns = config.bin_width_ps * 1e-3
    period_bins = int(round(config.repetition_period_ns / width_ns))
    edges = np.arange(period_bins + 1) * width_ns
    times, amps = irf.table
    times = np.asarray(times, dtype=float) + irf.t0_ns
    amps = np.asarray(amps, dtype=float)
    irf_mass = np.zeros(period_bins)
    # nearest-center placement keeps the discrete convolution aligned with
    # the bin labeling (left-edge flooring would shift everything by half a bin)
    idx = np.round(times / width_ns).astype(int) % period_bins
    np.add.at(irf_mass, idx, amps)
    irf_mass /= irf_mass.sum()

    out = np.empty((len(gammas), config.resolved_bins))
    for i, g in enumerate(gammas):
        decay = np.exp(-g * edges[:-1]) - np.exp(-g * edges[1:])
        decay /= -np.expm1(-g * config.repetition_period_ns)
        conv = np.real(np.fft.ifft(np.fft.fft(decay) * np.fft.fft(irf_mass)))
        out[i] = conv[: config.resolved_bins]
    return out


def expected_curve(
    params: DecayParams, irf: InstrumentResponse, config: AcquisitionConfig
) -> np.ndarray:
    """Expected counts per bin: normalized signal plus flat background.

    The signal part is rescaled so its in-window sum equals
    ``total_signal_counts`` exactly.
    """
    window_ns = config.resolved_bins * config.bin_width_ps * 1e-3
    if not (0.0 <= irf.t0_ns <= window_ns):
        raise ParameterError("IRF t0 must lie inside the acquisition window")
    comps = params.components()
    n = config.resolved_bins
    if not comps:
        return np.full(n, config.background_rate, dtype=float)

    amps = np.array([a for a, _ in comps])
    gammas = np.array([g for _, g in comps])
    if irf.table is not None:
        integrals = _tabulated_bin_integrals(gammas, irf, config)
    else:
        integrals = component_bin_integrals(
            gammas,
            irf.sigma_ns,
            irf.t0_ns,
            config.bin_edges_ns,
            config.repetition_period_ns,
        )
    signal = amps @ integrals
    total = signal.sum()
    if total <= 0:
        raise ParameterError("signal integrates to zero over the window")
    signal *= config.total_signal_counts / total
    return signal + config.background_rate


@dataclass(eq=False)
class DecayHistogram:
    """One recorded (or simulated) decay histogram with its metadata."""

    bin_edges_ns: np.ndarray
    counts: np.ndarray
    irf: InstrumentResponse
    config: AcquisitionConfig
    seed: int | None = None

    def __post_init__(self):
        edges = np.asarray(self.bin_edges_ns, dtype=float)
        counts = np.asarray(self.counts)
        if edges.ndim != 1 or counts.ndim != 1 or counts.size != edges.size - 1:
            raise ParameterError("counts must have one entry per bin")
        widths = np.diff(edges)
        if np.any(widths <= 0) or not np.allclose(widths, widths[0], rtol=1e-9):
            raise ParameterError("bin edges must be uniform and increasing")
        if np.any(counts < 0):
            raise ParameterError("counts must be >= 0")
        self.bin_edges_ns = edges
        self.counts = counts

    @property
    def bin_centers_ns(self) -> np.ndarray:
        return 0.5 * (self.bin_edges_ns[:-1] + self.bin_edges_ns[1:])

    @property
    def total_counts(self) -> float:
        return float(self.counts.sum())


def sample_histogram(
    expected,
    seed: int,
    *,
    irf: InstrumentResponse,
    config: AcquisitionConfig,
) -> DecayHistogram:
    """Poisson-sample an expected curve; identical seeds give identical data."""
    expected = np.asarray(expected, dtype=float)
    if np.any(expected < 0):
        raise ParameterError("expected counts must be >= 0")
    if np.all(expected == 0):
        raise DegenerateInputError("expected curve is identically zero")
    rng = np.random.default_rng(int(seed))
    counts = rng.poisson(expected)
    return DecayHistogram(
        bin_edges_ns=config.bin_edges_ns[: expected.size + 1],
        counts=counts,
        irf=irf,
        config=config,
        seed=int(seed),
    )


def simulate_decay(
    params: DecayParams,
    irf: InstrumentResponse,
    config: AcquisitionConfig,
    seed: int,
) -> tuple[DecayHistogram, np.ndarray]:
    """Expected curve plus one Poisson realization of it."""
    expected = expected_curve(params, irf, config)
    return sample_histogram(expected, seed, irf=irf, config=config), expected
