"""Plane-wave band solver for a W1 line-defect waveguide in 2D.

The structure is a triangular lattice of circular air holes in a high-index
slab, reduced to two dimensions by replacing the slab with a uniform
effective index. A rectangular supercell, one period long along the
propagation axis and ``supercell_rows`` hole rows tall with the center row
removed, models the line defect. TE modes (in-plane electric field) are
solved in the H_z formulation with the inverse-dielectric-matrix rule, which
converges much faster than truncating 1/eps directly.

Internal units: lengths in lattice constants, reciprocal vectors in 2*pi/a,
wavevectors along the waveguide in 2*pi/a, frequencies as a/lambda.
Wavelengths cross into nm through ``lattice_constant``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg, special
from scipy.interpolate import PchipInterpolator

from .errors import (
    BandSolveError,
    CalibrationError,
    NoGuidedModeError,
    OutOfDomainError,
    ParameterError,
)

SQRT3_2 = math.sqrt(3.0) / 2.0
ZONE_BOUNDARY = 0.5

# Fraction of |H_z|^2 inside |y| < CORE_HALFWIDTH (units of a) above which a
# mode counts as core-localized. Extended supercell modes sit near
# 2*CORE_HALFWIDTH/height ~ 0.18 for 11 rows, guided modes well above 0.5.
CORE_HALFWIDTH = SQRT3_2
CORE_WEIGHT_THRESHOLD = 0.5

DEFAULT_CUTOFF = 4
CALIBRATION_BRACKET = (2.5, 3.44)
CALIBRATION_TARGET_WINDOW = (900.0, 1050.0)


@dataclass(frozen=True)
class WaveguideGeometry:
    """W1 waveguide geometry. Lengths in nm except the dimensionless ratio.

    ``hole_radius_ratio`` may be 0, which degenerates to a uniform medium
    (used by the empty-lattice verification); physical devices use
    0 < ratio < 0.5. ``membrane_thickness`` and ``waveguide_length_note``
    are recorded metadata only; the 2D model never reads them.
    """

    lattice_constant: float = 256.0
    hole_radius_ratio: float = 0.30
    effective_index: float = 3.44
    supercell_rows: int = 11
    membrane_thickness: float = 150.0
    waveguide_length_note: str = "100 um straight section, unused by the 2D model"

    def __post_init__(self):
        if not self.lattice_constant > 0:
            raise ParameterError("lattice_constant must be positive")
        if not (0.0 <= self.hole_radius_ratio < 0.5):
            raise ParameterError("hole_radius_ratio must lie in [0, 0.5)")
        if not self.effective_index > 1.0:
            raise ParameterError("effective_index must exceed 1")
        rows = self.supercell_rows
        if not isinstance(rows, (int, np.integer)) or rows < 7 or rows % 2 == 0:
            raise ParameterError("supercell_rows must be an odd integer >= 7")

    @property
    def supercell_height(self) -> float:
        """Supercell height in units of a."""
        return self.supercell_rows * SQRT3_2

    def hole_centers(self, *, bulk: bool = False) -> np.ndarray:
        """Hole centers (units of a) in the supercell; W1 omits the center row."""
        half = self.supercell_rows // 2
        centers = []
        for j in range(-half, half + 1):
            if j == 0 and not bulk:
                continue
            x = 0.5 if j % 2 else 0.0
            centers.append((x, j * SQRT3_2))
        return np.array(centers, dtype=float).reshape(-1, 2)


@dataclass(frozen=True, eq=False)
class PlaneWaveBasis:
    """Rectangular plane-wave basis for the supercell.

    ``reciprocal_cutoff`` bounds |G| per direction in units of 2*pi/a, so the
    y index range scales with the supercell height and ``wave_count`` grows
    quadratically with the cutoff.
    """

    reciprocal_cutoff: int
    wave_count: int
    g_reduced: np.ndarray  # (NG, 2), units of 2*pi/a
    g_index: np.ndarray  # (NG, 2) integer (m, n)
    nx: int
    ny: int
    supercell_rows: int

    @classmethod
    def for_geometry(
        cls, geometry: WaveguideGeometry, reciprocal_cutoff: int = DEFAULT_CUTOFF
    ) -> "PlaneWaveBasis":
        if reciprocal_cutoff < 3:
            raise ParameterError("reciprocal_cutoff must be >= 3")
        height = geometry.supercell_height
        m_max = int(reciprocal_cutoff)
        n_max = int(math.floor(reciprocal_cutoff * height + 1e-9))
        m = np.arange(-m_max, m_max + 1)
        n = np.arange(-n_max, n_max + 1)
        mm, nn = np.meshgrid(m, n, indexing="ij")
        g_index = np.stack([mm.ravel(), nn.ravel()], axis=1)
        g_reduced = np.stack(
            [g_index[:, 0].astype(float), g_index[:, 1] / height], axis=1
        )
        return cls(
            reciprocal_cutoff=int(reciprocal_cutoff),
            wave_count=g_index.shape[0],
            g_reduced=g_reduced,
            g_index=g_index,
            nx=m.size,
            ny=n.size,
            supercell_rows=geometry.supercell_rows,
        )


def epsilon_fourier(
    geometry: WaveguideGeometry, g_reduced, *, bulk: bool = False
) -> np.ndarray:
    """Fourier coefficients of eps(r) over the supercell.

    ``g_reduced``: (..., 2) reciprocal vectors in units of 2*pi/a. The closed
    form is the uniform background plus one Airy-disc (2*J1(x)/x) term per
    hole, phased by the hole centers.
    """
    g = np.atleast_2d(np.asarray(g_reduced, dtype=float))
    eps = geometry.effective_index**2
    ratio = geometry.hole_radius_ratio
    area = geometry.supercell_height  # cell is 1 x height in units of a
    gnorm = 2.0 * np.pi * np.hypot(g[:, 0], g[:, 1])

    arg = gnorm * ratio
    form = np.ones_like(arg)
    nz = arg > 1e-12
    form[nz] = 2.0 * special.j1(arg[nz]) / arg[nz]

    centers = geometry.hole_centers(bulk=bulk)
    if centers.size:
        phase = np.exp(-2j * np.pi * (g @ centers.T))
        structure = phase.sum(axis=1)
    else:
        structure = np.zeros(g.shape[0], dtype=complex)

    coeff = -(eps - 1.0) * (np.pi * ratio * ratio / area) * form * structure
    coeff = coeff.astype(complex)
    coeff[gnorm <= 1e-12] += eps
    if np.ndim(g_reduced) == 1:
        return coeff[0]
    return coeff


def dielectric_matrix(
    geometry: WaveguideGeometry, basis: PlaneWaveBasis, *, bulk: bool = False
) -> np.ndarray:
    """Hermitian matrix eps_hat(G_i - G_j) on the basis, via a difference table."""
    idx = basis.g_index
    height = geometry.supercell_height
    dm = np.arange(-(basis.nx - 1), basis.nx)
    dn = np.arange(-(basis.ny - 1), basis.ny)
    mm, nn = np.meshgrid(dm, dn, indexing="ij")
    g_diff = np.stack([mm.ravel().astype(float), nn.ravel() / height], axis=1)
    table = epsilon_fourier(geometry, g_diff, bulk=bulk).reshape(dm.size, dn.size)

    mi = idx[:, 0]
    ni = idx[:, 1]
    rows = mi[:, None] - mi[None, :] + (basis.nx - 1)
    cols = ni[:, None] - ni[None, :] + (basis.ny - 1)
    return table[rows, cols]


def inverse_dielectric(
    geometry: WaveguideGeometry, basis: PlaneWaveBasis, *, bulk: bool = False
) -> np.ndarray:
    """Matrix inverse of the dielectric matrix, re-symmetrized exactly."""
    eps_mat = dielectric_matrix(geometry, basis, bulk=bulk)
    eta = np.linalg.inv(eps_mat)
    return 0.5 * (eta + eta.conj().T)


def assemble_te_operator(
    geometry: WaveguideGeometry,
    basis: PlaneWaveBasis,
    k: float,
    *,
    bulk: bool = False,
    eta: np.ndarray | None = None,
) -> np.ndarray:
    """TE (H_z) operator at Bloch wavevector k (units of 2*pi/a, along x).

    Eigenvalues are nu^2 with nu = a/lambda. Hermitian by construction: the
    dot-product factor is real symmetric and eta is exactly Hermitian.
    """
    if eta is None:
        eta = inverse_dielectric(geometry, basis, bulk=bulk)
    q = basis.g_reduced + np.array([float(k), 0.0])
    dot = q @ q.T
    return dot * eta


def _solve_operator(op: np.ndarray, n_bands: int, k: float):
    try:
        vals, vecs = linalg.eigh(
            op, subset_by_index=(0, n_bands - 1), check_finite=False
        )
    except linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure path
        raise BandSolveError(
            f"eigensolver failed at k={k!r} (matrix size {op.shape[0]})",
            k=k,
            size=op.shape[0],
        ) from exc
    return np.sqrt(np.clip(vals, 0.0, None)), vecs


def solve_bands(
    geometry: WaveguideGeometry,
    basis: PlaneWaveBasis | None = None,
    k: float = ZONE_BOUNDARY,
    *,
    n_bands: int | None = None,
    bulk: bool = False,
    eta: np.ndarray | None = None,
) -> np.ndarray:
    """Eigenfrequencies (a/lambda, ascending) at a single k."""
    if basis is None:
        basis = PlaneWaveBasis.for_geometry(geometry)
    if not (0.0 <= k <= ZONE_BOUNDARY + 1e-12):
        raise ParameterError("k must lie in [0, 0.5] (units of 2*pi/a)")
    if n_bands is None:
        n_bands = min(basis.wave_count, 3 * geometry.supercell_rows)
    n_bands = min(n_bands, basis.wave_count)
    op = assemble_te_operator(geometry, basis, k, bulk=bulk, eta=eta)
    freqs, _ = _solve_operator(op, n_bands, k)
    return freqs


def _core_interval_matrix(basis: PlaneWaveBasis, height: float) -> np.ndarray:
    """I[n, n'] = integral over |y| < CORE_HALFWIDTH of exp(i(Gy_n - Gy_n') y)."""
    n_vals = np.arange(basis.ny)
    delta = n_vals[:, None] - n_vals[None, :]
    freq = 2.0 * np.pi * delta / height
    out = np.empty(delta.shape, dtype=float)
    nz = delta != 0
    out[nz] = 2.0 * np.sin(freq[nz] * CORE_HALFWIDTH) / freq[nz]
    out[~nz] = 2.0 * CORE_HALFWIDTH
    return out


def _core_weights(
    vecs: np.ndarray, basis: PlaneWaveBasis, height: float, interval: np.ndarray
) -> np.ndarray:
    """Fraction of integrated |H_z|^2 inside the core strip, one per column."""
    h = vecs.reshape(basis.nx, basis.ny, -1)
    core = np.einsum("mnb,nk,mkb->b", h, interval, h.conj()).real
    total = height * np.einsum("mnb,mnb->b", h, h.conj()).real
    return core / total


@dataclass(eq=False)
class BandStructure:
    """Lowest bands of the supercell over a k grid, with core-localization weights."""

    geometry: WaveguideGeometry
    basis: PlaneWaveBasis
    k_samples: np.ndarray
    frequencies: np.ndarray  # (n_k, n_stored), ascending per row
    core_weights: np.ndarray  # same shape
    bulk: bool
    guided_band_index: int | None = None


def default_k_samples(k_min: float = 0.3, count: int = 101) -> np.ndarray:
    """Uniform k grid ending exactly at the zone boundary."""
    if not (0.0 <= k_min < ZONE_BOUNDARY):
        raise ParameterError("k_min must lie in [0, 0.5)")
    if count < 2:
        raise ParameterError("count must be >= 2")
    return np.linspace(k_min, ZONE_BOUNDARY, int(count))


def solve_band_structure(
    geometry: WaveguideGeometry,
    basis: PlaneWaveBasis | None = None,
    k_samples: np.ndarray | None = None,
    *,
    bulk: bool = False,
    n_store: int | None = None,
) -> BandStructure:
    """Solve the supercell over a k grid, keeping the lowest bands and weights."""
    if basis is None:
        basis = PlaneWaveBasis.for_geometry(geometry)
    if k_samples is None:
        k_samples = default_k_samples()
    k_samples = np.asarray(k_samples, dtype=float)
    if k_samples.ndim != 1 or k_samples.size < 2:
        raise ParameterError("k_samples must be a 1D array with >= 2 points")
    if np.any(np.diff(k_samples) <= 0):
        raise ParameterError("k_samples must be strictly increasing")
    if k_samples[0] < 0 or k_samples[-1] > ZONE_BOUNDARY + 1e-12:
        raise ParameterError("k_samples must lie within [0, 0.5]")
    if n_store is None:
        n_store = geometry.supercell_rows + 8
    n_store = min(n_store, basis.wave_count)

    eta = inverse_dielectric(geometry, basis, bulk=bulk)
    height = geometry.supercell_height
    interval = _core_interval_matrix(basis, height)

    freqs = np.empty((k_samples.size, n_store))
    weights = np.empty_like(freqs)
    for i, k in enumerate(k_samples):
        op = assemble_te_operator(geometry, basis, k, eta=eta)
        f, v = _solve_operator(op, n_store, float(k))
        freqs[i] = f
        weights[i] = _core_weights(v, basis, height, interval)
    return BandStructure(
        geometry=geometry,
        basis=basis,
        k_samples=k_samples,
        frequencies=freqs,
        core_weights=weights,
        bulk=bulk,
    )


def projected_gap_window(bulk_bands: BandStructure) -> tuple[float, float]:
    """TE gap of the unperturbed crystal projected onto the waveguide axis.

    The bulk supercell holds one hole per row, so the dielectric-band cluster
    folds into exactly ``supercell_rows`` bands; the window sits between that
    cluster and the next one, maximized/minimized over the sampled k.
    """
    if not bulk_bands.bulk:
        raise ParameterError("projected_gap_window expects a bulk band structure")
    rows = bulk_bands.geometry.supercell_rows
    if bulk_bands.frequencies.shape[1] < rows + 1:
        raise ParameterError("bulk run stored too few bands for the gap window")
    low = float(np.max(bulk_bands.frequencies[:, rows - 1]))
    high = float(np.min(bulk_bands.frequencies[:, rows]))
    if high - low <= 1e-9:
        raise NoGuidedModeError("unperturbed crystal shows no projected gap")
    return low, high


@dataclass(eq=False)
class DispersionCurve:
    """Guided-band dispersion near the band edge, with a tabulated group index.

    ``orientation`` is +1 when the propagating side lies above the edge
    frequency (the W1 case: the edge is a frequency minimum at k = 0.5) and
    -1 for the mirrored case (e.g. the folded free-space band).
    """

    points_k: np.ndarray
    points_freq: np.ndarray
    band_edge_frequency: float
    band_edge_wavelength_nm: float
    lattice_constant: float
    effective_index: float
    orientation: int
    ng_freqs: np.ndarray  # ascending frequency
    ng_values: np.ndarray
    asym_coefficient: float
    gap_window: tuple[float, float] | None = None

    def __post_init__(self):
        self._interp = None

    def _interpolator(self) -> PchipInterpolator:
        if self._interp is None:
            u = self.orientation * (self.ng_freqs - self.band_edge_frequency)
            order = np.argsort(u)
            self._interp = PchipInterpolator(u[order], self.ng_values[order])
        return self._interp

    @property
    def edge_offsets(self) -> np.ndarray:
        """Tabulated |nu - nu_edge| values, ascending."""
        u = self.orientation * (self.ng_freqs - self.band_edge_frequency)
        return np.sort(u)

    def to_dict(self) -> dict:
        return {
            "points_k": self.points_k.tolist(),
            "points_freq": self.points_freq.tolist(),
            "band_edge_frequency": self.band_edge_frequency,
            "band_edge_wavelength_nm": self.band_edge_wavelength_nm,
            "lattice_constant": self.lattice_constant,
            "effective_index": self.effective_index,
            "orientation": self.orientation,
            "ng_freqs": self.ng_freqs.tolist(),
            "ng_values": self.ng_values.tolist(),
            "asym_coefficient": self.asym_coefficient,
            "gap_window": list(self.gap_window) if self.gap_window else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DispersionCurve":
        gap = data.get("gap_window")
        return cls(
            points_k=np.asarray(data["points_k"], dtype=float),
            points_freq=np.asarray(data["points_freq"], dtype=float),
            band_edge_frequency=float(data["band_edge_frequency"]),
            band_edge_wavelength_nm=float(data["band_edge_wavelength_nm"]),
            lattice_constant=float(data["lattice_constant"]),
            effective_index=float(data["effective_index"]),
            orientation=int(data["orientation"]),
            ng_freqs=np.asarray(data["ng_freqs"], dtype=float),
            ng_values=np.asarray(data["ng_values"], dtype=float),
            asym_coefficient=float(data["asym_coefficient"]),
            gap_window=tuple(gap) if gap else None,
        )


def build_dispersion_curve(
    k: np.ndarray,
    freq: np.ndarray,
    geometry: WaveguideGeometry,
    *,
    gap_window: tuple[float, float] | None = None,
) -> DispersionCurve:
    """Build a DispersionCurve from one band sampled on a uniform k grid.

    The band edge is the last sample (largest k, normally the zone boundary).
    The group index n_g = |dk/dnu| is formed by central differences at the
    interior points of the longest monotone run ending at the edge; between
    the innermost tabulated point and the edge itself an inverse-square-root
    asymptote (matched at that point) continues the table, so n_g diverges
    as nu approaches the edge.
    """
    k = np.asarray(k, dtype=float)
    freq = np.asarray(freq, dtype=float)
    if k.ndim != 1 or k.shape != freq.shape or k.size < 5:
        raise ParameterError("need matching 1D arrays with >= 5 samples")
    dk = np.diff(k)
    if np.any(dk <= 0) or not np.allclose(dk, dk[0], rtol=1e-6, atol=0):
        raise ParameterError("k samples must be uniform and strictly increasing")

    edge = float(freq[-1])
    step = freq[-2] - edge
    if step == 0:
        raise ParameterError("band is flat at the edge; no dispersion to extract")
    orientation = 1 if step > 0 else -1

    start = k.size - 2
    while start > 0 and orientation * (freq[start - 1] - freq[start]) > 0:
        start -= 1
    seg_k = k[start:]
    seg_f = freq[start:]
    if seg_k.size < 4:
        raise ParameterError("monotone segment at the band edge is too short")

    interior = slice(1, seg_k.size - 1)
    ng = np.abs(
        (seg_k[2:] - seg_k[:-2]) / (seg_f[2:] - seg_f[:-2])
    )
    ng_freqs = seg_f[interior]
    order = np.argsort(ng_freqs)
    ng_freqs = ng_freqs[order]
    ng_vals = ng[order]

    offsets = orientation * (ng_freqs - edge)
    nearest = int(np.argmin(offsets))
    asym = float(ng_vals[nearest] * math.sqrt(offsets[nearest]))

    return DispersionCurve(
        points_k=seg_k.copy(),
        points_freq=seg_f.copy(),
        band_edge_frequency=edge,
        band_edge_wavelength_nm=geometry.lattice_constant / edge,
        lattice_constant=geometry.lattice_constant,
        effective_index=geometry.effective_index,
        orientation=orientation,
        ng_freqs=ng_freqs,
        ng_values=ng_vals,
        asym_coefficient=asym,
        gap_window=gap_window,
    )


def extract_guided_band(
    bands: BandStructure, *, bulk_reference: BandStructure | None = None
) -> DispersionCurve:
    """Pick the fundamental guided band out of the supercell spectrum.

    A candidate at each k must sit inside the projected gap window of the
    unperturbed crystal and carry more than half of |H_z|^2 in the core
    strip; raw band counting is never used. Starting from the lowest
    candidate at the zone boundary, the band is followed toward smaller k by
    nearest-frequency continuity until candidates run out.
    """
    k = bands.k_samples
    if k.size < 32:
        raise ParameterError("guided-band extraction needs >= 32 k samples")
    if abs(k[-1] - ZONE_BOUNDARY) > 1e-12:
        raise ParameterError("k grid must end exactly at the zone boundary")

    if bulk_reference is None:
        bulk_reference = solve_band_structure(
            bands.geometry,
            bands.basis,
            k,
            bulk=True,
            n_store=bands.geometry.supercell_rows + 2,
        )
    low, high = projected_gap_window(bulk_reference)
    margin = 1e-9 * (high - low)

    freqs = bands.frequencies
    weights = bands.core_weights

    def candidates(i: int) -> np.ndarray:
        f = freqs[i]
        mask = (
            (f > low + margin)
            & (f < high - margin)
            & (weights[i] > CORE_WEIGHT_THRESHOLD)
        )
        return np.flatnonzero(mask)

    edge_cands = candidates(k.size - 1)
    if edge_cands.size == 0:
        raise NoGuidedModeError(
            "no core-localized mode inside the gap window at the zone boundary"
        )
    col = int(edge_cands[np.argmin(freqs[-1, edge_cands])])
    bands.guided_band_index = col

    seg_k = [k[-1]]
    seg_f = [freqs[-1, col]]
    prev = seg_f[0]
    jump_limit = 0.25 * (high - low)
    for i in range(k.size - 2, -1, -1):
        cands = candidates(i)
        if cands.size == 0:
            break
        pick = cands[np.argmin(np.abs(freqs[i, cands] - prev))]
        value = freqs[i, pick]
        if abs(value - prev) > jump_limit:
            break
        seg_k.append(k[i])
        seg_f.append(value)
        prev = value

    seg_k.reverse()
    seg_f.reverse()
    if len(seg_k) < 5:
        raise NoGuidedModeError("guided band too short to characterize")
    return build_dispersion_curve(
        np.array(seg_k), np.array(seg_f), bands.geometry, gap_window=(low, high)
    )


def group_index(curve: DispersionCurve, freq) -> np.ndarray | float:
    """n_g = |dk/dnu| at frequency nu (a/lambda units), from the tabulation.

    Queries between the innermost tabulated point and the band edge use the
    inverse-square-root continuation; the edge itself maps to +inf. Gap-side
    frequencies and frequencies beyond the table raise OutOfDomainError.
    """
    scalar = np.isscalar(freq) or np.ndim(freq) == 0
    nu = np.atleast_1d(np.asarray(freq, dtype=float))
    u = curve.orientation * (nu - curve.band_edge_frequency)
    offsets = curve.edge_offsets
    u_min, u_max = offsets[0], offsets[-1]
    if np.any(u < 0):
        raise OutOfDomainError(
            "frequency lies inside the band gap; the group index is undefined there"
        )
    if np.any(u > u_max * (1 + 1e-12)):
        raise OutOfDomainError("frequency beyond the tabulated dispersion range")

    out = np.empty_like(u)
    at_edge = u == 0
    near = (~at_edge) & (u < u_min)
    inside = u >= u_min
    out[at_edge] = np.inf
    if np.any(near):
        out[near] = curve.asym_coefficient / np.sqrt(u[near])
    if np.any(inside):
        out[inside] = curve._interpolator()(np.minimum(u[inside], u_max))
    return float(out[0]) if scalar else out


def band_edge_wavelength(curve: DispersionCurve) -> float:
    """Band-edge wavelength in nm."""
    return curve.band_edge_wavelength_nm


def zone_boundary_edge(
    geometry: WaveguideGeometry, basis: PlaneWaveBasis | None = None
) -> tuple[float, float]:
    """(nu_edge, lambda_edge_nm) from k = 0.5 alone; used by calibration.

    The local gap window at the zone boundary comes from a bulk solve there;
    the edge is the lowest core-localized defect mode inside it.
    """
    if basis is None:
        basis = PlaneWaveBasis.for_geometry(geometry)
    rows = geometry.supercell_rows
    bulk_freqs = solve_bands(
        geometry, basis, ZONE_BOUNDARY, n_bands=rows + 1, bulk=True
    )
    low, high = float(bulk_freqs[rows - 1]), float(bulk_freqs[rows])
    if high - low <= 1e-9:
        raise NoGuidedModeError("no local gap at the zone boundary")

    eta = inverse_dielectric(geometry, basis)
    op = assemble_te_operator(geometry, basis, ZONE_BOUNDARY, eta=eta)
    n_store = min(rows + 8, basis.wave_count)
    freqs, vecs = _solve_operator(op, n_store, ZONE_BOUNDARY)
    height = geometry.supercell_height
    interval = _core_interval_matrix(basis, height)
    weights = _core_weights(vecs, basis, height, interval)
    mask = (freqs > low) & (freqs < high) & (weights > CORE_WEIGHT_THRESHOLD)
    if not np.any(mask):
        raise NoGuidedModeError("no core-localized mode in the zone-boundary gap")
    nu_edge = float(freqs[mask].min())
    return nu_edge, geometry.lattice_constant / nu_edge


@dataclass(frozen=True)
class CalibrationResult:
    effective_index: float
    band_edge_wavelength_nm: float
    residual_nm: float
    iterations: int
    target_nm: float


def calibrate_effective_index(
    geometry: WaveguideGeometry,
    target_wavelength_nm: float = 968.4,
    *,
    basis: PlaneWaveBasis | None = None,
    tolerance_nm: float = 0.05,
    max_iterations: int = 80,
) -> CalibrationResult:
    """Bisect the effective index so the band edge lands on the target.

    The edge wavelength increases monotonically with the index, so plain
    bisection over [2.5, 3.44] is enough; each trial needs only the
    zone-boundary solve.
    """
    lo_t, hi_t = CALIBRATION_TARGET_WINDOW
    if not (lo_t < target_wavelength_nm < hi_t):
        raise CalibrationError(
            f"target wavelength {target_wavelength_nm!r} nm outside the "
            f"supported window ({lo_t:.0f}, {hi_t:.0f}) nm"
        )
    if basis is None:
        basis = PlaneWaveBasis.for_geometry(geometry)

    def edge_at(n_eff: float) -> float:
        trial = replace(geometry, effective_index=n_eff)
        try:
            return zone_boundary_edge(trial, basis)[1]
        except NoGuidedModeError as exc:
            raise CalibrationError(
                f"no guided band edge at effective_index={n_eff:.4f}: {exc}"
            ) from exc

    lo, hi = CALIBRATION_BRACKET
    f_lo = edge_at(lo) - target_wavelength_nm
    f_hi = edge_at(hi) - target_wavelength_nm
    if abs(f_hi) <= tolerance_nm:
        return CalibrationResult(hi, f_hi + target_wavelength_nm, f_hi, 2, target_wavelength_nm)
    if abs(f_lo) <= tolerance_nm:
        return CalibrationResult(lo, f_lo + target_wavelength_nm, f_lo, 2, target_wavelength_nm)
    if f_lo > 0 or f_hi < 0:
        raise CalibrationError(
            f"target {target_wavelength_nm} nm not bracketed by effective indices "
            f"[{lo}, {hi}] (edges {f_lo + target_wavelength_nm:.2f}, "
            f"{f_hi + target_wavelength_nm:.2f} nm)"
        )

    iterations = 2
    while iterations < max_iterations:
        mid = 0.5 * (lo + hi)
        f_mid = edge_at(mid) - target_wavelength_nm
        iterations += 1
        if abs(f_mid) <= tolerance_nm:
            return CalibrationResult(
                mid, f_mid + target_wavelength_nm, f_mid, iterations, target_wavelength_nm
            )
        if f_mid > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-9:
            break
    raise CalibrationError(
        f"bisection did not reach {tolerance_nm} nm within {max_iterations} iterations"
    )
