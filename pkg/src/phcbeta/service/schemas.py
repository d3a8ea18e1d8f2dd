"""Request/response models for the HTTP service.

Each model mirrors one core type field for field and converts with
``to_core``/``from_core`` so the service layer stays a thin shell.
"""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, Field

from ..bands import DispersionCurve, WaveguideGeometry
from ..beta import RatePoint, RateVsDetuning
from ..emission import RateModelConfig
from ..spectrum import SpectralModel, Spectrum
from ..tcspc import (
    AcquisitionConfig,
    DecayHistogram,
    DecayParams,
    InstrumentResponse,
)
from ..tuning import TuningCurve

import numpy as np


class GeometryModel(BaseModel):
    lattice_constant: float = 256.0
    hole_radius_ratio: float = 0.30
    effective_index: float = 3.44
    supercell_rows: int = 11
    membrane_thickness: float = 150.0
    waveguide_length_note: str = "100 um straight section, unused by the 2D model"

    def to_core(self) -> WaveguideGeometry:
        return WaveguideGeometry(**self.model_dump())

    @classmethod
    def from_core(cls, geometry: WaveguideGeometry) -> "GeometryModel":
        return cls(
            lattice_constant=geometry.lattice_constant,
            hole_radius_ratio=geometry.hole_radius_ratio,
            effective_index=geometry.effective_index,
            supercell_rows=geometry.supercell_rows,
            membrane_thickness=geometry.membrane_thickness,
            waveguide_length_note=geometry.waveguide_length_note,
        )


class DispersionModel(BaseModel):
    points_k: list[float]
    points_freq: list[float]
    band_edge_frequency: float
    band_edge_wavelength_nm: float
    lattice_constant: float
    effective_index: float
    orientation: int
    ng_freqs: list[float]
    ng_values: list[float]
    asym_coefficient: float
    gap_window: tuple[float, float] | None = None

    def to_core(self) -> DispersionCurve:
        return DispersionCurve.from_dict(self.model_dump())

    @classmethod
    def from_core(cls, curve: DispersionCurve) -> "DispersionModel":
        return cls(**curve.to_dict())


class RateConfigModel(BaseModel):
    coupling_scale: float = 0.4
    gamma_bg: float = 0.8
    gamma_0: float = 1.1
    broadening_fwhm: float = 0.0

    def to_core(self) -> RateModelConfig:
        return RateModelConfig(**self.model_dump())


class IrfModel(BaseModel):
    fwhm_ps: float = 280.0
    t0_ns: float = 2.0
    table_times_ns: list[float] | None = None
    table_amplitudes: list[float] | None = None

    def to_core(self) -> InstrumentResponse:
        table = None
        if self.table_times_ns is not None and self.table_amplitudes is not None:
            table = (
                np.asarray(self.table_times_ns),
                np.asarray(self.table_amplitudes),
            )
        return InstrumentResponse(fwhm_ps=self.fwhm_ps, t0_ns=self.t0_ns,
                                  table=table)


class AcquisitionModel(BaseModel):
    repetition_period_ns: float = 1e3 / 76.0
    bin_width_ps: float = 25.0
    n_bins: int | None = None
    total_signal_counts: float = 1e5
    background_rate: float = 0.0

    def to_core(self) -> AcquisitionConfig:
        return AcquisitionConfig(**self.model_dump())


class DecayParamsModel(BaseModel):
    amp_fast: float
    gamma_fast: float
    amp_slow: float = 0.0
    gamma_slow: float = 0.0

    def to_core(self) -> DecayParams:
        return DecayParams(**self.model_dump())


class HistogramModel(BaseModel):
    counts: list[float]
    irf: IrfModel = Field(default_factory=IrfModel)
    acquisition: AcquisitionModel = Field(default_factory=AcquisitionModel)
    seed: int | None = None

    def to_core(self) -> DecayHistogram:
        config = self.acquisition.to_core()
        counts = np.asarray(self.counts)
        return DecayHistogram(
            bin_edges_ns=config.bin_edges_ns[: counts.size + 1],
            counts=counts,
            irf=self.irf.to_core(),
            config=config,
            seed=self.seed,
        )

    @classmethod
    def from_core(cls, hist: DecayHistogram) -> "HistogramModel":
        table = hist.irf.table
        return cls(
            counts=[float(c) for c in hist.counts],
            irf=IrfModel(
                fwhm_ps=hist.irf.fwhm_ps,
                t0_ns=hist.irf.t0_ns,
                table_times_ns=None if table is None else list(map(float, table[0])),
                table_amplitudes=None if table is None else list(map(float, table[1])),
            ),
            acquisition=AcquisitionModel(
                repetition_period_ns=hist.config.repetition_period_ns,
                bin_width_ps=hist.config.bin_width_ps,
                n_bins=hist.config.n_bins,
                total_signal_counts=hist.config.total_signal_counts,
                background_rate=hist.config.background_rate,
            ),
            seed=hist.seed,
        )


class RatePointModel(BaseModel):
    detuning_nm: float
    gamma_tot: float
    sigma: float
    temperature_K: float
    converged: bool = True

    def to_core(self) -> RatePoint:
        return RatePoint(**self.model_dump())


class SeriesModel(BaseModel):
    label: str
    points: list[RatePointModel]
    band_edge_source: str = "spectrum"

    def to_core(self) -> RateVsDetuning:
        return RateVsDetuning(
            label=self.label,
            points=tuple(p.to_core() for p in self.points),
            band_edge_source=self.band_edge_source,
        )

    @classmethod
    def from_core(cls, series: RateVsDetuning) -> "SeriesModel":
        return cls(**series.to_dict())


class TuningCurveModel(BaseModel):
    label: str
    coefficients: tuple[float, float, float]
    domain: tuple[float, float]
    fit_rms: float = 0.0

    def to_core(self) -> TuningCurve:
        return TuningCurve(
            label=self.label,
            coefficients=self.coefficients,
            domain=self.domain,
            fit_rms=self.fit_rms,
        )

    @classmethod
    def from_core(cls, curve: TuningCurve) -> "TuningCurveModel":
        return cls(**curve.to_dict())


class SpectrumModel(BaseModel):
    wavelength_nm: list[float]
    intensity: list[float]
    resolution_nm: float = 0.15

    def to_core(self) -> Spectrum:
        return Spectrum(
            wavelength_nm=np.asarray(self.wavelength_nm),
            intensity=np.asarray(self.intensity),
            resolution_nm=self.resolution_nm,
        )


class LorentzianModel(BaseModel):
    center_nm: float
    fwhm_nm: float
    area: float


class GaussianModel(BaseModel):
    center_nm: float
    sigma_nm: float
    amplitude: float


class SpectralFitModel(BaseModel):
    lorentzians: list[LorentzianModel]
    gaussian: GaussianModel | None
    baseline: float
    residual_rms: float | None = None

    @classmethod
    def from_core(cls, model: SpectralModel) -> "SpectralFitModel":
        return cls(**model.to_dict())


# request bodies -------------------------------------------------------------


class BandsRequest(BaseModel):
    geometry: GeometryModel = Field(default_factory=GeometryModel)


class CalibrateRequest(BaseModel):
    geometry: GeometryModel = Field(default_factory=GeometryModel)
    target_wavelength_nm: float = 968.4
    tolerance_nm: float = 0.05


class RateCurveRequest(BaseModel):
    dispersion: DispersionModel
    config: RateConfigModel = Field(default_factory=RateConfigModel)
    wavelengths_nm: list[float] | None = None


class SimulateDecayRequest(BaseModel):
    params: DecayParamsModel
    irf: IrfModel = Field(default_factory=IrfModel)
    acquisition: AcquisitionModel = Field(default_factory=AcquisitionModel)
    seed: int


class FitDecayRequest(BaseModel):
    histogram: HistogramModel
    restart_seed: int = 0


class BatchItemModel(BaseModel):
    tag: Any = None
    histogram: HistogramModel


class FitBatchRequest(BaseModel):
    items: list[BatchItemModel]
    restart_seed: int = 0


class FitSpectrumRequest(BaseModel):
    spectrum: SpectrumModel
    min_prominence: float | None = None
    candidates: list[float] | None = None
    fit_gaussian: bool = True


class FitTuningRequest(BaseModel):
    temperatures_K: list[float]
    wavelengths_nm: list[float]
    label: str = "curve"


class ResonanceRequest(BaseModel):
    qd: TuningCurveModel
    edge: TuningCurveModel


class ExtractBetaRequest(BaseModel):
    series: SeriesModel
    gamma_0: float = 1.1


class FitRateModelRequest(BaseModel):
    series: SeriesModel
    dispersion: DispersionModel
    gamma_0: float = 1.1
    fixed_broadening: float | None = None


class ReportRequest(BaseModel):
    series_list: list[SeriesModel]
    gamma_0: float = 1.1


class ScenarioRequest(BaseModel):
    seed: int = 0
    effective_index: float | None = None
    gamma_0: float = 1.1


class HeadlineRequest(BaseModel):
    gamma_res: float
    gamma_nonres: float
    gamma_0: float = 1.1
