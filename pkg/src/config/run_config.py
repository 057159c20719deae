"""Pydantic schemas for the per-run config file."""

from __future__ import annotations

import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.config.settings import settings
from src.core.placement import StationTemplate
from src.core.power import STATION_CLASSES, DensificationParams, get_station_class
from src.core.propagation import RayTracerConfig, Transmitter
from src.core.scene import GridSpec, Scene
from src.core.synthetic import SyntheticParams
from src.core.ue import UeSimConfig


class SceneKind(str, Enum):
    """Synthetic scene generators"""
    UNIFORM_CITY = "uniform-city"
    ASYMMETRIC_CITY = "asymmetric-city"
    EMPTY = "empty"


class Algorithm(str, Enum):
    GREEDY = "greedy"
    HILL = "hill"
    UNIFORM = "uniform"
    BRUTE = "brute"


class PleMode(str, Enum):
    FIT = "fit"
    HEATMAP = "heatmap"


class NetworkKind(str, Enum):
    STATIONS = "stations"
    GREEDY = "greedy"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ============================================================================
# Scene / grid / tracer
# ============================================================================

class SyntheticSection(_Section):
    """Synthetic scene request"""
    kind: SceneKind = Field(..., description="Generator name")
    seed: int = Field(0, description="Generator seed")
    width_m: float = Field(300.0, gt=0)
    depth_m: float = Field(300.0, gt=0)
    density: float = Field(0.5, ge=0.0, le=1.0)
    min_height_m: float = Field(10.0, gt=0)
    max_height_m: float = Field(40.0, gt=0)

    def to_params(self) -> SyntheticParams:
        return SyntheticParams(
            width_m=self.width_m,
            depth_m=self.depth_m,
            density=self.density,
            min_height_m=self.min_height_m,
            max_height_m=self.max_height_m,
        )


class SceneSource(_Section):
    """Either a scene file or a synthetic generator, never both"""
    path: Optional[str] = Field(None, description="Scene JSON file")
    synthetic: Optional[SyntheticSection] = None

    @model_validator(mode="after")
    def _exactly_one(self) -> "SceneSource":
        if (self.path is None) == (self.synthetic is None):
            raise ValueError("set exactly one of scene.path or scene.synthetic")
        return self


class GridSection(_Section):
    cell_size_m: float = Field(settings.grid.cell_size_m, gt=0)
    receiver_height_m: float = Field(settings.grid.receiver_height_m, ge=0)
    max_cells: int = Field(settings.grid.max_cells, ge=1)

    def to_spec(self) -> GridSpec:
        return GridSpec(cell_size_m=self.cell_size_m, receiver_height_m=self.receiver_height_m)


class TracerSection(_Section):
    num_samples: int = Field(settings.tracer.num_samples, ge=1, description="Rays launched")
    max_depth: int = Field(settings.tracer.max_depth, ge=0, description="Reflection bounces")
    reflection_loss_db: float = Field(settings.tracer.reflection_loss_db, ge=0)
    max_range_m: float = Field(settings.tracer.max_range_m, gt=0)
    stratified: bool = settings.tracer.stratified
    direct_path: bool = settings.tracer.direct_path
    sector_start_deg: float = 0.0
    sector_width_deg: float = Field(360.0, gt=0, le=360)
    min_distance_m: float = Field(settings.tracer.min_distance_m, gt=0)
    batch_size: int = Field(settings.tracer.batch_size, ge=1)

    def to_config(self, seed: int) -> RayTracerConfig:
        return RayTracerConfig(
            num_samples=self.num_samples,
            max_depth=self.max_depth,
            reflection_loss_db=self.reflection_loss_db,
            max_range_m=self.max_range_m,
            seed=seed,
            stratified=self.stratified,
            direct_path=self.direct_path,
            sector_start_deg=self.sector_start_deg,
            sector_width_deg=self.sector_width_deg,
            min_distance_m=self.min_distance_m,
        )


# ============================================================================
# Stations
# ============================================================================

class StationSection(_Section):
    """One transmitter; position defaults to the scene center"""
    position: Optional[Tuple[float, float]] = None
    height_m: float = Field(settings.station.height_m, gt=0)
    tx_power_dbm: float = settings.station.tx_power_dbm
    frequency_hz: float = Field(settings.station.frequency_hz, gt=0)
    station_class: str = settings.station.station_class

    @field_validator("station_class")
    @classmethod
    def _known_class(cls, value: str) -> str:
        if value not in STATION_CLASSES:
            raise ValueError(f"unknown station class {value!r}")
        return value

    def to_template(self) -> StationTemplate:
        return StationTemplate(
            height_m=self.height_m,
            tx_power_dbm=self.tx_power_dbm,
            frequency_hz=self.frequency_hz,
            station_class=self.station_class,
        )

    def to_transmitter(self, scene: Scene) -> Transmitter:
        if self.position is None:
            x_min, y_min, x_max, y_max = scene.bounds
            position = ((x_min + x_max) / 2.0, (y_min + y_max) / 2.0)
        else:
            position = self.position
        if not scene.contains(*position):
            raise ValueError(f"station position {position} lies outside scene bounds {scene.bounds}")
        return self.to_template().at(position)


def _macro_station() -> StationSection:
    macro = get_station_class("macro")
    return StationSection(
        height_m=settings.station.macro_height_m,
        tx_power_dbm=settings.station.macro_tx_power_dbm,
        station_class=macro.name,
    )


# ============================================================================
# Module sections
# ============================================================================

class PlacementSection(_Section):
    algorithm: Algorithm = Algorithm.GREEDY
    candidate_spacing_m: float = Field(settings.placement.candidate_spacing_m, gt=0)
    coverage_threshold_dbm: float = settings.placement.coverage_threshold_dbm
    macro_threshold_dbm: Optional[float] = Field(
        None, description="Threshold for the macro reference e_m; when unset, coverage_threshold_dbm"
    )
    overshoot_factor: float = Field(settings.placement.overshoot_factor, ge=1.0)
    target_ratio: Optional[float] = Field(
        None, gt=0, le=1, description="Fixed target; when unset, min(1, overshoot * e_m) of the macro"
    )
    hill_iters_per_station: int = Field(settings.placement.hill_iters_per_station, ge=1)
    uniform_k_max: int = Field(settings.placement.uniform_k_max, ge=1)
    brute_max_candidates: int = Field(settings.placement.brute_max_candidates, ge=1, le=20)
    macro: StationSection = Field(default_factory=_macro_station)
    class_sweep: bool = False


class PleSection(_Section):
    mode: PleMode = PleMode.FIT
    max_radius_m: float = Field(settings.ple.max_radius_m, gt=0)
    min_samples: int = Field(settings.ple.min_samples, ge=2)
    min_distance_m: float = Field(settings.ple.min_distance_m, ge=0)
    heatmap_spacing_m: float = Field(50.0, gt=0, description="Lattice spacing of heatmap candidates")
    environment: str = Field("urban", description="Ericsson reference coefficient set")


class PowerSection(_Section):
    gamma: float = Field(settings.power.gamma, gt=0)
    s_values: List[float] = Field(default_factory=lambda: [0.05, 0.01, 0.005, 0.0001])
    base_tx_power_w: float = Field(settings.power.base_tx_power_w, gt=0)
    pa_efficiency: float = Field(settings.power.pa_efficiency, gt=0, le=1)
    n_max: int = Field(settings.power.n_max, ge=1)
    counts: Dict[str, int] = Field(default_factory=lambda: {"macro": 1, "femto": 30})

    @field_validator("s_values")
    @classmethod
    def _non_negative(cls, values: List[float]) -> List[float]:
        if not values or any(s < 0 for s in values):
            raise ValueError("s_values needs at least one value, all >= 0")
        return values

    @field_validator("counts")
    @classmethod
    def _known_counts(cls, counts: Dict[str, int]) -> Dict[str, int]:
        for name, count in counts.items():
            if name not in STATION_CLASSES:
                raise ValueError(f"unknown station class {name!r}")
            if count < 0:
                raise ValueError(f"count for {name} must be >= 0")
        return counts

    def params(self, s: float) -> DensificationParams:
        return DensificationParams(
            gamma=self.gamma, s=s, base_tx_power_w=self.base_tx_power_w, pa_efficiency=self.pa_efficiency
        )


class NetworkSection(_Section):
    """A network for UE comparison: explicit stations, or the greedy placement result"""
    kind: NetworkKind = NetworkKind.STATIONS
    stations: List[StationSection] = Field(default_factory=list)

    @model_validator(mode="after")
    def _stations_present(self) -> "NetworkSection":
        if self.kind == NetworkKind.STATIONS and not self.stations:
            raise ValueError("a 'stations' network needs at least one station")
        return self


class UeSection(_Section):
    num_users: int = Field(settings.ue.num_users, ge=1)
    snr_margin_db: float = settings.ue.snr_margin_db
    max_ue_power_dbm: float = settings.ue.max_ue_power_dbm
    sensitivity_dbm: Dict[str, float] = Field(default_factory=lambda: dict(settings.ue.sensitivity_dbm))
    downlink_threshold_dbm: Optional[Dict[str, float]] = None
    network_a: NetworkSection = Field(
        default_factory=lambda: NetworkSection(kind=NetworkKind.STATIONS, stations=[_macro_station()])
    )
    network_b: NetworkSection = Field(default_factory=lambda: NetworkSection(kind=NetworkKind.GREEDY))

    def to_config(self, seed: int, default_threshold_dbm: float) -> UeSimConfig:
        thresholds = self.downlink_threshold_dbm or {name: default_threshold_dbm for name in STATION_CLASSES}
        return UeSimConfig(
            num_users=self.num_users,
            sensitivity_dbm=dict(self.sensitivity_dbm),
            snr_margin_db=self.snr_margin_db,
            max_ue_power_dbm=self.max_ue_power_dbm,
            seed=seed,
            downlink_threshold_dbm=dict(thresholds),
        )


# ============================================================================
# Run config
# ============================================================================

class RunConfig(_Section):
    """One run: scene source, module parameters, output directory and seed"""
    scene: SceneSource
    grid: GridSection = Field(default_factory=GridSection)
    tracer: TracerSection = Field(default_factory=TracerSection)
    station: StationSection = Field(default_factory=StationSection)
    placement: PlacementSection = Field(default_factory=PlacementSection)
    ple: PleSection = Field(default_factory=PleSection)
    power: PowerSection = Field(default_factory=PowerSection)
    ue: UeSection = Field(default_factory=UeSection)
    output_dir: str = "out"
    seed: int = settings.app.seed
    threads: int = Field(settings.app.threads, ge=1)

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Apply non-None flag values and re-validate; flags win over file values."""
        updates = {k: v for k, v in overrides.items() if v is not None}
        if not updates:
            return self
        return RunConfig.model_validate({**self.model_dump(), **updates})

    def echo(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


def load_run_config(path: Path | str) -> RunConfig:
    """Parse and validate a run config file; raises FileNotFoundError or pydantic ValidationError."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    return RunConfig.model_validate(data)
