import logging
from dataclasses import dataclass, field


# Defaults are compiled in. Runs are reproducible from (config file, seed)
# alone, so nothing here is read from the environment.


@dataclass
class GridDefaults:
    cell_size_m: float = 5.0
    receiver_height_m: float = 1.5
    max_cells: int = 1_000_000


@dataclass
class TracerDefaults:
    num_samples: int = 1_000_000
    max_depth: int = 25
    reflection_loss_db: float = 6.0
    max_range_m: float = 5000.0
    stratified: bool = True
    direct_path: bool = True
    min_distance_m: float = 1.0
    batch_size: int = 2048


@dataclass
class StationDefaults:
    height_m: float = 15.0
    tx_power_dbm: float = 17.0
    frequency_hz: float = 3.5e9
    station_class: str = "femto"
    macro_height_m: float = 50.0
    macro_tx_power_dbm: float = 47.0


@dataclass
class PlacementDefaults:
    candidate_spacing_m: float = 15.0
    coverage_threshold_dbm: float = -75.0
    overshoot_factor: float = 1.1
    uniform_k_max: int = 12
    hill_iters_per_station: int = 50
    brute_max_candidates: int = 20


@dataclass
class PleDefaults:
    min_samples: int = 30
    min_distance_m: float = 10.0
    max_radius_m: float = 700.0
    gamma_floor: float = 2.0
    gamma_ceiling: float = 4.5


@dataclass
class UeDefaults:
    num_users: int = 10_000
    snr_margin_db: float = 15.0
    max_ue_power_dbm: float = 23.0
    sensitivity_dbm: dict = field(
        default_factory=lambda: {"macro": -100.0, "micro": -95.0, "pico": -92.0, "femto": -90.0}
    )


@dataclass
class PowerDefaults:
    gamma: float = 3.0
    s: float = 0.01
    base_tx_power_w: float = 100.0
    pa_efficiency: float = 0.4
    n_max: int = 16


@dataclass
class ExportDefaults:
    pgm_floor_dbm: float = -120.0
    pgm_ceiling_dbm: float = -30.0
    float_format: str = "%.6f"


@dataclass
class AppConfig:
    log_level: str = "INFO"
    threads: int = 1
    seed: int = 0

    @property
    def log_level_int(self) -> int:
        return getattr(logging, self.log_level.upper(), logging.INFO)


@dataclass
class Settings:
    grid: GridDefaults = field(default_factory=GridDefaults)
    tracer: TracerDefaults = field(default_factory=TracerDefaults)
    station: StationDefaults = field(default_factory=StationDefaults)
    placement: PlacementDefaults = field(default_factory=PlacementDefaults)
    ple: PleDefaults = field(default_factory=PleDefaults)
    ue: UeDefaults = field(default_factory=UeDefaults)
    power: PowerDefaults = field(default_factory=PowerDefaults)
    export: ExportDefaults = field(default_factory=ExportDefaults)
    app: AppConfig = field(default_factory=AppConfig)
    version: str = "0.3.0"


settings = Settings()
