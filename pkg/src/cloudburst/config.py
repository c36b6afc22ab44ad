"""Dataclass configuration tree and the JSON run manifest.

A run is fully specified by (SimConfig, seed): every stochastic stream in
the simulation derives from the seed, so the manifest plus seed pins the
whole artifact set.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .runtime.governance import GovernancePolicy
from .runtime.messages import FaultSpec


@dataclass
class WorldConfig:
    nx: int = 64
    ny: int = 64
    cell_km: float = 1.0
    duration_min: float = 180.0
    storm_class: str = "cloudburst"      # cloudburst | moderate | dry
    n_cells_min: int = 2
    n_cells_max: int = 4
    orographic_gamma: float = 2.0
    event_threshold: float = 40.0        # mm/h, labels flash-flood intervals
    cloudburst_min_peak: float = 100.0   # mm/h, forces >100 mm/h truth maxima
    cell_lead_in: float = 20.0           # minutes of pre-initiation drizzle
    drizzle_frac: float = 0.035


@dataclass
class SensorConfig:
    radar_noise_sigma: float = 0.12
    shadow_frac_min: float = 0.10
    shadow_frac_max: float = 0.20
    n_gauges: int = 12
    gauge_latency: float = 5.0
    satellite_factor: int = 4
    satellite_latency: float = 15.0
    satellite_noise_sigma: float = 0.0


@dataclass
class CommunityConfig:
    n_districts: int = 6
    road_spacing: int = 4
    population_total: float = 50_000.0
    d_crit: float = 0.3                  # m of water that closes an edge
    edge_travel_min: float = 4.0


@dataclass
class PerceptionConfig:
    history_k: int = 3
    theta_init: float = 0.9
    staleness_ticks: int = 2
    idw_power: float = 2.0
    idw_neighbors: int = 8
    candidate_ttl: float = 30.0


@dataclass
class ForecastConfig:
    members: int = 20
    horizon: float = 30.0
    block_size: int = 16
    search_radius: int = 3
    sigma_vel: float = 0.06              # cells/min velocity jitter
    sigma_int: float = 0.25              # lognormal intensity jitter
    spread_inflation: float = 1.0
    coarse_factor: int = 8
    beta: float = 2.0                    # terrain weighting in downscaling
    residual_sigma: float = 0.05
    inject_rate: float = 55.0            # mm/h of an injected nascent cell at full lead
    inject_radius: float = 3.5


@dataclass
class HydroConfig:
    reservoir_k: float = 45.0            # minutes
    channel_acc_threshold: int = 12      # cells of upstream area
    alpha_depth: float = 0.12            # m


@dataclass
class TriageConfig:
    l_miss: float = 9.0
    l_false: float = 1.0
    tier_multipliers: dict = field(default_factory=lambda: {
        "watch": 0.2, "warning": 1.0, "evacuate": 3.0})
    depth_evac: float = 0.4
    alert_threshold_mmh: float = 40.0
    verify_lead: float = 30.0
    alert_expiry: float = 30.0


@dataclass
class Channel:
    name: str
    coverage: float
    delay_kind: str                      # exp | fixed
    delay_param: float


def default_channels() -> list[Channel]:
    return [Channel("cell_broadcast", 0.85, "exp", 2.0),
            Channel("siren", 0.60, "fixed", 1.0),
            Channel("radio", 0.50, "exp", 5.0)]


@dataclass
class ChannelsConfig:
    channels: list[Channel] = field(default_factory=default_channels)
    reach_window: float = 10.0


@dataclass
class RoutingConfig:
    evac_window: float = 60.0


@dataclass
class LearningConfig:
    bins: int = 10
    eta: float = 0.1
    pstar_min: float = 0.05
    pstar_max: float = 0.35
    spread_min: float = 0.5
    spread_max: float = 2.0


@dataclass
class Toggles:
    """Agent on/off switches separating MAS, baseline and ablations."""

    ensemble: bool = True                # False -> single deterministic member
    initiation: bool = True
    terrain_downscaling: bool = True     # False -> block replication
    learning: bool = True
    multi_channel: bool = True
    adaptive_routes: bool = True         # False -> static dry-graph routes


@dataclass
class SimConfig:
    cadence_minutes: float = 5.0
    world: WorldConfig = field(default_factory=WorldConfig)
    sensors: SensorConfig = field(default_factory=SensorConfig)
    community: CommunityConfig = field(default_factory=CommunityConfig)
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    forecast: ForecastConfig = field(default_factory=ForecastConfig)
    hydro: HydroConfig = field(default_factory=HydroConfig)
    triage: TriageConfig = field(default_factory=TriageConfig)
    channels: ChannelsConfig = field(default_factory=ChannelsConfig)
    routing: RoutingConfig = field(default_factory=RoutingConfig)
    learning: LearningConfig = field(default_factory=LearningConfig)
    governance: GovernancePolicy = field(default_factory=GovernancePolicy)
    toggles: Toggles = field(default_factory=Toggles)
    faults: list[FaultSpec] = field(default_factory=list)

    @property
    def pstar_default(self) -> float:
        t = self.triage
        return t.l_false / (t.l_false + t.l_miss)


def mas_config(**overrides) -> SimConfig:
    cfg = SimConfig(**overrides)
    return cfg


def baseline_config(**overrides) -> SimConfig:
    """Feed-forward baseline: identical inputs, every coordination
    mechanism switched off."""
    cfg = SimConfig(**overrides)
    cfg.toggles = Toggles(ensemble=False, initiation=False,
                          terrain_downscaling=False, learning=False,
                          multi_channel=False, adaptive_routes=False)
    cfg.channels = ChannelsConfig(channels=[default_channels()[0]])
    return cfg


ABLATABLE = ("initiation", "downscaling", "learning")


def ablation_config(component: str, **overrides) -> SimConfig:
    if component not in ABLATABLE:
        raise ValueError(f"unknown ablation component {component!r}")
    cfg = mas_config(**overrides)
    if component == "initiation":
        cfg.toggles.initiation = False
    elif component == "downscaling":
        cfg.toggles.terrain_downscaling = False
    elif component == "learning":
        cfg.toggles.learning = False
    return cfg


# -- manifest -----------------------------------------------------------------

def _to_plain(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _to_plain(getattr(obj, f.name))
                for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(x) for x in obj]
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    return obj


def _from_plain(cls, data):
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        val = data[f.name]
        if cls is SimConfig and f.name in _NESTED:
            if f.name == "channels" and isinstance(val, dict):
                inner = [_from_plain(Channel, c) for c in val.get("channels", [])]
                val = ChannelsConfig(channels=inner,
                                     reach_window=val.get("reach_window", 10.0))
            elif f.name == "faults":
                val = [FaultSpec(kind=d["kind"], target=d["target"],
                                 window=tuple(d["window"]),
                                 magnitude=d.get("magnitude", 0.0)) for d in val]
            else:
                val = _from_plain(_NESTED[f.name], val)
        kwargs[f.name] = val
    return cls(**kwargs)


_NESTED = {
    "world": WorldConfig, "sensors": SensorConfig, "community": CommunityConfig,
    "perception": PerceptionConfig, "forecast": ForecastConfig,
    "hydro": HydroConfig, "triage": TriageConfig, "channels": ChannelsConfig,
    "routing": RoutingConfig, "learning": LearningConfig,
    "governance": GovernancePolicy, "toggles": Toggles, "faults": list,
}


def manifest_dict(cfg: SimConfig, seed: int, mode: str = "mas") -> dict:
    return {"seed": seed, "mode": mode, "config": _to_plain(cfg)}


def save_manifest(cfg: SimConfig, seed: int, path: str | Path,
                  mode: str = "mas") -> None:
    Path(path).write_text(json.dumps(manifest_dict(cfg, seed, mode),
                                     indent=2, sort_keys=True))


def load_manifest(path: str | Path) -> tuple[SimConfig, int, str]:
    data = json.loads(Path(path).read_text())
    cfg = _from_plain(SimConfig, data.get("config", {}))
    mode = data.get("mode", "mas")
    if mode == "baseline":
        base = baseline_config()
        cfg.toggles = base.toggles
        cfg.channels = ChannelsConfig(channels=[default_channels()[0]])
    elif mode.startswith("ablation:"):
        comp = mode.split(":", 1)[1]
        cfg = _apply_ablation(cfg, comp)
    return cfg, int(data["seed"]), mode


def _apply_ablation(cfg: SimConfig, component: str) -> SimConfig:
    if component not in ABLATABLE:
        raise ValueError(f"unknown ablation component {component!r}")
    if component == "initiation":
        cfg.toggles.initiation = False
    elif component == "downscaling":
        cfg.toggles.terrain_downscaling = False
    elif component == "learning":
        cfg.toggles.learning = False
    return cfg
