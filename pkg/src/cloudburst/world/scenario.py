"""Scenario assembly: terrain + cell schedule + sensors + community,
truth evaluation, and flash-flood event labeling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import rng
from ..config import CommunityConfig, SensorConfig, WorldConfig
from ..grids import GridField
from .cells import ConvectiveCell
from .community import Community, generate_community
from .sensors import SensorSuite, make_shadow_mask, place_gauges, sense
from .terrain import Terrain, generate_terrain


@dataclass(frozen=True)
class TruthFrame:
    t: float
    rain: GridField


@dataclass(frozen=True)
class EventLabel:
    event_id: int
    onset: float
    end: float
    affected_cells: tuple[tuple[int, int], ...]
    peak_rate: float
    affected_districts: tuple[str, ...] = ()

    def __post_init__(self):
        if self.onset > self.end:
            raise ValueError("onset must be <= end")
        if not self.affected_cells:
            raise ValueError("affected cells must be nonempty")


@dataclass(frozen=True)
class Scenario:
    seed: int
    world_cfg: WorldConfig
    terrain: Terrain
    cells: tuple[ConvectiveCell, ...]
    sensors: SensorSuite
    community: Community
    duration: float

    def scenario_hash(self) -> str:
        import hashlib
        h = hashlib.sha256()
        h.update(self.terrain.elevation.content_hash().encode())
        for c in self.cells:
            h.update(repr(c).encode())
        h.update(np.packbits(self.sensors.shadow_mask).tobytes())
        h.update(repr(self.sensors.gauge_cells).encode())
        h.update(self.community.population.content_hash().encode())
        h.update(repr(self.community.shelters).encode())
        return h.hexdigest()


class ScenarioError(Exception):
    pass


def _sample_cells(cfg: WorldConfig, terrain: Terrain,
                  gen: np.random.Generator) -> tuple[ConvectiveCell, ...]:
    if cfg.storm_class == "dry":
        return ()
    n = int(gen.integers(cfg.n_cells_min, cfg.n_cells_max + 1))
    uplift = terrain.uplift
    ny, nx = uplift.shape
    # cells prefer high-uplift ground (terrain locking)
    w = np.exp(2.5 * uplift).ravel()
    w /= w.sum()
    high = np.argwhere(uplift >= np.quantile(uplift, 0.85))
    cells = []
    for i in range(n):
        if i == 0 and cfg.storm_class == "cloudburst":
            # anchor the strongest cell on high ground so the orographic
            # factor cannot pull the realized peak under the cloudburst bar
            cy, cx = high[int(gen.integers(len(high)))]
        else:
            idx = int(gen.choice(ny * nx, p=w))
            cy, cx = idx // nx, idx % nx
        cy = float(np.clip(cy + gen.uniform(-1, 1), 4, ny - 5))
        cx = float(np.clip(cx + gen.uniform(-1, 1), 4, nx - 5))
        birth = float(gen.uniform(cfg.cell_lead_in + 5.0, cfg.duration_min * 0.55))
        span = float(gen.uniform(35.0, 80.0))
        decay = min(birth + span, cfg.duration_min - 5.0)
        if decay - birth < 20.0:
            decay = birth + 20.0
        speed = gen.uniform(0.02, 0.12)
        theta = gen.uniform(0, 2 * np.pi)
        if cfg.storm_class == "cloudburst":
            peak = float(gen.uniform(cfg.cloudburst_min_peak, cfg.cloudburst_min_peak + 50.0))
        else:
            peak = float(gen.uniform(15.0, 60.0))
        cells.append(ConvectiveCell(
            center_y=cy, center_x=cx, peak_rate=peak,
            radius=float(gen.uniform(6.0, 12.0)),
            vel_y=float(speed * np.sin(theta)), vel_x=float(speed * np.cos(theta)),
            birth=birth, decay=decay, lead_in=cfg.cell_lead_in,
            drizzle_frac=cfg.drizzle_frac))
    return tuple(sorted(cells, key=lambda c: (c.birth, c.center_y, c.center_x)))


def generate_scenario(world_cfg: WorldConfig, sensor_cfg: SensorConfig,
                      community_cfg: CommunityConfig, seed: int) -> Scenario:
    if world_cfg.nx < 32 or world_cfg.ny < 32:
        raise ScenarioError("grid must be at least 32x32")
    terrain = generate_terrain(world_cfg.ny, world_cfg.nx, seed,
                               cell_km=world_cfg.cell_km)
    gen_cells = rng.stream(seed, "cells")
    cells = _sample_cells(world_cfg, terrain, gen_cells)

    gen_sens = rng.stream(seed, "sensors")
    shadow = make_shadow_mask(world_cfg.ny, world_cfg.nx, gen_sens,
                              sensor_cfg.shadow_frac_min,
                              sensor_cfg.shadow_frac_max)
    gauges = place_gauges(world_cfg.ny, world_cfg.nx, sensor_cfg.n_gauges, gen_sens)
    suite = SensorSuite(shadow_mask=shadow, gauge_cells=gauges,
                        gauge_latency=sensor_cfg.gauge_latency,
                        satellite_factor=sensor_cfg.satellite_factor,
                        satellite_latency=sensor_cfg.satellite_latency,
                        radar_noise_sigma=sensor_cfg.radar_noise_sigma,
                        satellite_noise_sigma=sensor_cfg.satellite_noise_sigma)

    gen_comm = rng.stream(seed, "community")
    try:
        community = generate_community(
            terrain, gen_comm, n_districts=community_cfg.n_districts,
            road_spacing=community_cfg.road_spacing,
            population_total=community_cfg.population_total,
            d_crit=community_cfg.d_crit,
            edge_travel_min=community_cfg.edge_travel_min)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc

    scen = Scenario(seed=seed, world_cfg=world_cfg, terrain=terrain,
                    cells=cells, sensors=suite, community=community,
                    duration=world_cfg.duration_min)

    if world_cfg.storm_class == "cloudburst" and cells:
        peak = max(truth_step(scen, t).rain.values.max()
                   for t in np.arange(0.0, scen.duration + 1e-9, 5.0))
        if peak < 100.0:
            raise ScenarioError(
                f"cloudburst scenario failed to exceed 100 mm/h (got {peak:.1f})")
    return scen


def truth_step(scenario: Scenario, t: float) -> TruthFrame:
    """Analytic truth at minute t; pure in (scenario, t).

    The orographic factor is exponential in the uplift proxy, centered so
    mid-elevation cells are unmodified: windward ridges amplify rain,
    valleys dry out.
    """
    if not 0.0 <= t <= scenario.duration:
        raise ScenarioError(f"t={t} outside scenario duration")
    ny, nx = scenario.terrain.shape
    rain = np.zeros((ny, nx))
    for cell in scenario.cells:
        rain += cell.footprint(ny, nx, t)
    gamma = scenario.world_cfg.orographic_gamma
    rain *= np.exp(gamma * (scenario.terrain.uplift - 0.5))
    return TruthFrame(t, GridField(rain, scenario.terrain.elevation.cell_km,
                                   t, "rain_truth", "mm/h"))


def observe(scenario: Scenario, t: float) -> "ObservationSet":
    """Truth at t seen through the sensor suite, on the scenario's own
    observation stream (identical in every configuration consuming it)."""
    gen = rng.stream(scenario.seed, "obs", float(t))
    return sense(truth_step(scenario, t).rain, scenario.sensors, gen)


def label_events(scenario: Scenario, step_min: float = 1.0) -> list[EventLabel]:
    """Maximal intervals where any cell's truth meets the event threshold."""
    thr = scenario.world_cfg.event_threshold
    times = np.arange(0.0, scenario.duration + 1e-9, step_min)
    labels: list[EventLabel] = []
    active = False
    onset = 0.0
    affected: set[tuple[int, int]] = set()
    peak = 0.0
    last_wet = 0.0
    for t in times:
        rain = truth_step(scenario, float(t)).rain.values
        wet = rain >= thr
        if wet.any():
            if not active:
                active, onset = True, float(t)
                affected, peak = set(), 0.0
            affected.update((int(y), int(x)) for y, x in np.argwhere(wet))
            peak = max(peak, float(rain.max()))
            last_wet = float(t)
        elif active:
            labels.append(_finish_label(scenario, len(labels), onset, last_wet,
                                        affected, peak))
            active = False
    if active:
        labels.append(_finish_label(scenario, len(labels), onset, last_wet,
                                    affected, peak))
    return labels


def _finish_label(scenario: Scenario, event_id: int, onset: float, end: float,
                  affected: set, peak: float) -> EventLabel:
    districts = sorted({d for (y, x) in affected
                        if (d := scenario.community.district_of_cell(y, x))})
    return EventLabel(event_id=event_id, onset=onset, end=end,
                      affected_cells=tuple(sorted(affected)),
                      peak_rate=peak, affected_districts=tuple(districts))


# -- scenario file ------------------------------------------------------------

def save_scenario(scenario: Scenario, path: str | Path) -> None:
    """JSON header plus float32 grid blocks for elevation and population."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    header = {
        "seed": scenario.seed,
        "nx": scenario.world_cfg.nx, "ny": scenario.world_cfg.ny,
        "cell_km": scenario.world_cfg.cell_km,
        "duration_min": scenario.duration,
        "storm_class": scenario.world_cfg.storm_class,
        "n_cells": len(scenario.cells),
        "gauges": [list(g) for g in scenario.sensors.gauge_cells],
        "shelters": list(scenario.community.shelters),
        "scenario_hash": scenario.scenario_hash(),
    }
    (path / "scenario.json").write_text(json.dumps(header, indent=2, sort_keys=True))
    scenario.terrain.elevation.save(path / "elevation")
    scenario.community.population.save(path / "population")
