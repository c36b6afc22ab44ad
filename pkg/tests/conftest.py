import pytest

from cloudburst.config import (CommunityConfig, SensorConfig, SimConfig,
                               WorldConfig, baseline_config, mas_config)


def small_sim_config(**world_kw) -> SimConfig:
    """Desk-scale config that still exercises the full pipeline."""
    cfg = mas_config()
    cfg.world = WorldConfig(nx=32, ny=32, duration_min=90.0, **world_kw)
    cfg.sensors = SensorConfig(n_gauges=6)
    cfg.community = CommunityConfig(n_districts=3)
    return cfg


def small_baseline_config(**world_kw) -> SimConfig:
    cfg = baseline_config()
    cfg.world = WorldConfig(nx=32, ny=32, duration_min=90.0, **world_kw)
    cfg.sensors = SensorConfig(n_gauges=6)
    cfg.community = CommunityConfig(n_districts=3)
    return cfg


@pytest.fixture
def small_cfg():
    return small_sim_config()
