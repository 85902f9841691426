import math

import numpy as np
import pytest

from thybrid.hybrid_map import OBSTACLE, TERRAIN, UNKNOWN, HybridMap
from thybrid.robot import DEFAULT_SPEC
from thybrid.terrain import TerrainAssessor
from thybrid.terrain_gen import builtin_scenarios, generate


def make_map(kind, resolution=0.5, normal=None, r_sum=0.0, max_roughness=2.5, origin=(0.0, 0.0)):
    """Hybrid map from a kind raster; terrain cells get ``normal`` and ``r_sum``."""
    kind = np.asarray(kind, dtype=np.uint8)
    rows, cols = kind.shape
    terrain = kind == TERRAIN
    tau = np.where(kind == OBSTACLE, 0.0, np.nan)
    tau[terrain] = 1.0
    nrm = np.full((rows, cols, 3), np.nan)
    if normal is None:
        normal = (0.0, 0.0, 1.0)
    nrm[terrain] = np.broadcast_to(np.asarray(normal, float), (rows, cols, 3))[terrain]
    rs = np.full((rows, cols), np.nan)
    rs[terrain] = np.broadcast_to(np.asarray(r_sum, float), (rows, cols))[terrain]
    elev = np.where(terrain, 0.0, np.nan)
    return HybridMap(origin, resolution, kind, tau, nrm, rs, elev, max_roughness)


def flat_map(rows=40, cols=40, resolution=0.5):
    return make_map(np.full((rows, cols), TERRAIN), resolution)


def ramp_normal(alpha, azimuth=0.0):
    """Upward unit normal of a plane rising at ``alpha`` along ``azimuth``."""
    s = math.sin(alpha)
    return (-s * math.cos(azimuth), -s * math.sin(azimuth), math.cos(alpha))


def random_map(rng, rows, cols, obstacle_p=0.08, unknown_p=0.03, max_alpha=0.25):
    kind = np.full((rows, cols), TERRAIN, np.uint8)
    u = rng.random((rows, cols))
    kind[u < obstacle_p] = OBSTACLE
    kind[(u >= obstacle_p) & (u < obstacle_p + unknown_p)] = UNKNOWN
    alpha = rng.uniform(0.0, max_alpha, (rows, cols))
    az = rng.uniform(-math.pi, math.pi, (rows, cols))
    normal = np.stack([-np.sin(alpha) * np.cos(az), -np.sin(alpha) * np.sin(az), np.cos(alpha)], -1)
    r_sum = rng.uniform(0.0, 2.0, (rows, cols))
    return make_map(kind, 0.5, normal, r_sum, 2.5)


def gentle_map(rng, rows, cols, obstacle_p=0.04, max_alpha=0.15, jitter=0.03):
    """Random map on one tilted plane with per-cell tilt jitter, random
    roughness and sparse obstacle cells; usually well connected."""
    kind = np.full((rows, cols), TERRAIN, np.uint8)
    kind[rng.random((rows, cols)) < obstacle_p] = OBSTACLE
    base_alpha = rng.uniform(0.0, max_alpha)
    base_az = rng.uniform(-math.pi, math.pi)
    alpha = np.clip(base_alpha + rng.uniform(-jitter, jitter, (rows, cols)), 0.0, None)
    az = base_az + rng.uniform(-0.3, 0.3, (rows, cols))
    normal = np.stack([-np.sin(alpha) * np.cos(az), -np.sin(alpha) * np.sin(az), np.cos(alpha)], -1)
    r_sum = rng.uniform(0.0, 1.5, (rows, cols))
    return make_map(kind, 0.5, normal, r_sum, 2.5)


_SCENARIOS = builtin_scenarios()


@pytest.fixture(scope="session")
def scenarios():
    return _SCENARIOS


@pytest.fixture(scope="session")
def assessed():
    """Lazily assessed fixture maps, keyed by scenario name."""
    cache = {}

    def get(name):
        if name not in cache:
            cloud, truth = generate(_SCENARIOS[name])
            est = TerrainAssessor(DEFAULT_SPEC).fit(cloud)
            cache[name] = (est, truth)
        return cache[name]

    return get
