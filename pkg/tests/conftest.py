import numpy as np
import pytest

from curve_flow import circle_curve, evolve_curve
from model_catalog import ModelKind, make_model
from pipelines import catalog_times
from rotsym_flow import dumbbell_profile, evolve_rotsym
from simulator import StopRule


@pytest.fixture(scope="session")
def plane_track():
    """Static line through the origin, normal e_2, wide enough for a window-2 blowup"""
    model = make_model(ModelKind.STATIC_PLANE, 1, scale=2.0, resolution=256)
    return model.as_track(np.linspace(-2.0, 2.0, 33))


@pytest.fixture(scope="session")
def circle_track():
    """Round circle shrinking to the origin at t = 0"""
    model = make_model(ModelKind.SHRINKER_SPHERE, 1, resolution=64)
    return model.as_track(catalog_times())


@pytest.fixture(scope="session")
def quasistatic_track():
    """Static line that disappears at T = 0.5; the extra slice keeps it whole until then"""
    model = make_model(ModelKind.QUASISTATIC_PLANE, 1, T=0.5, scale=2.0, resolution=256)
    return model.as_track(np.union1d(catalog_times(), [0.5 - 1e-9]))


@pytest.fixture(scope="session")
def sphere_track():
    """Round 2-sphere shrinking to the origin at t = 0"""
    model = make_model(ModelKind.SHRINKER_SPHERE, 2, resolution=32)
    return model.as_track(catalog_times())


@pytest.fixture(scope="session")
def simulated_circle():
    """Polygonal unit circle evolved by curve shortening until |A| reaches 200"""
    return evolve_curve(circle_curve(1.0, vertices=64), None, StopRule(max_curvature=200.0), emit_dt=0.05)


@pytest.fixture(scope="session")
def dumbbell_run():
    """Dumbbell (bells 2, neck 0.5) through its neckpinch until the bells vanish, with its profile log"""
    profiles = []
    flow = evolve_rotsym(
        dumbbell_profile(2.0, 0.5, vertices=64), None, StopRule(min_area=1e-3), n_theta=16, profile_log=profiles
    )
    return flow, profiles


@pytest.fixture(scope="session")
def simulated_dumbbell(dumbbell_run):
    return dumbbell_run[0]
