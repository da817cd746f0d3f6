"""Shared fixtures: reference platform constants and scenario builders."""

import math

import numpy as np
import pytest

from surveyopt import (
    Domain,
    QmcConfig,
    RiskMode,
    Scenario,
    SensorParams,
    TranscriptionConfig,
    VehicleParams,
    validate_scenario,
)


def reference_sensor() -> SensorParams:
    return SensorParams(
        scan_rate=20.0,
        figure_of_merit=72.0,
        attenuation=5.2e-3,
        spread=9.0,
        half_fov_alpha=math.radians(60.0),
        p_alpha=25.0,
        eps_de=math.radians(-6.0),
        half_fov_eps=math.radians(2.5),
        p_eps=400.0,
        height=20.0,
    )


def reference_vehicle() -> VehicleParams:
    return VehicleParams(speed=2.5, nomoto_gain=5.0, nomoto_time=0.5,
                         max_rudder=math.radians(35.0))


def rect_domain(xmin=500.0, xmax=1500.0, ymin=500.0, ymax=1500.0) -> Domain:
    return Domain(np.array([[xmin, ymin], [xmax, ymin],
                            [xmax, ymax], [xmin, ymax]]))


@pytest.fixture
def sensor() -> SensorParams:
    return reference_sensor()


@pytest.fixture
def vehicle() -> VehicleParams:
    return reference_vehicle()


@pytest.fixture
def domain() -> Domain:
    return rect_domain()


def make_scenario(beta=0.05, k=1, mode=RiskMode.PER_VEHICLE,
                  domain=None, qmc=None, solver=None,
                  starts=None) -> Scenario:
    """Small single-start scenario used across the unit tests."""
    if domain is None:
        domain = rect_domain()
    if qmc is None:
        qmc = QmcConfig(n_points=256, n_shifts=2, seed=7)
    if solver is None:
        solver = TranscriptionConfig(n_nodes=12, sim_dt=0.5, risk_dt=10.0,
                                     max_outer=3, max_inner=25)
    if starts is None:
        starts = np.tile([510.0, 510.0, math.radians(45.0)], (k, 1))
    return validate_scenario(Scenario(
        domain=domain,
        sensor=reference_sensor(),
        vehicle=reference_vehicle(),
        n_vehicles=k,
        beta=beta,
        risk_mode=mode,
        starts=np.asarray(starts, dtype=float),
        qmc=qmc,
        solver=solver,
    ))
