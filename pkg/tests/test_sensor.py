"""Detection-rate model tests.

Spot values were frozen from an independent recomputation of the closed
forms (scipy.special.erfc / brentq at float64), so regressions in any
factor of the rate product show up as absolute differences here.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surveyopt.sensor import (
    PACK_COS_BACK,
    PACK_R_FAR2,
    PACK_R_SKIP2,
    SensorParams,
    annulus_far_range,
    bearing,
    depression,
    detection_probability,
    detection_rate,
    horizontal_gate,
    max_gated_range,
    transmission_loss,
    vertical_gate,
)
from conftest import reference_sensor

GATE_CENTER_RANGE = 190.2872886834  # -height / tan(eps_de)


def test_transmission_loss_spot_value(sensor):
    assert transmission_loss(190.0, sensor) == pytest.approx(
        46.5630720191, abs=1e-9)


def test_transmission_loss_floors_at_r_min(sensor):
    # Below r_min the spreading term is held at the floor value.
    assert transmission_loss(1e-6, sensor) == transmission_loss(
        sensor.r_min, sensor)


def test_detection_probability_half_at_budget(sensor):
    from scipy.optimize import brentq
    r_star = brentq(
        lambda r: float(transmission_loss(r, sensor)) - sensor.figure_of_merit,
        1.0, 1e5, xtol=1e-12, rtol=8.9e-16)
    p = detection_probability(r_star, sensor)
    assert abs(float(p) - 0.5) <= 1e-9


def test_detection_probability_spot_value(sensor):
    assert detection_probability(190.0, sensor) == pytest.approx(
        0.997645729223, abs=1e-9)


def test_detection_probability_decreases_with_range(sensor):
    r = np.linspace(1.0, 3000.0, 400)
    p = detection_probability(r, sensor)
    assert np.all(np.diff(p) < 0.0)


def test_rate_spot_values(sensor):
    state = (0.0, 0.0, 0.0)
    assert detection_rate(state, (GATE_CENTER_RANGE, 0.0), sensor) == \
        pytest.approx(19.9526742196, abs=1e-6)
    assert detection_rate(state, (200.0, 0.0), sensor) == \
        pytest.approx(19.9441191751, abs=1e-6)
    d = 200.0 / math.sqrt(2.0)
    assert detection_rate(state, (d, d), sensor) == \
        pytest.approx(19.9154945139, abs=1e-6)
    assert detection_rate(state, (420.0, 0.0), sensor) == \
        pytest.approx(0.0873842724, abs=1e-8)


def test_rate_negligible_behind_and_underneath(sensor):
    state = (0.0, 0.0, 0.0)
    assert detection_rate(state, (-190.0, 0.0), sensor) < 1e-12
    assert detection_rate(state, (50.0, 0.0), sensor) < 1e-9


def test_rate_bounded_by_scan_rate(sensor):
    # Strict positivity holds on the active cone; far outside it the gate
    # tails underflow to exact zero in float64, so only nonnegativity is
    # asserted globally.
    rng = np.random.default_rng(3)
    r = rng.uniform(100.0, 2300.0, 2000)
    a = rng.uniform(-2.3, 2.3, 2000)
    psi = 0.3
    pts = np.stack([r * np.cos(psi + a), r * np.sin(psi + a)], axis=1)
    g = detection_rate((0.0, 0.0, psi), pts, sensor)
    assert np.all(g > 0.0)
    assert np.all(g < sensor.scan_rate)
    anywhere = rng.uniform(-3000.0, 3000.0, size=(2000, 2))
    assert np.all(detection_rate((0.0, 0.0, psi), anywhere, sensor) >= 0.0)


def test_pack_cut_radii(sensor):
    pack = sensor.pack()
    assert math.sqrt(pack[PACK_R_SKIP2]) == pytest.approx(
        82.3140936898, abs=1e-6)
    assert math.sqrt(pack[PACK_R_FAR2]) == pytest.approx(
        2329.17405165, abs=1e-5)
    assert pack[PACK_COS_BACK] == pytest.approx(-0.793416261959, abs=1e-9)
    assert max_gated_range(sensor) == pytest.approx(2329.17405165, abs=1e-5)
    assert annulus_far_range(sensor) == pytest.approx(
        326.9971095220, abs=1e-6)


def test_pack_disables_behind_cone_for_wide_fov():
    sp = reference_sensor()
    wide = SensorParams(**{**sp.__dict__, "half_fov_alpha": math.radians(175.0)})
    assert wide.pack()[PACK_COS_BACK] == -2.0


# Inside the gate shoulders (logistic argument above -34) the smaller
# sigmoid stays above machine epsilon relative to the larger one, so the
# open-interval bounds survive in float64.  Beyond that the sum rounds to
# exactly 0 or 1, which is the documented negligible-tail regime.
_H_SHOULDER = math.radians(60.0) + 34.0 / 25.0
_V_LO = math.radians(-8.5) - 34.0 / 400.0
_V_HI = math.radians(-3.5) + 34.0 / 400.0


@settings(max_examples=200, deadline=None)
@given(alpha=st.floats(-_H_SHOULDER, _H_SHOULDER))
def test_horizontal_gate_strictly_inside_unit_interval(alpha):
    g = float(horizontal_gate(alpha, reference_sensor()))
    assert 0.0 < g < 1.0


@settings(max_examples=200, deadline=None)
@given(eps=st.floats(_V_LO, min(_V_HI, 0.0)))
def test_vertical_gate_strictly_inside_unit_interval(eps):
    g = float(vertical_gate(eps, reference_sensor()))
    assert 0.0 < g < 1.0


def test_gates_bounded_globally():
    sp = reference_sensor()
    a = np.linspace(-math.pi, math.pi, 5001)
    g = horizontal_gate(a, sp)
    assert np.all(g >= 0.0) and np.all(g <= 1.0)
    e = np.linspace(-0.5 * math.pi, 0.0, 5001)
    gv = vertical_gate(e, sp)
    assert np.all(gv >= 0.0) and np.all(gv <= 1.0)


def test_depression_limits(sensor):
    assert float(depression(1e9, sensor)) == pytest.approx(0.0, abs=1e-6)
    assert float(depression(sensor.r_min, sensor)) < math.radians(-89.0)


def test_bearing_sign_convention(sensor):
    # Target to the left of the heading gives a positive bearing.
    assert float(bearing((0.0, 0.0, 0.0), (10.0, 5.0))) > 0.0
    assert float(bearing((0.0, 0.0, 0.0), (10.0, -5.0))) < 0.0
    assert float(bearing((0.0, 0.0, 0.5), (10.0 * math.cos(0.5),
                                           10.0 * math.sin(0.5)))) == \
        pytest.approx(0.0, abs=1e-12)


def test_rate_invariant_under_rigid_motion(sensor):
    rng = np.random.default_rng(11)
    for _ in range(50):
        x, y, psi = rng.uniform(-500, 500), rng.uniform(-500, 500), rng.uniform(-4, 4)
        w = rng.uniform(-400, 400, size=2)
        g0 = float(detection_rate((x, y, psi), (w[0], w[1]), sensor))
        # Rotate and translate the vehicle and the target together.
        th = rng.uniform(0.0, 2.0 * math.pi)
        tx, ty = rng.uniform(-1000, 1000, size=2)
        c, s = math.cos(th), math.sin(th)
        xr = c * x - s * y + tx
        yr = s * x + c * y + ty
        wr = (c * w[0] - s * w[1] + tx, s * w[0] + c * w[1] + ty)
        g1 = float(detection_rate((xr, yr, psi + th), wr, sensor))
        assert abs(g0 - g1) <= 1e-12 * max(1.0, abs(g0))


def test_validate_rejects_bad_parameters(sensor):
    bad = SensorParams(**{**sensor.__dict__, "spread": 0.0})
    with pytest.raises(ValueError):
        bad.validate()
    bad = SensorParams(**{**sensor.__dict__, "height": -1.0})
    with pytest.raises(ValueError):
        bad.validate()
