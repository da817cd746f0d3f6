"""Forward-looking sonar detection-rate model.

The instantaneous detection rate against a seabed object is a product of a
scan rate, a range-dependent detection probability from the passive sonar
equation, and two logistic field-of-view gates (horizontal bearing and
vertical depression).  All angles are radians and all ranges are meters
internally; configuration files use degrees and are converted on load.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

_INV_SQRT2 = 1.0 / math.sqrt(2.0)

# Logistic-gate arguments below -Z_GATE_CUT contribute less than
# exp(-Z_GATE_CUT) ~ 2e-16 to either gate, which is below the resolution of
# a double-precision exposure sum.  Both kernel backends drop those pairs;
# the cutoff is part of the model contract, not an implementation detail.
Z_GATE_CUT = 36.0
# Far-range cutoff uses a looser threshold: the vertical gate decays slowly
# with range, so exp(-21) ~ 7.6e-10 keeps the neglected exposure per point
# below ~1e-4 over any mission-length trajectory.
Z_FAR_CUT = 21.0

# Layout of the flat parameter pack consumed by the kernels.
PACK_LAM = 0
PACK_INV_SIG = 1
PACK_FOM = 2
PACK_ATT_M = 3
PACK_HALF_ALPHA = 4
PACK_P_ALPHA = 5
PACK_EPS_LO = 6
PACK_EPS_HI = 7
PACK_P_EPS = 8
PACK_HEIGHT = 9
PACK_R_MIN = 10
PACK_R_SKIP2 = 11
PACK_R_FAR2 = 12
PACK_COS_BACK = 13
PACK_SIZE = 14


@dataclass(frozen=True)
class SensorParams:
    """Sonar model constants, all in SI units and radians.

    scan_rate: independent detection opportunities per second [1/s]
    figure_of_merit: source level budget [dB]
    attenuation: absorption coefficient [dB/m]
    spread: std dev of the signal-excess fluctuation [dB]
    half_fov_alpha: half horizontal field of view [rad]
    p_alpha: horizontal gate logistic slope [1/rad]
    eps_de: vertical depression of the beam center [rad], negative is down
    half_fov_eps: half vertical field of view [rad]
    p_eps: vertical gate logistic slope [1/rad]
    height: sensor height above the seabed [m]
    r_min: slant-range floor guarding the spreading-loss singularity [m]
    """

    scan_rate: float
    figure_of_merit: float
    attenuation: float
    spread: float
    half_fov_alpha: float
    p_alpha: float
    eps_de: float
    half_fov_eps: float
    p_eps: float
    height: float
    r_min: float = 0.1

    def validate(self) -> None:
        if self.scan_rate <= 0.0:
            raise ValueError("scan_rate must be positive")
        if self.spread <= 0.0:
            raise ValueError("spread must be positive")
        if not 0.0 < self.half_fov_alpha <= math.pi:
            raise ValueError("horizontal field of view must lie in (0, 360] degrees")
        if self.half_fov_eps <= 0.0:
            raise ValueError("vertical field of view must be positive")
        if self.p_alpha <= 0.0 or self.p_eps <= 0.0:
            raise ValueError("gate slopes must be positive")
        if self.height <= 0.0:
            raise ValueError("sensor height must be positive")
        if self.attenuation < 0.0:
            raise ValueError("attenuation must be nonnegative")
        if self.r_min <= 0.0:
            raise ValueError("r_min must be positive")

    def pack(self) -> np.ndarray:
        """Flat float64 parameter vector for the evaluation kernels.

        Includes the precomputed skip radii so that the compiled and the
        numpy backend apply bit-identical active-region tests.
        """
        eps_lo = self.eps_de - self.half_fov_eps
        eps_hi = self.eps_de + self.half_fov_eps

        # Near skip: depression steeper than eps_lo - Z/p means the vertical
        # gate is below exp(-Z).  arg >= 0 would reject every ground point
        # (the gate passband lies above the horizontal), which is correct.
        arg_lo = eps_lo - Z_GATE_CUT / self.p_eps
        if arg_lo >= 0.0:
            r_skip = math.inf
        elif arg_lo <= -0.5 * math.pi:
            r_skip = 0.0
        else:
            r_skip = self.height / math.tan(-arg_lo)

        arg_hi = eps_hi + Z_FAR_CUT / self.p_eps
        if arg_hi >= 0.0:
            r_far = math.inf
        else:
            r_far = self.height / math.tan(-arg_hi)

        ang_back = self.half_fov_alpha + Z_GATE_CUT / self.p_alpha
        # Sentinel -2 disables the behind-cone test when the gate tail wraps
        # past 180 degrees.
        cos_back = math.cos(ang_back) if ang_back < math.pi else -2.0

        p = np.empty(PACK_SIZE)
        p[PACK_LAM] = self.scan_rate
        p[PACK_INV_SIG] = 1.0 / self.spread
        p[PACK_FOM] = self.figure_of_merit
        p[PACK_ATT_M] = self.attenuation
        p[PACK_HALF_ALPHA] = self.half_fov_alpha
        p[PACK_P_ALPHA] = self.p_alpha
        p[PACK_EPS_LO] = eps_lo
        p[PACK_EPS_HI] = eps_hi
        p[PACK_P_EPS] = self.p_eps
        p[PACK_HEIGHT] = self.height
        p[PACK_R_MIN] = self.r_min
        p[PACK_R_SKIP2] = r_skip * r_skip if math.isfinite(r_skip) else math.inf
        p[PACK_R_FAR2] = r_far * r_far if math.isfinite(r_far) else math.inf
        p[PACK_COS_BACK] = cos_back
        return p


def _sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def transmission_loss(r, sp: SensorParams):
    """One-way transmission loss [dB] at slant range r [m].

    Spherical spreading plus linear absorption; range is floored at r_min.
    """
    rc = np.maximum(np.asarray(r, dtype=float), sp.r_min)
    return 20.0 * np.log10(rc) + sp.attenuation * rc


def detection_probability(r, sp: SensorParams):
    """Probability that the echo at slant range r exceeds the threshold."""
    u = (sp.figure_of_merit - transmission_loss(r, sp)) * (1.0 / sp.spread)
    return 0.5 * erfc(-u * _INV_SQRT2)


def body_frame_offsets(state, omega):
    """Target offsets in the vehicle frame: forward along the heading,
    lateral positive to the left of it, matching the counter-clockwise
    positive bearing convention.

    state is (x, y, psi[, ...]); omega is (wx, wy) or an (M, 2) array.
    """
    x, y, psi = state[0], state[1], state[2]
    omega = np.asarray(omega, dtype=float)
    dx = omega[..., 0] - x
    dy = omega[..., 1] - y
    c, s = math.cos(psi), math.sin(psi)
    fwd = dx * c + dy * s
    lat = -dx * s + dy * c
    return fwd, lat


def bearing(state, omega):
    """Horizontal bearing of the target relative to the heading [rad].

    Zero dead ahead, positive counter-clockwise, range (-pi, pi].
    """
    fwd, lat = body_frame_offsets(state, omega)
    return np.arctan2(lat, fwd)


def horizontal_gate(alpha, sp: SensorParams):
    """Smooth indicator that the bearing lies inside the horizontal FOV.

    Two logistic shoulders at +-half_fov_alpha; strictly inside (0, 1).
    """
    a = np.asarray(alpha, dtype=float)
    z1 = sp.p_alpha * (a + sp.half_fov_alpha)
    z2 = sp.p_alpha * (sp.half_fov_alpha - a)
    return _sigmoid(z1) + _sigmoid(z2) - 1.0


def depression(r, sp: SensorParams):
    """Depression angle [rad] to a seabed point at horizontal range r.

    Negative below the horizontal; tends to 0- as r grows.
    """
    rc = np.maximum(np.asarray(r, dtype=float), sp.r_min)
    return np.arctan(-sp.height / rc)


def vertical_gate(eps, sp: SensorParams):
    """Smooth indicator that the depression lies inside the vertical FOV."""
    e = np.asarray(eps, dtype=float)
    z1 = sp.p_eps * (e - (sp.eps_de - sp.half_fov_eps))
    z2 = sp.p_eps * ((sp.eps_de + sp.half_fov_eps) - e)
    return _sigmoid(z1) + _sigmoid(z2) - 1.0


def detection_rate(state, omega, sp: SensorParams):
    """Instantaneous detection rate [1/s] of target(s) omega from a pose.

    Product of scan rate, detection probability at the horizontal range,
    and both FOV gates.  Strictly positive and below the scan rate.
    """
    fwd, lat = body_frame_offsets(state, omega)
    r = np.hypot(fwd, lat)
    alpha = np.arctan2(lat, fwd)
    p = detection_probability(r, sp)
    fa = horizontal_gate(alpha, sp)
    fe = vertical_gate(depression(r, sp), sp)
    return sp.scan_rate * p * fa * fe


def max_gated_range(sp: SensorParams) -> float:
    """Horizontal range beyond which the vertical gate has decayed to the
    far-tail threshold.  Infinite when the gate never decays below it."""
    arg_hi = sp.eps_de + sp.half_fov_eps + Z_FAR_CUT / sp.p_eps
    if arg_hi >= 0.0:
        return math.inf
    return sp.height / math.tan(-arg_hi)


def annulus_far_range(sp: SensorParams) -> float:
    """Horizontal range where the depression equals the upper gate edge.

    Ground points farther than this sit in the decaying upper shoulder of
    the vertical gate; used to size lead-in distances for coverage paths.
    """
    eps_hi = sp.eps_de + sp.half_fov_eps
    if eps_hi >= 0.0:
        return math.inf
    return sp.height / math.tan(-eps_hi)
