"""Scenario definition: survey domain, platform, mission and run settings.

A scenario file is YAML with sections domain/sensor/vehicle/mission and
optional qmc/solver overrides.  Angles are degrees in files and radians in
memory; loading performs the conversion and a full validation pass.
Unknown keys are rejected rather than ignored.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from .sensor import SensorParams


class ScenarioError(ValueError):
    """Raised for malformed or inconsistent scenario input."""


class RiskMode(enum.Enum):
    # Sum of per-vehicle miss means; upper bound k, the form used when each
    # vehicle is scored independently.
    PER_VEHICLE = "per-vehicle"
    # Mean miss probability under the pooled exposure of all vehicles.
    JOINT = "joint"


@dataclass(frozen=True)
class Domain:
    """Convex quadrilateral survey region, vertices in meters CCW."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.shape != (4, 2):
            raise ScenarioError("domain needs exactly four 2-D vertices")
        object.__setattr__(self, "vertices", v)

    def validate(self) -> None:
        v = self.vertices
        for i in range(4):
            if np.allclose(v[i], v[(i + 1) % 4], atol=1e-9):
                raise ScenarioError("domain has coincident consecutive vertices")
        cross = self._edge_cross()
        if np.any(cross <= 0.0):
            if np.all(cross < 0.0):
                raise ScenarioError("domain vertices must be in counter-clockwise order")
            raise ScenarioError("domain must be convex")

    def _edge_cross(self) -> np.ndarray:
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        e_next = np.roll(e, -1, axis=0)
        return e[:, 0] * e_next[:, 1] - e[:, 1] * e_next[:, 0]

    def area(self) -> float:
        v = self.vertices
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def bounds(self) -> tuple[float, float, float, float]:
        v = self.vertices
        return (float(v[:, 0].min()), float(v[:, 0].max()),
                float(v[:, 1].min()), float(v[:, 1].max()))

    def is_axis_rectangle(self, tol: float = 1e-9) -> bool:
        xs = sorted(self.vertices[:, 0])
        ys = sorted(self.vertices[:, 1])
        return (abs(xs[0] - xs[1]) <= tol and abs(xs[2] - xs[3]) <= tol
                and abs(ys[0] - ys[1]) <= tol and abs(ys[2] - ys[3]) <= tol)

    def _edge_normals(self):
        """Outward unit normals and one vertex per edge (CCW polygon)."""
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        n = np.stack([e[:, 1], -e[:, 0]], axis=1)
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        return n, v

    def contains(self, pts, tol: float = 0.0):
        """Boolean mask of points inside (or within tol of) the quad."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n, v = self._edge_normals()
        sd = np.einsum("pek,ek->pe", pts[:, None, :] - v[None, :, :], n)
        return np.all(sd <= tol, axis=1)

    def outside_distance(self, pts):
        """Supporting-plane distance outside the quad, 0 inside.

        Exact for points whose nearest feature is an edge; a mild
        underestimate in corner sectors, which is fine for penalty use.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n, v = self._edge_normals()
        sd = np.einsum("pek,ek->pe", pts[:, None, :] - v[None, :, :], n)
        return np.maximum(sd.max(axis=1), 0.0)

    def map_unit_square(self, u):
        """Measure-preserving map of unit-square samples into the quad.

        Axis-aligned rectangles stretch each axis independently, so the
        center of the square lands on the center of the rectangle.  General
        convex quads are split into two triangles along one diagonal and
        sampled area-proportionally with the square-root triangle map.
        """
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if np.any(u < 0.0) or np.any(u > 1.0):
            raise ScenarioError("unit-square samples must lie in [0, 1]^2")
        if self.is_axis_rectangle():
            xmin, xmax, ymin, ymax = self.bounds()
            out = np.empty_like(u)
            out[:, 0] = xmin + u[:, 0] * (xmax - xmin)
            out[:, 1] = ymin + u[:, 1] * (ymax - ymin)
            return out
        v = self.vertices
        a1 = _tri_area(v[0], v[1], v[2])
        a2 = _tri_area(v[0], v[2], v[3])
        w = a1 / (a1 + a2)
        out = np.empty_like(u)
        first = u[:, 0] < w
        # Reuse the selection coordinate after rescaling so the pair stays
        # stratified inside each triangle.
        s1 = u[first, 0] / w
        out[first] = _tri_map(v[0], v[1], v[2], s1, u[first, 1])
        s2 = (u[~first, 0] - w) / (1.0 - w)
        out[~first] = _tri_map(v[0], v[2], v[3], s2, u[~first, 1])
        return out


def _tri_area(a, b, c) -> float:
    return 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def _tri_map(a, b, c, s, t):
    rs = np.sqrt(s)[:, None]
    t = t[:, None]
    a = np.asarray(a)[None, :]
    b = np.asarray(b)[None, :]
    c = np.asarray(c)[None, :]
    return (1.0 - rs) * a + rs * (1.0 - t) * b + rs * t * c


@dataclass(frozen=True)
class VehicleParams:
    """Kinematics: constant surge speed plus first-order Nomoto steering."""

    speed: float          # [m/s]
    nomoto_gain: float    # K [1/s]
    nomoto_time: float    # T [s]
    max_rudder: float     # [rad]

    def validate(self) -> None:
        if self.speed <= 0.0:
            raise ScenarioError("vehicle speed must be positive")
        if self.nomoto_gain <= 0.0 or self.nomoto_time <= 0.0:
            raise ScenarioError("Nomoto gain and time constant must be positive")
        if not 0.0 < self.max_rudder <= math.pi:
            raise ScenarioError("max rudder must lie in (0, 180] degrees")

    def min_turn_radius(self) -> float:
        # Steady-state turn rate at full rudder is K * d_max.
        return self.speed / (self.nomoto_gain * self.max_rudder)


@dataclass(frozen=True)
class QmcConfig:
    n_points: int = 4096
    n_shifts: int = 2
    seed: int = 0

    def validate(self) -> None:
        if self.n_points < 16:
            raise ScenarioError("qmc points must be at least 16")
        if self.n_shifts < 1:
            raise ScenarioError("qmc shifts must be at least 1")


class InitStrategy(enum.Enum):
    LAWNMOWER = "lawnmower"
    SPIRAL = "spiral"
    RANDOM = "random"


class GradientMode(enum.Enum):
    ADJOINT = "adjoint"
    FD = "fd"


@dataclass(frozen=True)
class TranscriptionConfig:
    """Settings for the direct-transcription solve."""

    n_nodes: int = 60
    sim_dt: float = 0.25          # integration step target [s]
    risk_dt: float = 3.0          # exposure quadrature step target [s]
    d_max: float = math.radians(35.0)
    risk_tol: float = 1.0e-3
    pos_tol: float = 0.5          # terminal closure tolerance [m]
    max_outer: int = 6
    max_inner: int = 60
    penalty_init: float = 10.0
    penalty_growth: float = 10.0
    init_strategy: InitStrategy = InitStrategy.LAWNMOWER
    n_starts: int = 1
    containment_weight: float = 0.0
    t_max_factor: float = 1.35
    gradient: GradientMode = GradientMode.ADJOINT

    def validate(self) -> None:
        if self.n_nodes < 2:
            raise ScenarioError("solver needs at least 2 rudder nodes")
        if self.sim_dt <= 0.0 or self.risk_dt <= 0.0:
            raise ScenarioError("solver step targets must be positive")
        if not 0.0 < self.d_max <= math.pi:
            raise ScenarioError("solver rudder limit must lie in (0, 180] degrees")
        if self.risk_tol <= 0.0 or self.pos_tol <= 0.0:
            raise ScenarioError("solver tolerances must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ScenarioError("solver iteration limits must be positive")
        if self.penalty_init <= 0.0 or self.penalty_growth < 1.0:
            raise ScenarioError("penalty settings must be positive, growth >= 1")
        if self.n_starts < 1:
            raise ScenarioError("solver needs at least one start")
        if self.containment_weight < 0.0:
            raise ScenarioError("containment weight must be nonnegative")
        if self.t_max_factor <= 1.0:
            raise ScenarioError("t_max_factor must exceed 1")


@dataclass(frozen=True)
class Scenario:
    domain: Domain
    sensor: SensorParams
    vehicle: VehicleParams
    n_vehicles: int
    beta: float
    risk_mode: RiskMode
    starts: np.ndarray            # (k, 3): x, y, psi
    qmc: QmcConfig = field(default_factory=QmcConfig)
    solver: TranscriptionConfig = field(default_factory=TranscriptionConfig)

    def with_vehicles(self, k: int) -> "Scenario":
        """Same scenario with k vehicles sharing the first start pose."""
        starts = np.tile(self.starts[0], (k, 1))
        return replace(self, n_vehicles=k, starts=starts)


def validate_scenario(s: Scenario) -> Scenario:
    """Check every cross-field invariant; returns the scenario unchanged."""
    s.domain.validate()
    s.sensor.validate()
    s.vehicle.validate()
    s.qmc.validate()
    s.solver.validate()
    if s.n_vehicles < 1:
        raise ScenarioError("mission needs at least one vehicle")
    if not 0.0 < s.beta <= 1.0:
        raise ScenarioError("risk threshold must lie in (0, 1]")
    starts = np.asarray(s.starts, dtype=float)
    if starts.shape != (s.n_vehicles, 3):
        raise ScenarioError("mission needs one (x, y, heading) start per vehicle")
    inside = s.domain.contains(starts[:, :2])
    if not np.all(inside):
        bad = int(np.nonzero(~inside)[0][0])
        raise ScenarioError(f"start pose {bad} lies outside the domain")
    return s


def domain_area(d: Domain) -> float:
    """Area of the survey region [m^2]."""
    return d.area()


def map_unit_square(d: Domain, u) -> np.ndarray:
    return d.map_unit_square(u)


# --- YAML loading -----------------------------------------------------------

_SECTIONS = {
    "domain": {"vertices"},
    "sensor": {"scan_rate_hz", "figure_of_merit_db", "attenuation_db_per_km",
               "spread_db", "horizontal_fov_deg", "vertical_fov_deg",
               "elevation_deg", "slope_horizontal", "slope_vertical",
               "height_m", "min_range_m"},
    "vehicle": {"speed_mps", "nomoto_gain_hz", "nomoto_time_s", "max_rudder_deg"},
    "mission": {"vehicles", "risk_threshold", "risk_mode", "starts"},
    "qmc": {"points", "shifts", "seed"},
    "solver": {"nodes", "sim_dt_s", "risk_dt_s", "max_rudder_deg", "risk_tol",
               "position_tol_m", "max_outer", "max_inner", "penalty_init",
               "penalty_growth", "init", "multistarts", "containment_weight",
               "t_max_factor", "gradient"},
}
_REQUIRED = ("domain", "sensor", "vehicle", "mission")


def _check_keys(section: str, data: dict, allowed: set) -> None:
    if not isinstance(data, dict):
        raise ScenarioError(f"section '{section}' must be a mapping")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ScenarioError(f"unknown keys in '{section}': {', '.join(unknown)}")


def _need(section: str, data: dict, key: str):
    if key not in data:
        raise ScenarioError(f"missing key '{key}' in section '{section}'")
    return data[key]


def scenario_from_dict(raw: dict) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario file must contain a mapping at top level")
    unknown = sorted(set(raw) - set(_SECTIONS))
    if unknown:
        raise ScenarioError(f"unknown sections: {', '.join(unknown)}")
    for name in _REQUIRED:
        if name not in raw:
            raise ScenarioError(f"missing required section '{name}'")
    for name, allowed in _SECTIONS.items():
        if name in raw:
            _check_keys(name, raw[name], allowed)

    dom = Domain(np.asarray(_need("domain", raw["domain"], "vertices"), dtype=float))

    sen = raw["sensor"]
    sensor = SensorParams(
        scan_rate=float(_need("sensor", sen, "scan_rate_hz")),
        figure_of_merit=float(_need("sensor", sen, "figure_of_merit_db")),
        attenuation=float(_need("sensor", sen, "attenuation_db_per_km")) / 1000.0,
        spread=float(_need("sensor", sen, "spread_db")),
        half_fov_alpha=math.radians(float(_need("sensor", sen, "horizontal_fov_deg")) / 2.0),
        p_alpha=float(_need("sensor", sen, "slope_horizontal")),
        eps_de=math.radians(float(_need("sensor", sen, "elevation_deg"))),
        half_fov_eps=math.radians(float(_need("sensor", sen, "vertical_fov_deg")) / 2.0),
        p_eps=float(_need("sensor", sen, "slope_vertical")),
        height=float(_need("sensor", sen, "height_m")),
        r_min=float(sen.get("min_range_m", 0.1)),
    )

    veh = raw["vehicle"]
    vehicle = VehicleParams(
        speed=float(_need("vehicle", veh, "speed_mps")),
        nomoto_gain=float(_need("vehicle", veh, "nomoto_gain_hz")),
        nomoto_time=float(_need("vehicle", veh, "nomoto_time_s")),
        max_rudder=math.radians(float(veh.get("max_rudder_deg", 35.0))),
    )

    mis = raw["mission"]
    k = int(_need("mission", mis, "vehicles"))
    beta = float(_need("mission", mis, "risk_threshold"))
    mode_str = str(mis.get("risk_mode", "per-vehicle"))
    try:
        mode = RiskMode(mode_str)
    except ValueError:
        raise ScenarioError(f"risk_mode must be one of "
                            f"{[m.value for m in RiskMode]}, got {mode_str!r}") from None
    starts_raw = np.asarray(_need("mission", mis, "starts"), dtype=float)
    if starts_raw.ndim != 2 or starts_raw.shape[1] != 3:
        raise ScenarioError("mission starts must be rows of [x_m, y_m, heading_deg]")
    starts = starts_raw.copy()
    starts[:, 2] = np.radians(starts_raw[:, 2])

    qmc_raw = raw.get("qmc", {})
    qmc = QmcConfig(
        n_points=int(qmc_raw.get("points", QmcConfig.n_points)),
        n_shifts=int(qmc_raw.get("shifts", QmcConfig.n_shifts)),
        seed=int(qmc_raw.get("seed", QmcConfig.seed)),
    )

    sol_raw = raw.get("solver", {})
    defaults = TranscriptionConfig()
    try:
        init = InitStrategy(str(sol_raw.get("init", defaults.init_strategy.value)))
    except ValueError:
        raise ScenarioError(f"solver init must be one of "
                            f"{[m.value for m in InitStrategy]}") from None
    try:
        grad = GradientMode(str(sol_raw.get("gradient", defaults.gradient.value)))
    except ValueError:
        raise ScenarioError(f"solver gradient must be one of "
                            f"{[m.value for m in GradientMode]}") from None
    solver = TranscriptionConfig(
        n_nodes=int(sol_raw.get("nodes", defaults.n_nodes)),
        sim_dt=float(sol_raw.get("sim_dt_s", defaults.sim_dt)),
        risk_dt=float(sol_raw.get("risk_dt_s", defaults.risk_dt)),
        d_max=math.radians(float(sol_raw["max_rudder_deg"]))
        if "max_rudder_deg" in sol_raw else vehicle.max_rudder,
        risk_tol=float(sol_raw.get("risk_tol", defaults.risk_tol)),
        pos_tol=float(sol_raw.get("position_tol_m", defaults.pos_tol)),
        max_outer=int(sol_raw.get("max_outer", defaults.max_outer)),
        max_inner=int(sol_raw.get("max_inner", defaults.max_inner)),
        penalty_init=float(sol_raw.get("penalty_init", defaults.penalty_init)),
        penalty_growth=float(sol_raw.get("penalty_growth", defaults.penalty_growth)),
        init_strategy=init,
        n_starts=int(sol_raw.get("multistarts", defaults.n_starts)),
        containment_weight=float(sol_raw.get("containment_weight",
                                             defaults.containment_weight)),
        t_max_factor=float(sol_raw.get("t_max_factor", defaults.t_max_factor)),
        gradient=grad,
    )

    return validate_scenario(Scenario(
        domain=dom, sensor=sensor, vehicle=vehicle, n_vehicles=k, beta=beta,
        risk_mode=mode, starts=starts, qmc=qmc, solver=solver,
    ))


def load_scenario(path) -> Scenario:
    with open(path, "r") as fh:
        raw = yaml.safe_load(fh)
    return scenario_from_dict(raw)


def file_sha256(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
