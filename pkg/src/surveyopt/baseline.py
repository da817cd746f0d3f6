"""Boustrophedon reference planner.

Builds a geometric lawnmower tour over a rectangular domain: parallel legs
spaced from the effective sensor swath, semicircular turns placed outside
the survey region, a lead-in before each leg so the forward-looking sensor
has already swept the near end of the row on entry, and a perimeter route
back to the start.  Legs are added until the residual risk drops below the
mission threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Trajectory
from .qmc import QmcPointSet
from .risk import exposure, exposure_matrix, risk_from_exposures
from .scenario import RiskMode, Scenario, ScenarioError, VehicleParams
from .sensor import SensorParams, annulus_far_range, max_gated_range


# --- segment path -----------------------------------------------------------

@dataclass(frozen=True)
class Line:
    p0: np.ndarray
    p1: np.ndarray

    @property
    def length(self) -> float:
        return float(np.hypot(*(self.p1 - self.p0)))


@dataclass(frozen=True)
class Arc:
    center: np.ndarray
    radius: float
    a0: float      # start angle from center [rad]
    sweep: float   # signed, CCW positive

    @property
    def length(self) -> float:
        return self.radius * abs(self.sweep)


@dataclass
class SegmentPath:
    """Tangent-continuous chain of lines and arcs."""

    segments: list = field(default_factory=list)

    @property
    def length(self) -> float:
        return sum(s.length for s in self.segments)

    def add_line(self, p0, p1) -> None:
        p0 = np.asarray(p0, dtype=float)
        p1 = np.asarray(p1, dtype=float)
        if np.hypot(*(p1 - p0)) > 1e-12:
            self.segments.append(Line(p0, p1))

    def add_arc(self, center, radius, a0, sweep) -> None:
        if abs(sweep) > 1e-12:
            self.segments.append(Arc(np.asarray(center, dtype=float),
                                     float(radius), float(a0), float(sweep)))

    def add_route(self, points, fillet_radius: float) -> None:
        """Polyline through points with circular fillets at the corners."""
        pts = [np.asarray(p, dtype=float) for p in points]
        if len(pts) < 2:
            return
        pos = pts[0]
        for i in range(1, len(pts) - 1):
            a, b, c = pos, pts[i], pts[i + 1]
            u = b - a
            v = c - b
            lu, lv = np.hypot(*u), np.hypot(*v)
            if lu < 1e-12 or lv < 1e-12:
                continue
            u = u / lu
            v = v / lv
            turn = math.atan2(u[0] * v[1] - u[1] * v[0], float(np.dot(u, v)))
            tan_off = fillet_radius * math.tan(abs(turn) / 2.0)
            if abs(turn) < 1e-9 or tan_off > min(lu, lv) / 2.0:
                # Collinear, or no room: keep the sharp corner.
                self.add_line(pos, b)
                pos = b
                continue
            t1 = b - u * tan_off
            t2 = b + v * tan_off
            n = np.array([-u[1], u[0]]) * math.copysign(1.0, turn)
            center = t1 + n * fillet_radius
            a0 = math.atan2(t1[1] - center[1], t1[0] - center[0])
            self.add_line(pos, t1)
            self.add_arc(center, fillet_radius, a0, turn)
            pos = t2
        self.add_line(pos, pts[-1])

    def sample(self, speed: float, dt_target: float,
               vehicle: VehicleParams) -> Trajectory:
        """Constant-speed traversal sampled at a uniform step.

        Heading follows the path tangent; turn rate and rudder take their
        steady-state values on each segment.
        """
        lengths = np.array([s.length for s in self.segments])
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        total = cum[-1]
        t_total = total / speed
        n = max(1, int(math.ceil(t_total / dt_target)))
        t = np.linspace(0.0, t_total, n + 1)
        s_arc = t * speed
        idx = np.minimum(np.searchsorted(cum, s_arc, side="right") - 1,
                         len(self.segments) - 1)
        xs = np.empty(n + 1)
        ys = np.empty(n + 1)
        psi = np.empty(n + 1)
        turn = np.zeros(n + 1)
        rud = np.zeros(n + 1)
        for j in range(n + 1):
            seg = self.segments[idx[j]]
            local = s_arc[j] - cum[idx[j]]
            if isinstance(seg, Line):
                u = (seg.p1 - seg.p0) / seg.length
                p = seg.p0 + u * local
                xs[j], ys[j] = p
                psi[j] = math.atan2(u[1], u[0])
            else:
                sgn = math.copysign(1.0, seg.sweep)
                phi = seg.a0 + sgn * local / seg.radius
                xs[j] = seg.center[0] + seg.radius * math.cos(phi)
                ys[j] = seg.center[1] + seg.radius * math.sin(phi)
                psi[j] = phi + sgn * 0.5 * math.pi
                turn[j] = sgn * speed / seg.radius
                rud[j] = sgn * speed / (seg.radius * vehicle.nomoto_gain)
        psi = np.unwrap(psi)
        states = np.column_stack([xs, ys, psi, turn])
        return Trajectory(t=t, states=states, rudder=rud)


# --- swath calibration ------------------------------------------------------

def straight_pass_exposure(lateral, sp: SensorParams, speed: float,
                           dt: float = 0.4) -> np.ndarray:
    """Exposure of targets at given lateral offsets from one straight pass.

    The pass runs along +x past the target far enough that the gated
    sensor footprint fully clears it on both sides.
    """
    lateral = np.atleast_1d(np.asarray(lateral, dtype=float))
    reach = max_gated_range(sp)
    if not math.isfinite(reach):
        raise ScenarioError("sensor footprint is unbounded; cannot calibrate a swath")
    lead = reach + 10.0 * speed * dt
    n = int(math.ceil(2.0 * lead / (speed * dt)))
    t = np.linspace(0.0, 2.0 * lead / speed, n + 1)
    xs = -lead + speed * t
    states = np.column_stack([xs, np.zeros_like(xs), np.zeros_like(xs),
                              np.zeros_like(xs)])
    pts = np.column_stack([np.zeros_like(lateral), lateral])
    traj = Trajectory(t=t, states=states, rudder=np.zeros_like(xs))
    return exposure(traj, pts, sp)


def effective_swath_halfwidth(sp: SensorParams, vehicle: VehicleParams,
                              detect_threshold: float = 0.9) -> float:
    """Largest lateral offset still detected with the given probability
    by a single straight pass.  Found by bisection on the pass exposure."""
    if not 0.0 < detect_threshold < 1.0:
        raise ScenarioError("detection threshold must lie in (0, 1)")
    e_min = -math.log(1.0 - detect_threshold)
    lo = 0.0
    hi = max_gated_range(sp)
    e_lo = float(straight_pass_exposure(lo, sp, vehicle.speed)[0])
    if e_lo < e_min:
        raise ScenarioError("sensor cannot reach the detection threshold "
                            "even directly on track")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if float(straight_pass_exposure(mid, sp, vehicle.speed)[0]) >= e_min:
            lo = mid
        else:
            hi = mid
    return lo


# --- planner ----------------------------------------------------------------

@dataclass(frozen=True)
class BaselinePlan:
    trajectory: Trajectory
    path: SegmentPath
    path_time: float
    n_legs: int
    spacing: float
    swath_halfwidth: float
    overhang: float
    risk: float
    risk_after_leg: tuple

    def turn_arcs(self):
        return [s for s in self.path.segments if isinstance(s, Arc)]


def path_time(plan: BaselinePlan) -> float:
    """Tour duration [s]: total path length over the (constant) speed."""
    return plan.path_time


def _row_positions(ymin: float, ymax: float, w: float, spacing: float):
    rows = [ymin + w]
    while rows[-1] + w < ymax - 1e-9:
        rows.append(rows[-1] + spacing)
    return rows


def plan_boustrophedon(scenario: Scenario, pts: QmcPointSet,
                       spacing: float | None = None,
                       detect_threshold: float = 0.9) -> BaselinePlan:
    """Shortest-feasible lawnmower tour for a single vehicle.

    spacing=None picks 1.7x the effective swath halfwidth (15 percent
    overlap between adjacent swaths).  Legs are appended until the residual
    risk of the tour flown so far is within the mission threshold; the
    return leg then closes the tour at the start position.
    """
    if scenario.n_vehicles != 1:
        raise ScenarioError("the boustrophedon baseline supports a single vehicle")
    if not scenario.domain.is_axis_rectangle():
        raise ScenarioError("the boustrophedon baseline needs an axis-aligned "
                            "rectangular domain")
    sp = scenario.sensor
    veh = scenario.vehicle
    xmin, xmax, ymin, ymax = scenario.domain.bounds()
    start = np.asarray(scenario.starts[0, :2], dtype=float)

    w = effective_swath_halfwidth(sp, veh, detect_threshold)
    if spacing is None:
        spacing = 1.7 * w
    if spacing <= 0.0:
        raise ScenarioError("leg spacing must be positive")
    turn_radius = spacing / 2.0
    if turn_radius < veh.min_turn_radius() - 1e-9:
        raise ScenarioError("leg spacing is below the vehicle turn diameter")

    overhang = min(annulus_far_range(sp), xmax - xmin)
    if not math.isfinite(overhang):
        overhang = w
    fillet = max(4.0 * veh.min_turn_radius(), 25.0)
    margin = 2.0 * fillet + 10.0

    def risk_of(path: SegmentPath) -> float:
        traj = path.sample(veh.speed, scenario.solver.risk_dt, veh)
        E = exposure_matrix([traj], pts.flat, sp)
        return risk_from_exposures(E, scenario.risk_mode)

    # A mission can be vacuous (threshold 1): the empty tour already meets it.
    empty = Trajectory(t=np.zeros(1),
                       states=np.array([[start[0], start[1],
                                         scenario.starts[0, 2], 0.0]]),
                       rudder=np.zeros(1))
    if 1.0 <= scenario.beta:
        return BaselinePlan(trajectory=empty, path=SegmentPath(), path_time=0.0,
                            n_legs=0, spacing=spacing, swath_halfwidth=w,
                            overhang=overhang, risk=1.0, risk_after_leg=())

    rows = _row_positions(ymin, ymax, w, spacing)
    risk_hist = []
    path = SegmentPath()
    # Entry: route from the start to the lead-in point of the first leg,
    # which sits one overhang west of the domain so the first row is swept
    # from its very edge.  The approach point makes the last entry segment
    # collinear with the leg, keeping the junction tangent.
    lead_in = np.array([xmin - overhang, rows[0]])
    approach = lead_in - np.array([margin, 0.0])
    path.add_route([start, approach, lead_in], fillet)
    n_legs = 0
    feasible = False
    for i, y in enumerate(rows):
        east = i % 2 == 0
        if east:
            path.add_line((xmin - overhang, y), (xmax, y))
        else:
            path.add_line((xmax + overhang, y), (xmin, y))
        n_legs += 1
        r_now = risk_of(path)
        risk_hist.append(r_now)
        if r_now <= scenario.beta:
            feasible = True
            break
        if i + 1 < len(rows):
            y2 = rows[i + 1]
            if east:
                path.add_line((xmax, y), (xmax + overhang, y))
                path.add_arc((xmax + overhang, y + turn_radius), turn_radius,
                             -0.5 * math.pi, math.pi)
            else:
                path.add_line((xmin, y), (xmin - overhang, y))
                path.add_arc((xmin - overhang, y + turn_radius), turn_radius,
                             -0.5 * math.pi, -math.pi)
    if not feasible:
        raise RuntimeError("lawnmower coverage cannot reach the risk threshold; "
                           f"best residual risk {risk_hist[-1]:.4f} "
                           f"> {scenario.beta}")

    # Return along the perimeter, outside the domain, then cut in to the
    # start point.
    y_end = rows[n_legs - 1]
    ended_east = (n_legs - 1) % 2 == 0
    x_out = (xmax + margin) if ended_east else (xmin - margin)
    leg_end = np.array([xmax if ended_east else xmin, y_end])
    ret = [leg_end, (x_out, y_end), (x_out, ymin - margin),
           (start[0], ymin - margin), (start[0], start[1])]
    path.add_route(ret, fillet)

    traj = path.sample(veh.speed, scenario.solver.risk_dt, veh)
    E = exposure_matrix([traj], pts.flat, sp)
    final_risk = risk_from_exposures(E, scenario.risk_mode)
    return BaselinePlan(trajectory=traj, path=path,
                        path_time=path.length / veh.speed, n_legs=n_legs,
                        spacing=spacing, swath_halfwidth=w, overhang=overhang,
                        risk=final_risk, risk_after_leg=tuple(risk_hist))
