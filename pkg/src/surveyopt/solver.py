"""Minimum-time coverage planning by direct transcription.

The free final time T_F and per-vehicle rudder node values form the
decision vector; each vehicle is integrated on a normalized time grid
scaled by T_F, so the discretization sizes stay fixed while T_F varies.
The residual-risk inequality and the return-to-start equalities are
handled with an augmented Lagrangian whose smooth inner problems go to
L-BFGS-B.  Merit gradients come from a discrete adjoint of the full
pipeline (risk quadrature, sensor model, RK4 integration); a central
finite-difference mode exists as a reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .baseline import SegmentPath, effective_swath_halfwidth
from .dynamics import ControlSchedule, Trajectory
from .qmc import QmcPointSet, generate_qmc_points
from .risk import risk_from_exposures
from .scenario import (GradientMode, InitStrategy, RiskMode, Scenario,
                       TranscriptionConfig)

# Duration floor, kept small enough that V * T_MIN sits well inside the
# default terminal tolerance: a vacuous risk constraint then collapses
# cleanly onto the bound instead of stranding the endpoint mid-loop.
T_MIN = 0.01

POS_REF = 10.0       # terminal-constraint scaling [m]
RHO_MAX = 1.0e8


@dataclass(frozen=True)
class DecisionVector:
    """Free final time plus per-vehicle rudder values on uniform
    normalized time nodes."""

    t_final: float
    nodes: np.ndarray          # (k, n_nodes) [rad]

    def __post_init__(self):
        nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        object.__setattr__(self, "nodes", nodes)
        if self.t_final <= 0.0:
            raise ValueError("t_final must be positive")


@dataclass
class ConstraintReport:
    risk: float
    risk_violation: float
    terminal_violations: np.ndarray   # [m] per vehicle
    containment_penalty: float


@dataclass
class SolveResult:
    t_final: float
    schedules: list
    trajectories: list
    risk: float
    risk_mode: RiskMode
    report: ConstraintReport
    converged: bool
    n_outer: int
    n_evals: int
    history: list
    qmc_metadata: dict


class Transcription:
    """Fixed discretization of one scenario instance.

    Grid sizes derive from the largest admissible duration so that the
    merit stays smooth while T_F moves inside its bounds.
    """

    def __init__(self, scenario: Scenario, cfg: TranscriptionConfig,
                 pts: QmcPointSet, t_ref: float):
        self.scenario = scenario
        self.cfg = cfg
        self.pts_flat = pts.flat
        self.t_ref = float(t_ref)
        self.t_max = cfg.t_max_factor * self.t_ref
        self.n_risk = max(48, int(math.ceil(self.t_max / cfg.risk_dt)))
        self.stride = max(1, int(math.ceil(self.t_max / (self.n_risk * cfg.sim_dt))))
        self.n_sim = self.n_risk * self.stride
        self.k = scenario.n_vehicles
        self.n_nodes = cfg.n_nodes
        self.pack = scenario.sensor.pack()
        veh = scenario.vehicle
        self._veh = (veh.speed, veh.nomoto_gain, veh.nomoto_time)
        # Piecewise-linear map from node values to the RK4 half grid,
        # cached as gather indices plus weights.
        s_nodes = np.linspace(0.0, 1.0, cfg.n_nodes)
        s_half = np.linspace(0.0, 1.0, 2 * self.n_sim + 1)
        idx = np.clip(np.searchsorted(s_nodes, s_half, side="right") - 1,
                      0, cfg.n_nodes - 2)
        self._ia = idx
        self._wb = (s_half - s_nodes[idx]) * (cfg.n_nodes - 1)
        self._starts = np.asarray(scenario.starts, dtype=float)

    # -- decision vector packing ------------------------------------------

    def pack_z(self, dv: DecisionVector) -> np.ndarray:
        z = np.empty(1 + self.k * self.n_nodes)
        z[0] = dv.t_final / self.t_ref
        z[1:] = (dv.nodes / self.cfg.d_max).ravel()
        return z

    def unpack_z(self, z: np.ndarray) -> DecisionVector:
        nodes = z[1:].reshape(self.k, self.n_nodes) * self.cfg.d_max
        return DecisionVector(t_final=z[0] * self.t_ref, nodes=nodes)

    def bounds(self):
        b = [(T_MIN / self.t_ref, self.cfg.t_max_factor)]
        b += [(-1.0, 1.0)] * (self.k * self.n_nodes)
        return b

    # -- forward evaluation ------------------------------------------------

    def _d_half(self, nodes_n: np.ndarray) -> np.ndarray:
        return nodes_n[self._ia] * (1.0 - self._wb) + nodes_n[self._ia + 1] * self._wb

    def _d_half_adjoint(self, g_dhalf: np.ndarray) -> np.ndarray:
        g = np.zeros(self.n_nodes)
        np.add.at(g, self._ia, g_dhalf * (1.0 - self._wb))
        np.add.at(g, self._ia + 1, g_dhalf * self._wb)
        return g

    def forward(self, dv: DecisionVector) -> dict:
        V, K, Tn = self._veh
        t_final = dv.t_final
        dt_r = t_final / self.n_risk
        states = []
        d_halves = []
        E = np.empty((self.k, self.pts_flat.shape[0]))
        for n in range(self.k):
            dh = self._d_half(dv.nodes[n])
            y0 = np.array([self._starts[n, 0], self._starts[n, 1],
                           self._starts[n, 2], 0.0])
            st = _kernels.simulate_rk4(y0, dh, t_final, self.n_sim, V, K, Tn)
            sub = np.ascontiguousarray(st[::self.stride])
            E[n] = _kernels.exposure_forward(sub, self.pts_flat, self.pack, dt_r)
            states.append(st)
            d_halves.append(dh)
        q = risk_from_exposures(E, self.scenario.risk_mode)
        ends = np.stack([st[-1, :2] for st in states])
        e_sc = (ends - self._starts[:, :2]) / POS_REF
        out = {"dv": dv, "states": states, "d_halves": d_halves, "E": E,
               "q": q, "e_sc": e_sc, "dt_r": dt_r}
        if self.cfg.containment_weight > 0.0:
            out["containment"] = self._containment(states, dt_r)
        else:
            out["containment"] = (0.0, None)
        return out

    def _containment(self, states, dt_r):
        dom = self.scenario.domain
        w = np.full(self.n_risk + 1, dt_r)
        w[0] = w[-1] = 0.5 * dt_r
        total = 0.0
        grads = []
        n_e, v_e = dom._edge_normals()
        for st in states:
            sub = st[::self.stride]
            sd = np.einsum("pek,ek->pe", sub[:, None, :2] - v_e[None, :, :], n_e)
            j = np.argmax(sd, axis=1)
            d_out = np.maximum(sd[np.arange(sd.shape[0]), j], 0.0)
            total += float(np.dot(w, d_out ** 2))
            g = 2.0 * (w * d_out)[:, None] * n_e[j]
            g[d_out <= 0.0] = 0.0
            grads.append(g)
        return total, grads

    def trajectories(self, dv: DecisionVector) -> list:
        """Vehicle trajectories sampled on the risk grid."""
        fwd = self.forward(dv)
        return self._trajectories_from(fwd)

    def _trajectories_from(self, fwd) -> list:
        dv = fwd["dv"]
        t = np.linspace(0.0, dv.t_final, self.n_risk + 1)
        out = []
        for n in range(self.k):
            sub = fwd["states"][n][::self.stride]
            rud = fwd["d_halves"][n][::2][::self.stride]
            out.append(Trajectory(t=t, states=np.array(sub), rudder=np.array(rud)))
        return out

    def report(self, fwd) -> ConstraintReport:
        term = np.hypot(fwd["e_sc"][:, 0], fwd["e_sc"][:, 1]) * POS_REF
        return ConstraintReport(
            risk=fwd["q"],
            risk_violation=max(0.0, fwd["q"] - self.scenario.beta),
            terminal_violations=term,
            containment_penalty=fwd["containment"][0],
        )

    # -- augmented-Lagrangian merit ---------------------------------------

    def merit(self, fwd, lam_r: float, lam_e: np.ndarray, rho: float) -> float:
        m = fwd["dv"].t_final / self.t_ref
        g_r = fwd["q"] - self.scenario.beta
        m += (max(0.0, lam_r + rho * g_r) ** 2 - lam_r ** 2) / (2.0 * rho)
        e = fwd["e_sc"].ravel()
        m += float(np.dot(lam_e, e) + 0.5 * rho * np.dot(e, e))
        m += self.cfg.containment_weight * fwd["containment"][0]
        return m

    def merit_grad(self, fwd, lam_r: float, lam_e: np.ndarray,
                   rho: float) -> np.ndarray:
        """Adjoint gradient of the merit with respect to the packed z."""
        V, K, Tn = self._veh
        dv = fwd["dv"]
        t_final = dv.t_final
        E, q = fwd["E"], fwd["q"]
        M_pts = self.pts_flat.shape[0]
        w_risk = max(0.0, lam_r + rho * (q - self.scenario.beta))
        lam_e2 = lam_e.reshape(self.k, 2) + rho * fwd["e_sc"]

        g_nodes = np.empty((self.k, self.n_nodes))
        g_tf = 1.0 / self.t_ref
        if self.cfg.containment_weight > 0.0:
            # Containment weights carry one dt_r factor, so the penalty
            # scales linearly with T_F just like the exposures.
            g_tf += self.cfg.containment_weight * fwd["containment"][0] / t_final
        if w_risk > 0.0:
            if self.scenario.risk_mode is RiskMode.JOINT:
                dq_dE = np.tile(-np.exp(-E.sum(axis=0)) / M_pts, (self.k, 1))
            else:
                dq_dE = -np.exp(-E) / M_pts
        else:
            dq_dE = None
        w_c = self.cfg.containment_weight
        cont_g = fwd["containment"][1]
        for n in range(self.k):
            st = fwd["states"][n]
            sub = np.ascontiguousarray(st[::self.stride])
            lam_full = np.zeros((self.n_sim + 1, 4))
            if dq_dE is not None:
                wE = w_risk * dq_dE[n]
                g_sub = _kernels.exposure_backward(sub, self.pts_flat, self.pack,
                                                   fwd["dt_r"], wE)
                lam_full[::self.stride, :3] += g_sub
                # Exposure scales with the quadrature step, hence with T_F.
                g_tf += float(np.dot(wE, E[n])) / t_final
            if w_c > 0.0 and cont_g is not None:
                lam_full[::self.stride, :2] += w_c * cont_g[n]
            lam_full[self.n_sim, 0] += lam_e2[n, 0] / POS_REF
            lam_full[self.n_sim, 1] += lam_e2[n, 1] / POS_REF
            g_dh, g_tf_dyn = _kernels.rk4_adjoint(st, fwd["d_halves"][n], t_final,
                                                  self.n_sim, V, K, Tn, lam_full)
            g_tf += g_tf_dyn
            g_nodes[n] = self._d_half_adjoint(g_dh)
        g = np.empty(1 + self.k * self.n_nodes)
        g[0] = g_tf * self.t_ref
        g[1:] = (g_nodes * self.cfg.d_max).ravel()
        return g


# --- public operations ------------------------------------------------------

def _transcription_for(dv: DecisionVector, scenario: Scenario,
                       cfg: TranscriptionConfig | None,
                       pts: QmcPointSet | None) -> Transcription:
    cfg = cfg if cfg is not None else scenario.solver
    if pts is None:
        pts = generate_qmc_points(scenario.qmc, scenario.domain)
    # Standalone evaluations size the grids from the vector itself.
    return Transcription(scenario, cfg, pts, dv.t_final / cfg.t_max_factor)


def transcribe(dv: DecisionVector, scenario: Scenario,
               cfg: TranscriptionConfig | None = None,
               pts: QmcPointSet | None = None) -> list:
    """Simulate the decision vector into per-vehicle trajectories."""
    return _transcription_for(dv, scenario, cfg, pts).trajectories(dv)


def evaluate_constraints(dv: DecisionVector, scenario: Scenario,
                         cfg: TranscriptionConfig | None = None,
                         pts: QmcPointSet | None = None) -> ConstraintReport:
    """Risk, terminal and containment feasibility of a decision vector."""
    tr = _transcription_for(dv, scenario, cfg, pts)
    return tr.report(tr.forward(dv))


def gradient(dv: DecisionVector, scenario: Scenario,
             cfg: TranscriptionConfig | None = None,
             pts: QmcPointSet | None = None,
             lam_r: float = 0.0, lam_e: np.ndarray | None = None,
             rho: float | None = None):
    """Merit value and gradient in the packed decision space.

    Uses the configured gradient mode: the discrete adjoint, or central
    finite differences as the slow reference.
    """
    cfg = cfg if cfg is not None else scenario.solver
    tr = _transcription_for(dv, scenario, cfg, pts)
    if lam_e is None:
        lam_e = np.zeros(2 * scenario.n_vehicles)
    rho = cfg.penalty_init if rho is None else rho
    z = tr.pack_z(dv)
    fwd = tr.forward(dv)
    m = tr.merit(fwd, lam_r, lam_e, rho)
    if cfg.gradient is GradientMode.ADJOINT:
        return m, tr.merit_grad(fwd, lam_r, lam_e, rho)
    g = np.empty_like(z)
    for i in range(z.size):
        h = 1.0e-6 * max(1.0, abs(z[i]))
        zp = z.copy(); zp[i] += h
        zm = z.copy(); zm[i] -= h
        mp = tr.merit(tr.forward(tr.unpack_z(zp)), lam_r, lam_e, rho)
        mm = tr.merit(tr.forward(tr.unpack_z(zm)), lam_r, lam_e, rho)
        g[i] = (mp - mm) / (2.0 * h)
    return m, g


# --- initial guesses --------------------------------------------------------

def _segment_rudder_steps(path: SegmentPath, speed: float, nomoto_gain: float):
    """Step-function rudder profile (breakpoints, values) along a path."""
    from .baseline import Arc
    times = [0.0]
    vals = []
    for seg in path.segments:
        times.append(times[-1] + seg.length / speed)
        if isinstance(seg, Arc):
            vals.append(math.copysign(speed / (seg.radius * nomoto_gain),
                                      seg.sweep))
        else:
            vals.append(0.0)
    return np.asarray(times), np.asarray(vals)


def _node_average(times, vals, t_total: float, n_nodes: int) -> np.ndarray:
    """Window averages of a step function at uniform nodes on [0, t_total].

    Averaging (rather than sampling) keeps the net heading change of brief
    rudder pulses when the node spacing is coarse.
    """
    cum = np.concatenate([[0.0], np.cumsum(vals * np.diff(times))])

    def C(t):
        t = np.clip(t, 0.0, times[-1])
        return np.interp(t, times, cum)

    t_nodes = np.linspace(0.0, t_total, n_nodes)
    half = 0.5 * t_total / (n_nodes - 1)
    a = np.clip(t_nodes - half, 0.0, t_total)
    b = np.clip(t_nodes + half, 0.0, t_total)
    return (C(b) - C(a)) / np.maximum(b - a, 1e-12)


def _row_layout(scenario: Scenario, w: float, n_rows: int,
                edge: float) -> list:
    """Survey rows spread symmetrically between the domain edges."""
    _, _, ymin, ymax = scenario.domain.bounds()
    if n_rows == 1:
        return [0.5 * (ymin + ymax)]
    return list(np.linspace(ymin + edge * w, ymax - edge * w, n_rows))


def _serpentine_path(scenario: Scenario, rows, spacing: float,
                     overhang: float, start_pose,
                     feature_radius: float = 40.0) -> SegmentPath:
    """Lawnmower tour over the given rows, entered tangentially from the
    start pose and closed back at the start point.

    feature_radius sets the entry arcs and corner fillets; callers pick it
    so every turn lasts at least a rudder-node window, keeping the tour
    representable by interpolated node values.
    """
    xmin, xmax, ymin, ymax = scenario.domain.bounds()
    veh = scenario.vehicle
    tr_sq = max(feature_radius, veh.min_turn_radius())
    fillet = max(feature_radius, 4.0 * veh.min_turn_radius())
    margin = 2.0 * fillet + 10.0
    path = SegmentPath()
    lead_in = np.array([xmin - overhang, rows[0]])
    _add_dubins(path, start_pose, lead_in - np.array([margin, 0.0]), 0.0,
                fillet)
    path.add_line(lead_in - np.array([margin, 0.0]), lead_in)
    for i, y in enumerate(rows):
        east = i % 2 == 0
        sgn = 1.0 if east else -1.0
        if east:
            path.add_line((xmin - overhang, y), (xmax, y))
        else:
            path.add_line((xmax + overhang, y), (xmin, y))
        if i + 1 < len(rows):
            x_edge = xmax if east else xmin
            x_p = x_edge + sgn * overhang
            path.add_line((x_edge, y), (x_p, y))
            if spacing / 2.0 > tr_sq:
                # Racetrack turn: two quarter arcs joined by a straight
                # climb, cheaper than a semicircle when rows sit far apart.
                path.add_arc((x_p, y + tr_sq), tr_sq,
                             -0.5 * math.pi, sgn * 0.5 * math.pi)
                xa = x_p + sgn * tr_sq
                path.add_line((xa, y + tr_sq), (xa, y + spacing - tr_sq))
                path.add_arc((x_p, y + spacing - tr_sq), tr_sq,
                             0.0 if east else math.pi, sgn * 0.5 * math.pi)
            else:
                tr = max(spacing / 2.0, veh.min_turn_radius())
                path.add_arc((x_p, y + tr), tr, -0.5 * math.pi,
                             sgn * math.pi)
    y_end = rows[-1]
    ended_east = (len(rows) - 1) % 2 == 0
    leg_end = (xmax if ended_east else xmin, y_end)
    # Straight home across the interior; the extra pass only adds coverage.
    _arc_to_point(path, leg_end, 0.0 if ended_east else math.pi,
                  start_pose[:2], fillet)
    return path


def _arc_to_point(path: SegmentPath, pos, heading: float, target,
                  radius: float) -> None:
    """Turn onto the tangent line through a target point and run it down.

    Picks the turn side with the shorter arc; falls back to a straight
    segment when the target sits inside both turn circles.
    """
    pos = np.asarray(pos, dtype=float)
    target = np.asarray(target, dtype=float)
    best = None
    for side in (1.0, -1.0):
        center = pos + radius * np.array([-math.sin(heading) * side,
                                          math.cos(heading) * side])
        v = target - center
        d = math.hypot(v[0], v[1])
        if d <= radius * 1.001:
            continue
        phi = math.atan2(v[1], v[0])
        a_t = phi - side * math.acos(radius / d)
        a0 = heading - side * 0.5 * math.pi
        sweep = side * _wrap_2pi(side * (a_t - a0))
        if best is None or abs(sweep) < abs(best[0]):
            best = (sweep, center, a0, a_t)
    if best is None:
        path.add_line(pos, target)
        return
    sweep, center, a0, a_t = best
    if abs(sweep) > 1e-9:
        path.add_arc(center, radius, a0, sweep)
    tangent = center + radius * np.array([math.cos(a_t), math.sin(a_t)])
    path.add_line(tangent, target)


def _spiral_path(scenario: Scenario, w: float, spacing: float,
                 start_pose, feature_radius: float = 40.0) -> SegmentPath:
    xmin, xmax, ymin, ymax = scenario.domain.bounds()
    veh = scenario.vehicle
    fillet = min(max(feature_radius, 4.0 * veh.min_turn_radius()),
                 0.45 * spacing)
    x0, x1 = xmin + w, xmax - w
    y0, y1 = ymin + w, ymax - w
    pts = []
    while x1 - x0 > spacing and y1 - y0 > spacing:
        pts += [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0 + spacing)]
        x0 += spacing
        x1 -= spacing
        y0 += spacing
        y1 -= spacing
    pts.append(((x0 + x1) / 2.0, (y0 + y1) / 2.0))
    pts.append(np.asarray(start_pose[:2], dtype=float))
    path = SegmentPath()
    first = np.asarray(pts[0], dtype=float)
    second = np.asarray(pts[1], dtype=float)
    theta = math.atan2(second[1] - first[1], second[0] - first[0])
    _add_dubins(path, start_pose, first, theta, fillet)
    path.add_route(pts, fillet)
    return path


def _wrap_2pi(a: float) -> float:
    return a % (2.0 * math.pi)


def _add_dubins(path: SegmentPath, q0, p1, theta1: float, rho: float) -> None:
    """Arc-straight-arc connection from pose q0 to pose (p1, theta1).

    Only the two same-side words are considered; with the radius small
    against the separation one of them is always close to optimal and
    both always exist.
    """
    x0, y0, th0 = float(q0[0]), float(q0[1]), float(q0[2])
    dx, dy = float(p1[0]) - x0, float(p1[1]) - y0
    dist = math.hypot(dx, dy)
    phi = math.atan2(dy, dx)
    d = dist / rho
    al = _wrap_2pi(th0 - phi)
    be = _wrap_2pi(theta1 - phi)
    words = []
    tmp = math.atan2(math.cos(be) - math.cos(al), d + math.sin(al) - math.sin(be))
    p2 = 2.0 + d * d - 2.0 * math.cos(al - be) + 2.0 * d * (math.sin(al) - math.sin(be))
    if p2 >= 0.0:
        words.append((_wrap_2pi(tmp - al), math.sqrt(p2), _wrap_2pi(be - tmp), +1.0))
    tmp = math.atan2(math.cos(al) - math.cos(be), d - math.sin(al) + math.sin(be))
    p2 = 2.0 + d * d - 2.0 * math.cos(al - be) + 2.0 * d * (math.sin(be) - math.sin(al))
    if p2 >= 0.0:
        words.append((_wrap_2pi(al - tmp), math.sqrt(p2), _wrap_2pi(tmp - be), -1.0))
    t, p, q, side = min(words, key=lambda w: w[0] + w[1] + w[2])
    pos = np.array([x0, y0])
    heading = th0
    for sweep_len, kind in ((t, "arc"), (p, "line"), (q, "arc")):
        if sweep_len < 1e-9:
            continue
        if kind == "line":
            end = pos + rho * sweep_len * np.array([math.cos(heading),
                                                    math.sin(heading)])
            path.add_line(pos, end)
            pos = end
        else:
            center = pos + rho * np.array([-math.sin(heading) * side,
                                           math.cos(heading) * side])
            a0 = math.atan2(pos[1] - center[1], pos[0] - center[0])
            sweep = side * sweep_len
            path.add_arc(center, rho, a0, sweep)
            a1 = a0 + sweep
            pos = center + rho * np.array([math.cos(a1), math.sin(a1)])
            heading += sweep


def _extend_with_loiter(path: SegmentPath, scenario: Scenario,
                        target_length: float,
                        radius: float | None = None) -> None:
    """Pad a closed tour with tangent circles until it reaches the
    target length, so early finishers idle near the start point."""
    from .baseline import Arc, Line
    veh = scenario.vehicle
    if radius is None:
        radius = 2.0 * veh.min_turn_radius()
    last = path.segments[-1]
    if isinstance(last, Line):
        d = last.p1 - last.p0
        heading = math.atan2(d[1], d[0])
        pos = last.p1
    else:
        a1 = last.a0 + last.sweep
        heading = a1 + math.copysign(0.5 * math.pi, last.sweep)
        pos = last.center + last.radius * np.array([math.cos(a1), math.sin(a1)])
    a0 = heading - 0.5 * math.pi
    center = pos + radius * np.array([-math.sin(heading), math.cos(heading)])
    while path.length < target_length - 1e-9:
        sweep = min(2.0 * math.pi, (target_length - path.length) / radius)
        path.add_arc(center, radius, a0, sweep)
        a0 += sweep


def _polish_nodes(tr: Transcription, path: SegmentPath, t_init: float,
                  nodes0: np.ndarray, y0: np.ndarray) -> np.ndarray:
    """Global refinement of a tracked node profile: first the heading
    history (almost quadratic in the rudder), then the positions."""
    V, K, Tn = tr._veh
    ref = path.sample(V, max(t_init / (4 * tr.n_risk), 0.05),
                      tr.scenario.vehicle)
    t_fit = np.linspace(0.0, t_init, tr.n_risk + 1)
    rx = np.interp(t_fit, ref.t, ref.states[:, 0])
    ry = np.interp(t_fit, ref.t, ref.states[:, 1])
    rpsi = np.interp(t_fit, ref.t, ref.states[:, 2])
    s_pos = 1.0 / ((tr.n_risk + 1) * POS_REF ** 2)
    s_psi = 1.0 / (tr.n_risk + 1)

    def run(zn):
        dh = tr._d_half(zn * tr.cfg.d_max)
        st = _kernels.simulate_rk4(y0, dh, t_init, tr.n_sim, V, K, Tn)
        return dh, st, st[::tr.stride]

    def pull_back(st, dh, lam):
        g_dh, _ = _kernels.rk4_adjoint(st, dh, t_init, tr.n_sim, V, K, Tn, lam)
        return tr._d_half_adjoint(g_dh) * tr.cfg.d_max

    def fg_psi(zn):
        dh, st, sub = run(zn)
        dpsi = np.arctan2(np.sin(sub[:, 2] - rpsi), np.cos(sub[:, 2] - rpsi))
        lam = np.zeros((tr.n_sim + 1, 4))
        lam[::tr.stride, 2] = 2.0 * s_psi * dpsi
        return s_psi * float(np.dot(dpsi, dpsi)), pull_back(st, dh, lam)

    def fg_pos(zn):
        dh, st, sub = run(zn)
        ex, ey = sub[:, 0] - rx, sub[:, 1] - ry
        lam = np.zeros((tr.n_sim + 1, 4))
        lam[::tr.stride, 0] = 2.0 * s_pos * ex
        lam[::tr.stride, 1] = 2.0 * s_pos * ey
        j = s_pos * float(np.dot(ex, ex) + np.dot(ey, ey))
        return j, pull_back(st, dh, lam)

    zn = np.clip(nodes0 / tr.cfg.d_max, -1.0, 1.0)
    for fg, iters in ((fg_psi, 150), (fg_pos, 300)):
        res = minimize(fg, zn, jac=True, method="L-BFGS-B",
                       bounds=[(-1.0, 1.0)] * tr.n_nodes,
                       options={"maxiter": iters, "maxcor": 30,
                                "ftol": 1e-15, "gtol": 1e-11})
        zn = res.x
    return zn * tr.cfg.d_max


def _paths_to_guess(paths: list, poses, scenario: Scenario,
                    cfg: TranscriptionConfig, pts: QmcPointSet,
                    loiter_radius: float) -> DecisionVector:
    veh = scenario.vehicle
    # A slice of loiter slack at the tail lets the duration bound move
    # down without immediately dragging the endpoint off the start.
    t_init = 1.06 * max(p.length for p in paths) / veh.speed
    for p in paths:
        _extend_with_loiter(p, scenario, t_init * veh.speed, loiter_radius)
    tr = Transcription(scenario, cfg, pts, t_init)
    nodes = np.empty((len(paths), cfg.n_nodes))
    for n, p in enumerate(paths):
        times, vals = _segment_rudder_steps(p, veh.speed, veh.nomoto_gain)
        warm = _node_average(times, vals, t_init, cfg.n_nodes)
        y0 = np.array([poses[n][0], poses[n][1], poses[n][2], 0.0])
        nodes[n] = _polish_nodes(tr, p, t_init, warm, y0)
    np.clip(nodes, -0.999 * cfg.d_max, 0.999 * cfg.d_max, out=nodes)
    return DecisionVector(t_final=t_init, nodes=nodes)


def _initial_guesses(scenario: Scenario, cfg: TranscriptionConfig,
                     pts: QmcPointSet) -> list:
    """Deterministic list of cfg.n_starts decision vectors."""
    k = scenario.n_vehicles
    starts = scenario.starts

    # A standing start that already satisfies the risk constraint makes the
    # optimum a minimum-length closed loop; seed with one.
    q0 = risk_from_exposures(np.zeros((k, 1)), scenario.risk_mode)
    if q0 <= scenario.beta:
        loop_t = 2.0 * math.pi * scenario.vehicle.min_turn_radius() / scenario.vehicle.speed
        dv = DecisionVector(t_final=1.2 * loop_t,
                            nodes=np.full((k, cfg.n_nodes), 0.999 * cfg.d_max))
        return [dv] * cfg.n_starts

    from .risk import exposure_matrix
    from .sensor import annulus_far_range

    veh = scenario.vehicle
    w = effective_swath_halfwidth(scenario.sensor, veh)
    xmin, xmax, ymin, ymax = scenario.domain.bounds()
    height = ymax - ymin
    annulus = annulus_far_range(scenario.sensor)
    if not math.isfinite(annulus):
        annulus = w
    annulus = min(annulus, xmax - xmin)

    if height <= 2.1 * w:
        n_lo = 1
    else:
        n_lo = max(2, 1 + int(math.ceil((height - 2.0 * w) / (2.1 * w))))
    n_hi = max(n_lo + 1, 1 + int(math.ceil((height - 1.7 * w) / (1.7 * w))))

    def feature_and_loiter(n_rows, gap, overhang):
        # Every turn in the tour must span at least one rudder-node
        # window, or interpolated node values cannot reproduce it.
        n_chunk = max(1, -(-n_rows // k))
        length_est = (n_chunk * (xmax - xmin + 2.0 * overhang)
                      + (n_chunk - 1) * (gap + 100.0)
                      + math.hypot(xmax - xmin, height) + 500.0)
        window = length_est / veh.speed / (cfg.n_nodes - 1)
        radius = max(40.0, 0.75 * veh.speed * window)
        loiter = max(2.0 * veh.min_turn_radius(),
                     veh.speed * window / math.pi)
        return radius, loiter

    def build_paths(n_rows, edge, ov_f, spiral=False):
        rows = _row_layout(scenario, w, n_rows, edge)
        gap = rows[1] - rows[0] if n_rows > 1 else 2.0 * w
        overhang = ov_f * annulus
        radius, loiter = feature_and_loiter(n_rows, gap, overhang)
        if spiral:
            paths = [_spiral_path(scenario, w, gap, starts[0], radius)]
        else:
            chunks = np.array_split(np.asarray(rows), k)
            paths = [_serpentine_path(scenario,
                                      list(c) if len(c) else [rows[0]],
                                      gap, overhang, starts[n], radius)
                     for n, c in enumerate(chunks)]
        return paths, loiter

    def path_risk(paths):
        t_longest = max(p.length for p in paths) / veh.speed
        dt = max(cfg.risk_dt, t_longest / 600.0)
        trajs = [p.sample(veh.speed, dt, veh) for p in paths]
        E = exposure_matrix(trajs, pts.flat, scenario.sensor)
        return risk_from_exposures(E, scenario.risk_mode)

    # Shortest tour whose own track already clears the risk threshold
    # with margin; the transcription then only trims, not repairs.
    combos = []
    for n_rows in range(n_lo, n_hi + 1):
        for edge in (1.0, 0.85):
            if n_rows == 1 and edge != 1.0:
                continue
            rows = _row_layout(scenario, w, n_rows, edge)
            if n_rows > 1 and rows[1] - rows[0] > 2.05 * w:
                continue
            for ov_f in (1.0, 0.5, 0.25, 0.1, 0.0):
                combos.append((n_rows, edge, ov_f))
    spiral_combo = cfg.init_strategy is InitStrategy.SPIRAL and k == 1
    scored = []
    for n_rows, edge, ov_f in combos:
        paths, loiter = build_paths(n_rows, edge, ov_f)
        t_tour = max(p.length for p in paths) / veh.speed
        scored.append((t_tour, path_risk(paths), paths, loiter))
    if spiral_combo:
        paths, loiter = build_paths(n_lo, 1.0, 1.0, spiral=True)
        t_tour = max(p.length for p in paths) / veh.speed
        scored.append((t_tour, path_risk(paths), paths, loiter))
    scored.sort(key=lambda c: c[0])
    good = [i for i, c in enumerate(scored) if c[1] <= 0.7 * scenario.beta]
    if not good:
        good = [min(range(len(scored)), key=lambda i: scored[i][1])]
    ranked = [scored[i] for i in good]
    ranked += [c for i, c in enumerate(scored) if i not in set(good)]

    guesses = []
    for i in range(cfg.n_starts):
        if cfg.init_strategy is InitStrategy.RANDOM and i > 0 and guesses:
            rng = np.random.default_rng([scenario.qmc.seed, i])
            base = guesses[0]
            noise = rng.normal(0.0, 0.3 * cfg.d_max, size=base.nodes.shape)
            kernel = np.ones(3) / 3.0
            noise = np.apply_along_axis(
                lambda v: np.convolve(v, kernel, mode="same"), 1, noise)
            nodes = np.clip(base.nodes + noise,
                            -0.9 * cfg.d_max, 0.9 * cfg.d_max)
            guesses.append(DecisionVector(t_final=base.t_final, nodes=nodes))
            continue
        t_tour, _, paths, loiter = ranked[min(i, len(ranked) - 1)]
        guesses.append(_paths_to_guess(paths, starts, scenario, cfg, pts,
                                       loiter))
    return guesses


# --- augmented-Lagrangian driver -------------------------------------------

def _solve_one(scenario: Scenario, cfg: TranscriptionConfig,
               pts: QmcPointSet, dv0: DecisionVector, counter: list):
    tr = Transcription(scenario, cfg, pts, dv0.t_final)
    z = np.clip(tr.pack_z(dv0),
                [b[0] for b in tr.bounds()], [b[1] for b in tr.bounds()])
    lam_r = 0.0
    lam_e = np.zeros(2 * tr.k)
    rho = cfg.penalty_init
    best = None
    history = []
    prev_vmax = math.inf
    prev_best_t = math.inf

    for outer in range(cfg.max_outer):
        def fun(zz):
            counter[0] += 1
            fwd = tr.forward(tr.unpack_z(zz))
            m = tr.merit(fwd, lam_r, lam_e, rho)
            if cfg.gradient is GradientMode.ADJOINT:
                return m, tr.merit_grad(fwd, lam_r, lam_e, rho)
            g = np.empty_like(zz)
            for i in range(zz.size):
                h = 1.0e-6 * max(1.0, abs(zz[i]))
                zp = zz.copy(); zp[i] += h
                zm = zz.copy(); zm[i] -= h
                counter[0] += 2
                mp = tr.merit(tr.forward(tr.unpack_z(zp)), lam_r, lam_e, rho)
                mm = tr.merit(tr.forward(tr.unpack_z(zm)), lam_r, lam_e, rho)
                g[i] = (mp - mm) / (2.0 * h)
            return m, g

        res = minimize(fun, z, jac=True, method="L-BFGS-B", bounds=tr.bounds(),
                       options={"maxiter": cfg.max_inner, "maxcor": 20,
                                "ftol": 1e-13, "gtol": 1e-9})
        z = res.x
        fwd = tr.forward(tr.unpack_z(z))
        rep = tr.report(fwd)
        t_f = fwd["dv"].t_final
        vmax = max(rep.risk_violation / cfg.risk_tol,
                   float(np.max(rep.terminal_violations)) / cfg.pos_tol)
        feasible = (rep.risk_violation <= cfg.risk_tol
                    and float(np.max(rep.terminal_violations)) <= cfg.pos_tol)
        history.append({"outer": outer, "t_final": t_f, "risk": rep.risk,
                        "max_terminal_m": float(np.max(rep.terminal_violations)),
                        "feasible": bool(feasible), "rho": rho,
                        "inner_iterations": int(res.nit)})
        if feasible and (best is None or t_f < best[1]):
            best = (z.copy(), t_f, rep)
        if feasible and best is not None:
            if abs(prev_best_t - best[1]) <= 1.0e-3 * best[1]:
                break
            prev_best_t = best[1]
        g_r = rep.risk - scenario.beta
        lam_r = max(0.0, lam_r + rho * g_r)
        lam_e = lam_e + rho * fwd["e_sc"].ravel()
        if vmax > 0.25 * prev_vmax and rho < RHO_MAX:
            rho = min(rho * cfg.penalty_growth, RHO_MAX)
        prev_vmax = vmax
    if best is not None:
        z_best, t_best, rep_best = best
        return tr, z_best, rep_best, True, history
    return tr, z, rep, False, history


def solve(scenario: Scenario, cfg: TranscriptionConfig | None = None,
          pts: QmcPointSet | None = None) -> SolveResult:
    """Minimum-duration feasible survey for the scenario.

    Runs the augmented-Lagrangian transcription from each initial guess
    and keeps the best feasible incumbent.
    """
    cfg = cfg if cfg is not None else scenario.solver
    if pts is None:
        pts = generate_qmc_points(scenario.qmc, scenario.domain)
    counter = [0]
    outcome = None
    history_all = []
    for dv0 in _initial_guesses(scenario, cfg, pts):
        tr, z, rep, ok, hist = _solve_one(scenario, cfg, pts, dv0, counter)
        history_all.append(hist)
        t_f = z[0] * tr.t_ref
        cand = (tr, z, rep, ok, t_f)
        if outcome is None:
            outcome = cand
        else:
            _, _, rep0, ok0, t0 = outcome
            if (ok and not ok0) or (ok and ok0 and t_f < t0):
                outcome = cand
            elif not ok and not ok0:
                v_new = rep.risk_violation / cfg.risk_tol + float(
                    np.max(rep.terminal_violations)) / cfg.pos_tol
                v_old = rep0.risk_violation / cfg.risk_tol + float(
                    np.max(rep0.terminal_violations)) / cfg.pos_tol
                if v_new < v_old:
                    outcome = cand
    tr, z, rep, ok, t_f = outcome
    dv = tr.unpack_z(z)
    fwd = tr.forward(dv)
    trajs = tr._trajectories_from(fwd)
    schedules = [ControlSchedule(node_times=np.linspace(0.0, dv.t_final, cfg.n_nodes),
                                 rudder=dv.nodes[n]) for n in range(tr.k)]
    return SolveResult(
        t_final=dv.t_final,
        schedules=schedules,
        trajectories=trajs,
        risk=fwd["q"],
        risk_mode=scenario.risk_mode,
        report=tr.report(fwd),
        converged=ok,
        n_outer=sum(len(h) for h in history_all),
        n_evals=counter[0],
        history=history_all,
        qmc_metadata=dict(pts.metadata),
    )


def sweep_vehicles(scenario: Scenario, ks: list,
                   cfg: TranscriptionConfig | None = None) -> list:
    """Solve the scenario for each fleet size, shared start pose and
    identical qMC points throughout."""
    pts = generate_qmc_points(scenario.qmc, scenario.domain)
    out = []
    for k in ks:
        s_k = scenario.with_vehicles(int(k))
        out.append(solve(s_k, cfg=cfg, pts=pts))
    return out
