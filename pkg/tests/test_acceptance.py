"""Top-level acceptance suite.

One test per release criterion, each printing a single PASS/FAIL verdict
line to the real stdout so the run log carries the tally even under
output capture.  The heavyweight planning checks load their scenarios
from the files shipped in scenarios/.
"""

import dataclasses
import math
import time
from pathlib import Path

import numpy as np
import pytest
import yaml
from scipy.optimize import brentq

from conftest import make_scenario, rect_domain, reference_sensor, reference_vehicle
from surveyopt import (
    ControlSchedule,
    QmcConfig,
    RiskMode,
    Trajectory,
    TranscriptionConfig,
    VehicleState,
    detection_rate,
    generate_qmc_points,
    load_scenario,
    plan_boustrophedon,
    residual_risk,
    risk_oracle_grid,
    simulate,
    solve,
    sweep_vehicles,
)
from surveyopt.cli import EXIT_OK, main
from surveyopt.dynamics import analytic_turn_rate, path_length
from surveyopt.risk import exposure_matrix, risk_from_exposures
from surveyopt.sensor import (
    detection_probability,
    horizontal_gate,
    transmission_loss,
    vertical_gate,
)
from surveyopt.solver import DecisionVector, T_MIN, Transcription

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def _verdict(cap, num: int, label: str, ok: bool, t0: float) -> None:
    """Print one PASS/FAIL line on the real terminal, past fd capture."""
    state = "PASS" if ok else "FAIL"
    line = f"acceptance {num} ({label}): {state}  [{time.perf_counter() - t0:.1f}s]"
    with cap.disabled():
        print(line, flush=True)


def _random_trajectory(seed: int, duration: float, dt: float,
                       box=(1100.0, 1900.0)) -> Trajectory:
    """Deterministic wandering track that stays near the middle of the
    survey area for the given seed."""
    veh = reference_vehicle()
    rng = np.random.default_rng(seed)
    n_nodes = 16
    nodes = rng.uniform(-0.5, 0.5, n_nodes) * veh.max_rudder
    sched = ControlSchedule(node_times=np.linspace(0.0, duration, n_nodes),
                            rudder=nodes)
    start = VehicleState(x=rng.uniform(*box), y=rng.uniform(*box),
                         psi=rng.uniform(-math.pi, math.pi))
    return simulate(start, sched, dt, veh)


# -- 1: sensor unit suite ----------------------------------------------------

def test_1_sensor_suite(capfd):
    t0 = time.perf_counter()
    sp = reference_sensor()
    rng = np.random.default_rng(101)
    n = 100_000

    # Gate positivity over the range where float64 can resolve the
    # logistic shoulders; outside it the sums round to exactly 0 or 1.
    a_act = sp.half_fov_alpha + 34.0 / sp.p_alpha
    e_lo = sp.eps_de - sp.half_fov_eps - 34.0 / sp.p_eps
    e_hi = sp.eps_de + sp.half_fov_eps + 34.0 / sp.p_eps
    fa = horizontal_gate(rng.uniform(-a_act, a_act, n), sp)
    fe = vertical_gate(rng.uniform(e_lo, e_hi, n), sp)
    ok_gates = bool(np.all(fa > 0.0) and np.all(fa < 1.0)
                    and np.all(fe > 0.0) and np.all(fe < 1.0))

    # Rate strictly inside (0, scan_rate) wherever both gates resolve:
    # past the near dead zone in range, within the wide bearing shoulder.
    # 100 poses x 1000 targets apiece covers the full draw.
    n_pose, n_tgt = 100, n // 100
    ok_rate = True
    for i in range(n_pose):
        x, y = rng.uniform(-500.0, 500.0, 2)
        psi = rng.uniform(-math.pi, math.pi)
        r = rng.uniform(85.0, 3000.0, n_tgt)
        ang = psi + rng.uniform(-2.4, 2.4, n_tgt)
        tgt = np.stack([x + r * np.cos(ang), y + r * np.sin(ang)], axis=1)
        gam = detection_rate((x, y, psi), tgt, sp)
        if not (np.all(gam > 0.0) and np.all(gam < sp.scan_rate)):
            ok_rate = False
            break

    # Rigid motions leave the rate invariant.
    base_state = (12.0, -7.0, 0.6)
    base_pts = np.stack([12.0 + rng.uniform(-400, 400, 50),
                         -7.0 + rng.uniform(-400, 400, 50)], axis=1)
    g0 = detection_rate(base_state, base_pts, sp)
    worst = 0.0
    for _ in range(1000):
        phi = rng.uniform(-math.pi, math.pi)
        tx, ty = rng.uniform(-2000.0, 2000.0, 2)
        c, s = math.cos(phi), math.sin(phi)
        R = np.array([[c, -s], [s, c]])
        state2 = (c * base_state[0] - s * base_state[1] + tx,
                  s * base_state[0] + c * base_state[1] + ty,
                  base_state[2] + phi)
        pts2 = base_pts @ R.T + np.array([tx, ty])
        g2 = detection_rate(state2, pts2, sp)
        worst = max(worst, float(np.max(np.abs(g2 - g0))))
    ok_rigid = worst <= 1e-12

    # Half-power point: where the loss budget is exactly spent.
    r_half = brentq(lambda rr: transmission_loss(rr, sp) - sp.figure_of_merit,
                    10.0, 5000.0, xtol=1e-10)
    ok_half = abs(float(detection_probability(r_half, sp)) - 0.5) <= 1e-9

    elapsed_ok = time.perf_counter() - t0 < 5.0
    ok = ok_gates and ok_rate and ok_rigid and ok_half and elapsed_ok
    _verdict(capfd, 1, "sensor suite", ok, t0)
    assert ok_gates and ok_rate
    assert ok_rigid, f"worst rigid-motion deviation {worst:g}"
    assert ok_half and elapsed_ok


# -- 2: dynamics oracle ------------------------------------------------------

def test_2_dynamics_oracle(capfd):
    t0 = time.perf_counter()
    veh = reference_vehicle()
    d0 = veh.max_rudder
    sched = ControlSchedule(node_times=np.array([0.0, 10.0]),
                            rudder=np.array([d0, d0]))
    traj = simulate(VehicleState(0.0, 0.0, 0.0), sched, 0.01, veh)
    err = float(np.max(np.abs(traj.states[:, 3]
                              - analytic_turn_rate(traj.t, d0, veh))))
    ok_rate = err <= 1e-6

    d_small = math.radians(2.0)
    t_f = 300.0
    sched2 = ControlSchedule(node_times=np.array([0.0, t_f]),
                             rudder=np.array([d_small, d_small]))
    traj2 = simulate(VehicleState(0.0, 0.0, 0.0), sched2, 0.01, veh)
    rel = abs(path_length(traj2) - veh.speed * t_f) / (veh.speed * t_f)
    ok_len = rel <= 1e-6

    elapsed_ok = time.perf_counter() - t0 < 5.0
    ok = ok_rate and ok_len and elapsed_ok
    _verdict(capfd, 2, "turn-rate and arc-length oracle", ok, t0)
    assert ok_rate, f"max turn-rate error {err:g}"
    assert ok_len, f"arc length relative error {rel:g}"
    assert elapsed_ok


# -- 3: quadrature oracle ----------------------------------------------------

def test_3_quadrature_oracle(capfd):
    t0 = time.perf_counter()
    sp = reference_sensor()
    dom = rect_domain(500.0, 2500.0, 500.0, 2500.0)
    pts = generate_qmc_points(QmcConfig(n_points=4096, n_shifts=8, seed=2026),
                              dom)
    worst = 0.0
    for seed in (0, 1, 2):
        traj = _random_trajectory(seed, 300.0, 0.5)
        q_qmc = residual_risk([traj], pts, sp, RiskMode.PER_VEHICLE)
        q_ref = risk_oracle_grid([traj], 512, sp, RiskMode.PER_VEHICLE, dom)
        worst = max(worst, abs(q_qmc - q_ref) / q_ref)
    ok_acc = worst <= 1e-2
    elapsed_ok = time.perf_counter() - t0 < 120.0
    ok = ok_acc and elapsed_ok
    _verdict(capfd, 3, "lattice vs midpoint-grid risk", ok, t0)
    assert ok_acc, f"worst relative difference {worst:g}"
    assert elapsed_ok


# -- 4: risk properties ------------------------------------------------------

def test_4_risk_properties(capfd):
    t0 = time.perf_counter()
    sp = reference_sensor()
    dom = rect_domain()
    pts = generate_qmc_points(QmcConfig(n_points=1024, n_shifts=2, seed=42),
                              dom)

    # Zero mission time accumulates exactly zero exposure.
    ok_zero = (risk_from_exposures(np.zeros((1, 64)), RiskMode.PER_VEHICLE) == 1.0
               and risk_from_exposures(np.zeros((3, 64)), RiskMode.PER_VEHICLE) == 3.0)

    rng = np.random.default_rng(404)
    ok_mono = True
    for i in range(50):
        veh = reference_vehicle()
        n1 = 8
        t1 = float(rng.integers(120, 240))
        t2 = t1 + float(rng.integers(30, 120))
        times1 = np.linspace(0.0, t1, n1)
        vals1 = rng.uniform(-0.5, 0.5, n1) * veh.max_rudder
        extra_t = np.linspace(t1, t2, 4)[1:]
        extra_v = rng.uniform(-0.5, 0.5, 3) * veh.max_rudder
        start = VehicleState(rng.uniform(700, 1300), rng.uniform(700, 1300),
                             rng.uniform(-math.pi, math.pi))
        tr1 = simulate(start, ControlSchedule(times1, vals1), 0.5, veh)
        tr2 = simulate(start, ControlSchedule(np.concatenate([times1, extra_t]),
                                              np.concatenate([vals1, extra_v])),
                       0.5, veh)
        q1 = residual_risk([tr1], pts, sp, RiskMode.PER_VEHICLE)
        q2 = residual_risk([tr2], pts, sp, RiskMode.PER_VEHICLE)
        if q2 > q1 + 1e-10:
            ok_mono = False
            break

    ok_joint = True
    for i in range(20):
        trs = [_random_trajectory(600 + 2 * i + j, 200.0, 0.5,
                                  box=(800.0, 1200.0)) for j in range(2)]
        E = exposure_matrix(trs, pts.flat, sp)
        joint = risk_from_exposures(E, RiskMode.JOINT)
        singles = [risk_from_exposures(E[j:j + 1], RiskMode.JOINT)
                   for j in range(2)]
        if not all(joint <= s_j + 1e-12 for s_j in singles):
            ok_joint = False
            break

    elapsed_ok = time.perf_counter() - t0 < 60.0
    ok = ok_zero and ok_mono and ok_joint and elapsed_ok
    _verdict(capfd, 4, "risk limits, monotonicity, pooling", ok, t0)
    assert ok_zero and ok_mono and ok_joint and elapsed_ok


# -- 5: merit gradient vs central differences --------------------------------

def test_5_gradient_check(capfd):
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(20):
        rng = np.random.default_rng(500 + i)
        sc = make_scenario(
            beta=float(rng.uniform(0.02, 0.4)),
            qmc=QmcConfig(n_points=256, n_shifts=2, seed=int(rng.integers(1, 1 << 30))),
            solver=TranscriptionConfig(n_nodes=8, sim_dt=0.5, risk_dt=8.0,
                                       max_outer=2, max_inner=10),
            starts=[[float(rng.uniform(700, 1300)),
                     float(rng.uniform(700, 1300)),
                     float(rng.uniform(-math.pi, math.pi))]])
        pts = generate_qmc_points(sc.qmc, sc.domain)
        t_f = float(rng.uniform(250.0, 700.0))
        dv = DecisionVector(t_final=t_f,
                            nodes=rng.uniform(-0.7, 0.7, (1, 8)) * sc.solver.d_max)
        tr = Transcription(sc, sc.solver, pts, t_f)
        z = tr.pack_z(dv)
        lam_r = float(rng.uniform(0.0, 1.0))
        lam_e = rng.normal(size=2)
        rho = float(rng.uniform(5.0, 200.0))
        g = tr.merit_grad(tr.forward(tr.unpack_z(z)), lam_r, lam_e, rho)
        g_fd = np.empty_like(g)
        h = 1e-6
        for j in range(z.size):
            zp = z.copy(); zp[j] += h
            zm = z.copy(); zm[j] -= h
            mp = tr.merit(tr.forward(tr.unpack_z(zp)), lam_r, lam_e, rho)
            mm = tr.merit(tr.forward(tr.unpack_z(zm)), lam_r, lam_e, rho)
            g_fd[j] = (mp - mm) / (2.0 * h)
        rel = float(np.linalg.norm(g - g_fd) / max(np.linalg.norm(g_fd), 1e-12))
        worst = max(worst, rel)
    ok_grad = worst <= 1e-4
    elapsed_ok = time.perf_counter() - t0 < 120.0
    ok = ok_grad and elapsed_ok
    _verdict(capfd, 5, "adjoint vs central differences", ok, t0)
    assert ok_grad, f"worst gradient relative error {worst:g}"
    assert elapsed_ok


# -- 6: planner beats the lawnmower at scale ---------------------------------

def test_6_comparison_ordering(capfd):
    t0 = time.perf_counter()
    s = load_scenario(SCENARIO_DIR / "acceptance.yaml")
    pts = generate_qmc_points(s.qmc, s.domain)
    plan = plan_boustrophedon(s, pts)
    res = solve(s, pts=pts)

    tol = s.beta + 1e-3
    ok_order = res.t_final < plan.path_time
    ok_feas = plan.risk <= tol and res.risk <= tol and res.converged
    arcs = plan.turn_arcs()
    ok_turns = len(arcs) > 0
    for arc in arcs:
        ts = np.linspace(0.0, 1.0, 33)
        ang = arc.a0 + arc.sweep * ts
        px = arc.center[0] + arc.radius * np.cos(ang)
        py = arc.center[1] + arc.radius * np.sin(ang)
        if np.any(s.domain.contains(np.stack([px, py], axis=1))):
            ok_turns = False
            break
    end_b = plan.trajectory.end_position()
    closure_b = float(np.hypot(*(end_b - s.starts[0, :2])))
    closure_o = float(np.max(res.report.terminal_violations))
    ok_close = closure_b <= 0.5 and closure_o <= 0.5
    speedup = plan.path_time / res.t_final
    ok_speed = speedup >= 1.1
    elapsed_ok = time.perf_counter() - t0 < 1800.0
    ok = ok_order and ok_feas and ok_turns and ok_close and ok_speed and elapsed_ok
    _verdict(capfd, 6, f"ordering, speedup {speedup:.2f}", ok, t0)
    assert ok_order and ok_feas, (
        f"T_F {res.t_final:.1f} vs lawnmower {plan.path_time:.1f}, "
        f"risks {res.risk:.4f}/{plan.risk:.4f}")
    assert ok_turns, "a turn arc intersects the survey area"
    assert ok_close, f"closures {closure_o:.3f} / {closure_b:.3f} m"
    assert ok_speed, f"speedup {speedup:.3f}"
    assert elapsed_ok


# -- 7: fleet-size sweep trend -----------------------------------------------

def test_7_vehicle_sweep_trend(capfd):
    t0 = time.perf_counter()
    s = load_scenario(SCENARIO_DIR / "sweep_small.yaml")
    results = sweep_vehicles(s, [1, 2, 3])
    tf = [r.t_final for r in results]
    ok_conv = all(r.converged for r in results)
    ok_mono = tf[0] >= tf[1] - 1e-9 and tf[1] >= tf[2] - 1e-9
    allowance = 0.02 * tf[0]
    ok_dim = (tf[0] - tf[1]) >= (tf[1] - tf[2]) - allowance
    elapsed_ok = time.perf_counter() - t0 < 3600.0
    ok = ok_conv and ok_mono and ok_dim and elapsed_ok
    _verdict(capfd, 7, f"fleet sweep {tf[0]:.0f}/{tf[1]:.0f}/{tf[2]:.0f}s", ok, t0)
    assert ok_conv, [r.converged for r in results]
    assert ok_mono and ok_dim, f"durations {tf}, allowance {allowance:.1f}"
    assert elapsed_ok


# -- 8: determinism and evaluation round trip --------------------------------

def test_8_determinism_round_trip(tmp_path, capfd):
    t0 = time.perf_counter()
    scenario = {
        "domain": {"vertices": [[500.0, 500.0], [1500.0, 500.0],
                                [1500.0, 1500.0], [500.0, 1500.0]]},
        "sensor": {"scan_rate_hz": 20.0, "figure_of_merit_db": 72.0,
                   "attenuation_db_per_km": 5.2, "spread_db": 9.0,
                   "horizontal_fov_deg": 120.0, "vertical_fov_deg": 5.0,
                   "elevation_deg": -6.0, "slope_horizontal": 25.0,
                   "slope_vertical": 400.0, "height_m": 20.0},
        "vehicle": {"speed_mps": 2.5, "nomoto_gain_hz": 5.0,
                    "nomoto_time_s": 0.5, "max_rudder_deg": 35.0},
        "mission": {"vehicles": 1, "risk_threshold": 0.5,
                    "risk_mode": "per-vehicle",
                    "starts": [[510.0, 510.0, 45.0]]},
        "qmc": {"points": 256, "shifts": 2, "seed": 77},
        "solver": {"nodes": 10, "sim_dt_s": 1.0, "risk_dt_s": 20.0,
                   "max_outer": 2, "max_inner": 12},
    }
    spath = tmp_path / "scenario.yaml"
    with open(spath, "w") as fh:
        yaml.safe_dump(scenario, fh)
    out1, out2, out3 = (tmp_path / d for d in ("a", "b", "c"))
    assert main(["plan", "--scenario", str(spath), "--out", str(out1),
                 "--grid", "32"]) == EXIT_OK
    assert main(["plan", "--scenario", str(spath), "--out", str(out2),
                 "--grid", "32"]) == EXIT_OK
    same_traj = ((out1 / "trajectories.csv").read_bytes()
                 == (out2 / "trajectories.csv").read_bytes())
    s1 = yaml.safe_load(open(out1 / "summary.yaml"))
    s2 = yaml.safe_load(open(out2 / "summary.yaml"))
    ok_risk = s1["risk"] == s2["risk"]
    assert main(["evaluate", "--scenario", str(spath),
                 "--trajectories", str(out1 / "trajectories.csv"),
                 "--out", str(out3), "--grid", "32"]) == EXIT_OK
    ev = yaml.safe_load(open(out3 / "evaluation.yaml"))
    ok_round = abs(ev["risk"] - s1["risk"]) <= 1e-10
    elapsed_ok = time.perf_counter() - t0 < 60.0
    ok = same_traj and ok_risk and ok_round and elapsed_ok
    _verdict(capfd, 8, "byte-identical reruns, evaluation round trip", ok, t0)
    assert same_traj and ok_risk
    assert ok_round, f"round-trip gap {abs(ev['risk'] - s1['risk']):g}"
    assert elapsed_ok


# -- 9: vacuous threshold sanity ---------------------------------------------

def test_9_degenerate_threshold(capfd):
    t0 = time.perf_counter()
    s = load_scenario(SCENARIO_DIR / "acceptance.yaml")
    s = dataclasses.replace(s, beta=1.0)
    res = solve(s)
    disp = float(np.max(res.report.terminal_violations))
    ok_floor = res.t_final <= 1.5 * T_MIN
    ok_viol = (res.report.risk_violation == 0.0
               and disp <= s.solver.pos_tol and res.converged)
    elapsed_ok = time.perf_counter() - t0 < 60.0
    ok = ok_floor and ok_viol and elapsed_ok
    _verdict(capfd, 9, "vacuous threshold collapses to the floor", ok, t0)
    assert ok_floor, f"T_F {res.t_final:g}"
    assert ok_viol, (res.report.risk_violation, disp, res.converged)
    assert elapsed_ok
