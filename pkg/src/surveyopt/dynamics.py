"""Vehicle kinematics: constant surge speed with first-order Nomoto steering.

State is (x, y, psi, r) with psi the heading [rad] and r the turn rate
[rad/s].  The heading is integrated unwrapped; wrap only for display.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .scenario import VehicleParams


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    psi: float
    r: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.psi, self.r])


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-linear rudder command on strictly increasing node times."""

    node_times: np.ndarray    # [s], starting at 0
    rudder: np.ndarray        # [rad], same length

    def __post_init__(self):
        t = np.asarray(self.node_times, dtype=float)
        d = np.asarray(self.rudder, dtype=float)
        if t.ndim != 1 or t.shape != d.shape or t.size < 2:
            raise ValueError("schedule needs matching node_times and rudder, length >= 2")
        if t[0] != 0.0:
            raise ValueError("schedule must start at t = 0")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("schedule node times must be strictly increasing")
        object.__setattr__(self, "node_times", t)
        object.__setattr__(self, "rudder", d)

    @property
    def duration(self) -> float:
        return float(self.node_times[-1])

    def sample(self, t) -> np.ndarray:
        return np.interp(t, self.node_times, self.rudder)


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled state history of one vehicle."""

    t: np.ndarray            # (m+1,), t[0] = 0, uniform spacing
    states: np.ndarray       # (m+1, 4)
    rudder: np.ndarray       # (m+1,) rudder at the sample times

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        s = np.asarray(self.states, dtype=float)
        d = np.asarray(self.rudder, dtype=float)
        if s.ndim != 2 or s.shape[1] != 4 or s.shape[0] != t.size or d.size != t.size:
            raise ValueError("inconsistent trajectory arrays")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "rudder", d)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0

    @property
    def duration(self) -> float:
        return float(self.t[-1])

    def end_position(self) -> np.ndarray:
        return self.states[-1, :2].copy()


def state_derivative(state, rudder: float, p: VehicleParams) -> np.ndarray:
    """Right-hand side of the kinematic model at one state."""
    _, _, psi, r = state
    return np.array([
        p.speed * math.cos(psi),
        p.speed * math.sin(psi),
        r,
        (p.nomoto_gain * rudder - r) / p.nomoto_time,
    ])


def rk4_step(state, rudder_fn, t: float, dt: float, p: VehicleParams) -> np.ndarray:
    """One classic RK4 step; rudder_fn(t) supplies the command."""
    y = np.asarray(state, dtype=float)
    d_half = np.array([rudder_fn(t), rudder_fn(t + 0.5 * dt), rudder_fn(t + dt)],
                      dtype=float)
    out = _kernels.simulate_rk4(y, d_half, dt, 1, p.speed, p.nomoto_gain,
                                p.nomoto_time)
    return out[1]


def simulate(start: VehicleState, schedule: ControlSchedule, dt: float,
             p: VehicleParams) -> Trajectory:
    """Integrate the schedule from the start pose at fixed step dt.

    dt must divide the schedule duration to within rounding.
    """
    t_final = schedule.duration
    n = int(round(t_final / dt))
    if n < 1 or abs(n * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ValueError("dt must divide the schedule duration")
    t_half = np.linspace(0.0, t_final, 2 * n + 1)
    d_half = schedule.sample(t_half)
    states = _kernels.simulate_rk4(start.as_array(), d_half, t_final, n,
                                   p.speed, p.nomoto_gain, p.nomoto_time)
    return Trajectory(t=t_half[::2], states=states, rudder=d_half[::2])


def analytic_turn_rate(t, d0: float, p: VehicleParams):
    """Turn-rate response to a rudder step d0 from rest:
    r(t) = K d0 (1 - exp(-t/T))."""
    t = np.asarray(t, dtype=float)
    return p.nomoto_gain * d0 * (1.0 - np.exp(-t / p.nomoto_time))


def path_length(traj: Trajectory) -> float:
    """Chordal arc length of the sampled path."""
    d = np.diff(traj.states[:, :2], axis=0)
    return float(np.sum(np.hypot(d[:, 0], d[:, 1])))


# --- trajectory tables ------------------------------------------------------

TRAJECTORY_COLUMNS = ("vehicle_id", "t_s", "x_m", "y_m", "psi_rad",
                      "r_rad_s", "rudder_rad")


def write_trajectories(path, trajs: list[Trajectory]) -> None:
    """Write vehicle trajectories as one CSV table, full float precision."""
    with open(path, "w") as fh:
        fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for vid, tr in enumerate(trajs):
            for i in range(tr.t.size):
                # repr of builtin float is the shortest exact round trip.
                x, y, psi, r = (float(v) for v in tr.states[i])
                fh.write(f"{vid:d},{float(tr.t[i])!r},{x!r},{y!r},{psi!r},"
                         f"{r!r},{float(tr.rudder[i])!r}\n")


def read_trajectories(path) -> list[Trajectory]:
    """Inverse of write_trajectories; requires uniform sampling per vehicle."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.shape == ():
        data = data.reshape(1)
    for col in TRAJECTORY_COLUMNS:
        if col not in (data.dtype.names or ()):
            raise ValueError(f"trajectory table missing column '{col}'")
    trajs = []
    ids = np.unique(data["vehicle_id"]).astype(int)
    for vid in ids:
        rows = data[data["vehicle_id"] == vid]
        t = np.asarray(rows["t_s"], dtype=float)
        if t.size >= 3:
            steps = np.diff(t)
            if np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, t[-1]):
                raise ValueError(f"vehicle {vid} samples are not uniform")
        states = np.column_stack([rows["x_m"], rows["y_m"], rows["psi_rad"],
                                  rows["r_rad_s"]])
        trajs.append(Trajectory(t=t, states=states,
                                rudder=np.asarray(rows["rudder_rad"], dtype=float)))
    return trajs
