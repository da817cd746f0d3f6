"""Residual-risk evaluation.

The miss probability of a target at omega under a trajectory is
exp(-E(omega)) with E the time integral of the detection rate along the
path.  The residual risk of a mission is the domain average of the miss
probability, taken either per vehicle and summed (per-vehicle mode) or under
the pooled exposure of all vehicles (joint mode).  The two coincide for a
single vehicle.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .dynamics import Trajectory
from .qmc import QmcPointSet
from .scenario import Domain, RiskMode
from .sensor import SensorParams


def exposure(traj: Trajectory, omega, sp: SensorParams) -> np.ndarray:
    """Integrated detection rate (trapezoid rule) for each target point."""
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    return _kernels.exposure_forward(traj.states, omega, sp.pack(), traj.dt)


def exposure_matrix(trajs: list[Trajectory], pts: np.ndarray,
                    sp: SensorParams) -> np.ndarray:
    """Per-vehicle exposures, shape (k, M)."""
    pack = sp.pack()
    return np.stack([
        _kernels.exposure_forward(tr.states, pts, pack, tr.dt) for tr in trajs
    ])


def risk_from_exposures(E: np.ndarray, mode: RiskMode) -> float:
    """Average miss probability given per-vehicle exposures (k, M)."""
    if mode is RiskMode.JOINT:
        return float(np.mean(np.exp(-E.sum(axis=0))))
    return float(np.sum(np.mean(np.exp(-E), axis=1)))


def residual_risk(trajs: list[Trajectory], pts: QmcPointSet,
                  sp: SensorParams, mode: RiskMode) -> float:
    """Randomized-qMC estimate of the residual risk.

    Equal-sized shifts make the shift average equal to the pooled mean, so
    the estimate is computed over all R*N points at once.
    """
    E = exposure_matrix(trajs, pts.flat, sp)
    return risk_from_exposures(E, mode)


def shift_estimates(trajs: list[Trajectory], pts: QmcPointSet,
                    sp: SensorParams, mode: RiskMode) -> np.ndarray:
    """Per-shift risk estimates, for internal error assessment."""
    E = exposure_matrix(trajs, pts.flat, sp)
    E = E.reshape(E.shape[0], pts.n_shifts, pts.n_points)
    if mode is RiskMode.JOINT:
        return np.mean(np.exp(-E.sum(axis=0)), axis=1)
    return np.sum(np.mean(np.exp(-E), axis=2), axis=0)


# --- dense-grid oracle ------------------------------------------------------

def _clip_area(cell, domain: Domain) -> float:
    """Area of an axis-aligned cell clipped to the convex quad
    (Sutherland-Hodgman)."""
    poly = list(cell)
    v = domain.vertices
    for i in range(4):
        a, b = v[i], v[(i + 1) % 4]
        ex, ey = b[0] - a[0], b[1] - a[1]
        out = []
        m = len(poly)
        if m == 0:
            return 0.0
        for j in range(m):
            p, q = poly[j], poly[(j + 1) % m]
            # Inside test: left of the CCW edge.
            sp_ = ex * (p[1] - a[1]) - ey * (p[0] - a[0])
            sq = ex * (q[1] - a[1]) - ey * (q[0] - a[0])
            if sp_ >= 0.0:
                out.append(p)
            if (sp_ > 0.0) != (sq > 0.0) and sp_ != sq:
                t = sp_ / (sp_ - sq)
                out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
        poly = out
    if len(poly) < 3:
        return 0.0
    arr = np.asarray(poly)
    x, y = arr[:, 0], arr[:, 1]
    return 0.5 * abs(float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)))


def _grid_centers(domain: Domain, resolution: int):
    xmin, xmax, ymin, ymax = domain.bounds()
    hx = (xmax - xmin) / resolution
    hy = (ymax - ymin) / resolution
    cx = xmin + (np.arange(resolution) + 0.5) * hx
    cy = ymin + (np.arange(resolution) + 0.5) * hy
    gx, gy = np.meshgrid(cx, cy, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()]), hx, hy


def risk_oracle_grid(trajs: list[Trajectory], resolution: int,
                     sp: SensorParams, mode: RiskMode,
                     domain: Domain) -> float:
    """Deterministic midpoint-rule reference for the residual risk.

    Cells of a resolution^2 grid over the domain bounding box are weighted
    by their area inside the quad; fully outside cells drop out.  Used to
    validate the qMC estimator, not in the optimization loop.
    """
    centers, hx, hy = _grid_centers(domain, resolution)
    cell_area = hx * hy
    inside = domain.contains(centers)
    weights = np.where(inside, cell_area, 0.0)
    # Cells straddling the boundary get their clipped area; with an
    # axis-aligned rectangular domain the grid tiles it exactly and this
    # loop is empty.
    if not domain.is_axis_rectangle():
        half = np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]])
        scale = np.array([hx, hy])
        for idx in range(centers.shape[0]):
            cell = centers[idx] + half * scale
            weights[idx] = _clip_area(cell, domain)
    active = weights > 0.0
    E = exposure_matrix(trajs, centers[active], sp)
    w = weights[active]
    w = w / w.sum()
    if mode is RiskMode.JOINT:
        return float(np.dot(w, np.exp(-E.sum(axis=0))))
    return float(np.sum(np.exp(-E) @ w))


# --- coverage grid ----------------------------------------------------------

COVERAGE_COLUMNS = ("cell_x_m", "cell_y_m", "exposure", "seen", "valid")


def coverage_grid(trajs: list[Trajectory], nx: int, ny: int,
                  sp: SensorParams, domain: Domain,
                  seen_threshold: float = 0.9):
    """Pooled exposure sampled on cell centers of an nx-by-ny grid.

    Returns (centers, exposure, seen, valid); a cell is seen when the
    pooled detection probability at its center reaches the threshold.
    """
    if not 0.0 < seen_threshold < 1.0:
        raise ValueError("seen threshold must lie in (0, 1)")
    xmin, xmax, ymin, ymax = domain.bounds()
    cx = xmin + (np.arange(nx) + 0.5) * (xmax - xmin) / nx
    cy = ymin + (np.arange(ny) + 0.5) * (ymax - ymin) / ny
    gx, gy = np.meshgrid(cx, cy, indexing="ij")
    centers = np.column_stack([gx.ravel(), gy.ravel()])
    E = exposure_matrix(trajs, centers, sp).sum(axis=0)
    e_min = -math.log(1.0 - seen_threshold)
    seen = E >= e_min
    valid = domain.contains(centers)
    return centers, E, seen, valid


def write_coverage(path, centers, E, seen, valid) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(COVERAGE_COLUMNS) + "\n")
        for i in range(centers.shape[0]):
            fh.write(f"{float(centers[i, 0])!r},{float(centers[i, 1])!r},"
                     f"{float(E[i])!r},{int(seen[i]):d},{int(valid[i]):d}\n")
