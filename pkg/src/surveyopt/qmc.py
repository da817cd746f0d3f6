"""Randomized quasi-Monte Carlo points for the target-location integral.

A rank-1 lattice rule in two dimensions with R independent random shifts:
point i of shift r is frac(i * z / N + u_r).  The generating vector uses a
golden-ratio second component adjusted to be odd and coprime with N, which
gives near-optimal two-dimensional equidistribution for the power-of-two
sizes used here.  Shifted replicates make the estimator unbiased and give
an internal error estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scenario import Domain, QmcConfig

_GOLDEN_FRAC = (math.sqrt(5.0) - 1.0) / 2.0


def _generating_vector(n: int) -> tuple[int, int]:
    z2 = int(round(n * _GOLDEN_FRAC))
    if z2 % 2 == 0:
        z2 += 1
    while math.gcd(z2, n) != 1:
        z2 += 2
    return 1, z2


@dataclass(frozen=True)
class QmcPointSet:
    """Randomized lattice points in the unit square and in the domain."""

    n_points: int
    n_shifts: int
    seed: int
    unit_points: np.ndarray      # (R, N, 2) in [0, 1)^2
    domain_points: np.ndarray    # (R, N, 2) in meters
    metadata: dict = field(default_factory=dict)

    @property
    def flat(self) -> np.ndarray:
        """All domain points as one (R*N, 2) array, shift-major order."""
        return self.domain_points.reshape(-1, 2)


def generate_qmc_points(cfg: QmcConfig, domain: Domain) -> QmcPointSet:
    """Deterministic function of (N, R, seed, domain)."""
    cfg.validate()
    n, r_shifts = cfg.n_points, cfg.n_shifts
    z1, z2 = _generating_vector(n)
    i = np.arange(n, dtype=float)
    base = np.empty((n, 2))
    base[:, 0] = (i * z1 / n) % 1.0
    base[:, 1] = (i * z2 / n) % 1.0
    rng = np.random.default_rng(cfg.seed)
    shifts = rng.random((r_shifts, 2))
    unit = (base[None, :, :] + shifts[:, None, :]) % 1.0
    dom = np.stack([domain.map_unit_square(unit[r]) for r in range(r_shifts)])
    meta = {
        "construction": "rank-1 lattice, random shifts",
        "generating_vector": [z1, z2],
        "n": n,
        "shifts": r_shifts,
        "seed": cfg.seed,
        "rng": "numpy default_rng",
    }
    return QmcPointSet(n_points=n, n_shifts=r_shifts, seed=cfg.seed,
                       unit_points=unit, domain_points=dom, metadata=meta)
