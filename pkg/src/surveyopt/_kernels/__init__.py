"""Evaluation kernel backend selection.

Prefers the compiled extension and falls back to the numpy reference
implementation when it is unavailable.  SURVEYOPT_KERNELS=compiled|fallback
forces a backend; "compiled" raises if the extension failed to build.
"""

import os

import numpy as np

from . import fallback as _fb

_choice = os.environ.get("SURVEYOPT_KERNELS", "auto")
if _choice not in ("auto", "compiled", "fallback"):
    raise RuntimeError(f"SURVEYOPT_KERNELS must be auto, compiled or fallback, got {_choice!r}")

_impl = None
if _choice in ("auto", "compiled"):
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _choice == "compiled":
            raise
        _impl = None

backend_name = "compiled" if _impl is not None else "fallback"


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def exposure_forward(states, pts, sp, dt):
    if _impl is None:
        return _fb.exposure_forward(states, pts, sp, dt)
    return _impl.exposure_forward(_c(states), _c(pts), _c(sp), float(dt))


def exposure_backward(states, pts, sp, dt, wE):
    if _impl is None:
        return _fb.exposure_backward(states, pts, sp, dt, wE)
    return _impl.exposure_backward(_c(states), _c(pts), _c(sp), float(dt), _c(wE))


def simulate_rk4(y0, d_half, t_final, n, V, K, Tn):
    if _impl is None:
        return _fb.simulate_rk4(y0, d_half, t_final, n, V, K, Tn)
    return _impl.simulate_rk4(_c(y0), _c(d_half), float(t_final), int(n),
                              float(V), float(K), float(Tn))


def rk4_adjoint(states, d_half, t_final, n, V, K, Tn, lam_in):
    if _impl is None:
        return _fb.rk4_adjoint(states, d_half, t_final, n, V, K, Tn, lam_in)
    return _impl.rk4_adjoint(_c(states), _c(d_half), float(t_final), int(n),
                             float(V), float(K), float(Tn), _c(lam_in))
