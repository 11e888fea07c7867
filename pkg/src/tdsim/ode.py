"""Deterministic integration of the fluid-limit system and small linear systems.

Two integrators are provided: a fixed-step classic Runge-Kutta 4 and an
adaptive embedded Dormand-Prince 5(4) pair.  Both record the accepted nodes
together with the field values there, so trajectories support cubic-Hermite
dense output (used for orbit-extrema detection and fine reference sampling).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import LoopSpec, field_closure
from .trajectory import Trajectory

__all__ = [
    "IntegratorSettings",
    "IntegrationError",
    "StepSizeUnderflow",
    "NonFiniteState",
    "integrate",
    "integrate_linear",
    "BURN_IN_TIME",
    "OBSERVATION_TIME",
]

# Horizon conventions for asymptotic classification: transient burn-in and
# observation window, fixed once (slowest relevant decay near the
# bifurcation points behaves like 1/|J - J_c| at the scan resolutions used).
BURN_IN_TIME = 200.0
OBSERVATION_TIME = 100.0


class IntegrationError(RuntimeError):
    pass


class StepSizeUnderflow(IntegrationError):
    def __init__(self, t: float):
        super().__init__(f"adaptive step size underflow at t={t!r}")
        self.t = t


class NonFiniteState(IntegrationError):
    def __init__(self, t: float):
        super().__init__(f"state became non-finite at t={t!r}")
        self.t = t


@dataclass(frozen=True)
class IntegratorSettings:
    """Method selection and tolerances.

    method "rk4" is fixed-step with size ``step``; "rk45" is the adaptive
    pair controlled by ``rtol``/``atol``.  When ``sample_dt`` is set the
    output trajectory is resampled on that uniform grid through the Hermite
    interpolant (endpoints always included); otherwise the accepted nodes
    are returned.
    """

    method: str = "rk45"
    step: float = 1e-3
    rtol: float = 1e-8
    atol: float = 1e-10
    sample_dt: float | None = None

    def __post_init__(self):
        if self.method not in ("rk4", "rk45"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.step <= 0 or self.rtol <= 0 or self.atol <= 0:
            raise ValueError("step, rtol and atol must be positive")
        if self.sample_dt is not None and self.sample_dt <= 0:
            raise ValueError("sample_dt must be positive")


# Dormand-Prince 5(4) error-estimate coefficients (b5 - b4).
_DP_ERR = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def _rk4_path(f, y0, t_end, h):
    ts = [0.0]
    ys = [y0]
    fs = [f(y0)]
    t = 0.0
    y = y0
    # A diverging solution overflows before being reported as NonFiniteState;
    # the warning would only duplicate that error.
    with np.errstate(over="ignore", invalid="ignore"):
        while t < t_end - 1e-15:
            step = min(h, t_end - t)
            k1 = f(y)
            k2 = f(y + 0.5 * step * k1)
            k3 = f(y + 0.5 * step * k2)
            k4 = f(y + step * k3)
            y = y + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t = t + step
            if not np.all(np.isfinite(y)):
                raise NonFiniteState(t)
            ts.append(t)
            ys.append(y)
            fs.append(f(y))
    return np.array(ts), np.array(ys), np.array(fs)


def _rk45_path(f, y0, t_end, rtol, atol):
    ts = [0.0]
    ys = [y0]
    k1 = f(y0)
    fs = [k1]
    t = 0.0
    y = y0
    h = min(1e-2, t_end) if t_end > 0 else 0.0
    e1, e3, e4, e5, e6, e7 = (
        _DP_ERR[0], _DP_ERR[2], _DP_ERR[3], _DP_ERR[4], _DP_ERR[5], _DP_ERR[6],
    )
    # Trial steps may blow up; they are rejected below, so silence the
    # overflow/invalid warnings instead of spamming callers.
    with np.errstate(over="ignore", invalid="ignore"):
        while t < t_end - 1e-15:
            h = min(h, t_end - t)
            if h < 16 * np.finfo(float).eps * max(1.0, abs(t)):
                raise StepSizeUnderflow(t)
            k2 = f(y + h * (0.2 * k1))
            k3 = f(y + h * (0.075 * k1 + 0.225 * k2))
            k4 = f(y + h * ((44 / 45) * k1 - (56 / 15) * k2 + (32 / 9) * k3))
            k5 = f(y + h * ((19372 / 6561) * k1 - (25360 / 2187) * k2
                            + (64448 / 6561) * k3 - (212 / 729) * k4))
            k6 = f(y + h * ((9017 / 3168) * k1 - (355 / 33) * k2 + (46732 / 5247) * k3
                            + (49 / 176) * k4 - (5103 / 18656) * k5))
            y_new = y + h * ((35 / 384) * k1 + (500 / 1113) * k3 + (125 / 192) * k4
                             - (2187 / 6784) * k5 + (11 / 84) * k6)
            k7 = f(y_new)
            err_vec = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.max(np.abs(err_vec) / scale))
            if not np.isfinite(err) or not np.all(np.isfinite(y_new)):
                # Treat a blown-up trial step as maximally inaccurate: shrink.
                if not np.all(np.isfinite(y)):
                    raise NonFiniteState(t)
                h *= 0.2
                continue
            if err <= 1.0:
                t = t + h
                y = y_new
                k1 = k7  # first-same-as-last
                ts.append(t)
                ys.append(y)
                fs.append(k1)
            factor = 0.9 * (err ** -0.2) if err > 0 else 5.0
            h *= min(5.0, max(0.2, factor))
    return np.array(ts), np.array(ys), np.array(fs)


def _integrate_field(f, y0, t_end, settings, meta):
    y0 = np.asarray(y0, dtype=float)
    if not math.isfinite(t_end) or t_end < 0:
        raise ValueError(f"t_end must be finite and non-negative, got {t_end!r}")
    if t_end == 0:
        traj = Trajectory(
            np.array([0.0]), y0[None, :], kind="deterministic",
            meta=meta, derivs=np.asarray(f(y0))[None, :],
        )
        return traj
    if settings.method == "rk4":
        ts, ys, fs = _rk4_path(f, y0, t_end, settings.step)
    else:
        ts, ys, fs = _rk45_path(f, y0, t_end, settings.rtol, settings.atol)
    traj = Trajectory(ts, ys, kind="deterministic", meta=meta, derivs=fs)
    if settings.sample_dt is not None:
        grid = np.arange(0.0, t_end, settings.sample_dt)
        if grid[-1] < t_end:
            grid = np.append(grid, t_end)
        sampled = traj.hermite_at(grid)
        traj = Trajectory(
            grid, sampled, kind="deterministic", meta=meta,
            derivs=np.array([f(s) for s in sampled]),
        )
    return traj


def integrate(
    spec: LoopSpec,
    x0,
    t_end: float,
    settings: IntegratorSettings | None = None,
) -> Trajectory:
    """Solve dx/dt = F(x) for the loop's vector field from x0 on [0, t_end].

    For this field the box [0, 1]^k is invariant (F_i >= 0 at x_i = 0 and
    F_i <= 0 at x_i = 1), so solutions stay inside up to integrator error.
    """
    settings = settings or IntegratorSettings()
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.k,):
        raise ValueError(f"x0 must have length k={spec.k}")
    if np.any(x0 < 0) or np.any(x0 > 1):
        raise ValueError("x0 must lie in [0, 1]^k")
    meta = {"spec": spec, "settings": settings, "t_end": float(t_end)}
    return _integrate_field(field_closure(spec), x0, t_end, settings, meta)


def integrate_linear(
    A,
    z0,
    t_end: float,
    settings: IntegratorSettings | None = None,
) -> Trajectory:
    """Solve dz/dt = A z with the same integrators."""
    settings = settings or IntegratorSettings()
    A = np.asarray(A, dtype=float)
    z0 = np.asarray(z0, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != len(z0):
        raise ValueError("A must be square and match z0 in dimension")
    if not np.all(np.isfinite(A)) or not np.all(np.isfinite(z0)):
        raise ValueError("A and z0 must be finite")
    meta = {"A": A, "settings": settings, "t_end": float(t_end)}
    return _integrate_field(lambda y: A @ y, z0, t_end, settings, meta)
