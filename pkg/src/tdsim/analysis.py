"""Spectral and bifurcation analysis of the three-type cycle with kappa = J/2.

At that field the symmetric point (1/2, 1/2, 1/2) is a fixed point for all
(J, delta).  Its Jacobian is the circulant

    -2 [[1, (1-delta) J, delta J],
        [delta J, 1, (1-delta) J],
        [(1-delta) J, delta J, 1]]

with spectrum {-2(J+1), (J-2) +/- sqrt(3) J (1-2 delta) i}: the real
eigenvalue crosses zero at J = -1 (pitchfork onto the diagonal, stable pair
from :func:`fixed_point_branch`) and the complex pair crosses at J = 2
(Hopf, oscillations for delta != 1/2).  The module also carries the
orthonormal rotation that maps the diagonal to the third axis, in which the
linearization block-diagonalizes and the planar dynamics reduces to the
polar rates (J - 2, -sqrt(3) J (2 delta - 1)).
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import jump, ode
from .model import DensityState, LoopSpec, jacobian
from .trajectory import Trajectory

__all__ = [
    "Spectrum",
    "BifurcationRecord",
    "ConvergenceRow",
    "ConvergenceResult",
    "symmetric_spectrum",
    "fixed_point_branch",
    "classify",
    "scan",
    "rotation_matrix",
    "z_system",
    "polar_rates",
    "convergence_experiment",
    "orbit_extrema",
]

EIGENVALUE_EPS = 1e-9
AMPLITUDE_EPS = 1e-3
# Off-diagonal start used for asymptotic orbit runs; any generic point works.
_ORBIT_X0 = (0.55, 0.5, 0.45)

CLASSIFICATIONS = ("stable-point", "bistable", "oscillatory", "degenerate")


@dataclass(frozen=True)
class Spectrum:
    """Three eigenvalues ordered by (real part, imaginary part) descending."""

    eigenvalues: tuple[complex, complex, complex]

    def __post_init__(self):
        vals = tuple(sorted(self.eigenvalues, key=lambda z: (-z.real, -z.imag)))
        object.__setattr__(self, "eigenvalues", vals)

    @property
    def real_parts(self) -> tuple[float, float, float]:
        return tuple(z.real for z in self.eigenvalues)


@dataclass(frozen=True)
class BifurcationRecord:
    """Classification of the flow at one (J, delta) point.

    ``fixed_points`` lists the diagonal fixed points (stable and unstable);
    ``orbit_min``/``orbit_max`` hold per-coordinate extrema of the
    asymptotic orbit for oscillatory records and are None otherwise.
    """

    J: float
    delta: float
    spectrum: Spectrum
    classification: str
    fixed_points: tuple[tuple[float, ...], ...]
    orbit_min: tuple[float, ...] | None = None
    orbit_max: tuple[float, ...] | None = None

    @property
    def amplitude(self) -> float | None:
        """Peak-to-peak amplitude of the first coordinate, if oscillatory."""
        if self.orbit_min is None or self.orbit_max is None:
            return None
        return self.orbit_max[0] - self.orbit_min[0]


def _closed_form_eigenvalues(J: float, delta: float) -> tuple[complex, complex, complex]:
    lam1 = complex(-2.0 * (J + 1.0), 0.0)
    re = J - 2.0
    im = math.sqrt(3.0) * J * (1.0 - 2.0 * delta)
    return lam1, complex(re, im), complex(re, -im)


def _match_distance(closed, numeric) -> float:
    """Greedy nearest matching between two eigenvalue triples."""
    numeric = list(numeric)
    worst = 0.0
    for z in closed:
        gaps = [abs(z - w) for w in numeric]
        j = int(np.argmin(gaps))
        worst = max(worst, gaps[j])
        numeric.pop(j)
    return worst


def symmetric_spectrum(J: float, delta: float) -> Spectrum:
    """Closed-form spectrum at (1/2, 1/2, 1/2) with kappa = J/2, k = 3.

    The closed form is cross-checked against the numerically diagonalized
    Jacobian to 1e-8 on every call.
    """
    closed = _closed_form_eigenvalues(J, delta)
    spec = LoopSpec.with_half_j(J=J, delta=delta, N=1)
    numeric = np.linalg.eigvals(jacobian(spec, np.full(3, 0.5)))
    gap = _match_distance(closed, numeric)
    if gap > 1e-8:
        raise AssertionError(
            f"closed-form spectrum deviates from the Jacobian by {gap:.3e} at J={J}, delta={delta}"
        )
    return Spectrum(closed)


def _branch_function(J: float, y: float) -> float:
    # tanh(2Jy) + 2y has the same roots as sinh(2Jy) + 2y cosh(2Jy) and
    # never overflows.
    return math.tanh(2.0 * J * y) + 2.0 * y


def fixed_point_branch(J: float, tol: float = 1e-12) -> list[float]:
    """Diagonal fixed-point offsets: roots y of sinh(2Jy) + 2y cosh(2Jy) = 0.

    Returns {-y*, 0, +y*} for J < -1 and {0} otherwise; the positive root is
    found by bisection on (0, 1/2) exploiting oddness.  Offsets map to
    densities through x = 1/2 + y.
    """
    if not math.isfinite(J):
        raise ValueError("J must be finite")
    if J >= -1.0:
        return [0.0]
    lo = 1e-8
    if _branch_function(J, lo) >= 0.0:
        # Root indistinguishable from zero: J is within float noise of -1.
        return [0.0]
    hi = 0.5
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _branch_function(J, mid) < 0.0:
            lo = mid
        else:
            hi = mid
    y = 0.5 * (lo + hi)
    return [-y, 0.0, y]


def orbit_extrema(traj: Trajectory, t_start: float, t_end: float):
    """Per-coordinate min/max of a dense trajectory over [t_start, t_end].

    Candidate extrema are the window ends plus the interior zeros of the
    Hermite interpolant's derivative (a quadratic on each step interval), so
    the result does not depend on the accepted step sizes.
    """
    if traj.derivs is None:
        raise ValueError("orbit extrema need a trajectory with node derivatives")
    ts = traj.times
    ncoord = traj.states.shape[1]
    candidates = [np.array([t_start, t_end])]
    lo = np.searchsorted(ts, t_start, side="right") - 1
    hi = np.searchsorted(ts, t_end, side="left")
    for seg in range(max(lo, 0), min(hi, len(ts) - 1)):
        t0, t1 = ts[seg], ts[seg + 1]
        h = t1 - t0
        y0 = traj.states[seg]
        y1 = traj.states[seg + 1]
        f0 = traj.derivs[seg] * h
        f1 = traj.derivs[seg + 1] * h
        # Hermite cubic in s on [0,1]: derivative is quadratic a s^2 + b s + c.
        for c_i in range(ncoord):
            a = 6 * y0[c_i] - 6 * y1[c_i] + 3 * f0[c_i] + 3 * f1[c_i]
            b = -6 * y0[c_i] + 6 * y1[c_i] - 4 * f0[c_i] - 2 * f1[c_i]
            c = f0[c_i]
            roots = []
            if abs(a) > 1e-300:
                disc = b * b - 4 * a * c
                if disc >= 0:
                    sq = math.sqrt(disc)
                    roots = [(-b - sq) / (2 * a), (-b + sq) / (2 * a)]
            elif abs(b) > 1e-300:
                roots = [-c / b]
            ok = [t0 + s * h for s in roots if 0.0 < s < 1.0]
            ok = [t for t in ok if t_start <= t <= t_end]
            if ok:
                candidates.append(np.asarray(ok))
    all_t = np.concatenate(candidates)
    vals = traj.hermite_at(all_t)
    return vals.min(axis=0), vals.max(axis=0)


def classify(
    J: float,
    delta: float,
    settings: ode.IntegratorSettings | None = None,
) -> BifurcationRecord:
    """Classify the flow at (J, delta) from the closed-form spectrum.

    Rules (eps = 1e-9 on real parts): all negative -> stable-point; real
    eigenvalue positive (J < -1) -> bistable with the diagonal pair from
    :func:`fixed_point_branch`; complex-pair real part positive with
    nonzero rotation (J > 2, delta != 1/2) -> oscillatory, with orbit
    extrema measured after the burn-in window; anything on the margin
    (including delta = 1/2 beyond the Hopf point) -> degenerate.
    """
    if not (0.0 <= delta <= 1.0):
        raise ValueError("delta must lie in [0, 1]")
    spectrum = symmetric_spectrum(J, delta)
    lam1 = -2.0 * (J + 1.0)
    pair_re = J - 2.0
    pair_im = math.sqrt(3.0) * J * (1.0 - 2.0 * delta)
    eps = EIGENVALUE_EPS
    symmetric = (0.5, 0.5, 0.5)

    if lam1 < -eps and pair_re < -eps:
        return BifurcationRecord(J, delta, spectrum, "stable-point", (symmetric,))
    if lam1 > eps:
        ys = fixed_point_branch(J)
        points = tuple(tuple(0.5 + y for _ in range(3)) for y in ys)
        return BifurcationRecord(J, delta, spectrum, "bistable", points)
    if pair_re > eps and pair_im != 0.0:
        spec = LoopSpec.with_half_j(J=J, delta=delta, N=1)
        settings = settings or ode.IntegratorSettings()
        horizon = ode.BURN_IN_TIME + ode.OBSERVATION_TIME
        traj = ode.integrate(spec, np.array(_ORBIT_X0), horizon, settings)
        omin, omax = orbit_extrema(traj, ode.BURN_IN_TIME, horizon)
        if float(np.max(omax - omin)) <= AMPLITUDE_EPS:
            raise RuntimeError(
                f"eigenvalues report oscillation at J={J}, delta={delta} but the "
                f"orbit amplitude stayed below {AMPLITUDE_EPS}"
            )
        return BifurcationRecord(
            J, delta, spectrum, "oscillatory", (symmetric,),
            orbit_min=tuple(float(v) for v in omin),
            orbit_max=tuple(float(v) for v in omax),
        )
    return BifurcationRecord(J, delta, spectrum, "degenerate", (symmetric,))


def scan(J_grid, delta: float, settings=None) -> list[BifurcationRecord]:
    """Classify every J in the grid at fixed delta (the diagram dataset)."""
    return [classify(float(J), delta, settings) for J in J_grid]


def rotation_matrix() -> np.ndarray:
    """Orthonormal frame with the cycle diagonal as third axis.

    Columns are (1, 1, -2)/sqrt(6), (-1, 1, 0)/sqrt(2) and the unit
    diagonal; determinant +1.  Coordinates transform as z = R^T y.
    """
    s6 = math.sqrt(6.0)
    s2 = math.sqrt(2.0)
    s3 = math.sqrt(3.0)
    return np.array(
        [
            [1 / s6, -1 / s2, 1 / s3],
            [1 / s6, 1 / s2, 1 / s3],
            [-2 / s6, 0.0, 1 / s3],
        ]
    )


def _z_closed_form(J: float, delta: float) -> np.ndarray:
    w = math.sqrt(3.0) * J * (2.0 * delta - 1.0)
    return np.array(
        [
            [J - 2.0, w, 0.0],
            [-w, J - 2.0, 0.0],
            [0.0, 0.0, -(2.0 * J + 2.0)],
        ]
    )


def z_system(J: float, delta: float) -> np.ndarray:
    """Linearization at the symmetric point in the rotated frame.

    Computes R^T (dF at the fixed point) R, checks it against the closed
    form [[J-2, sqrt(3)J(2d-1), 0], [-sqrt(3)J(2d-1), J-2, 0],
    [0, 0, -(2J+2)]] to 1e-10, and returns the closed form.
    """
    spec = LoopSpec.with_half_j(J=J, delta=delta, N=1)
    r = rotation_matrix()
    numeric = r.T @ jacobian(spec, np.full(3, 0.5)) @ r
    closed = _z_closed_form(J, delta)
    gap = float(np.max(np.abs(numeric - closed)))
    if gap > 1e-10:
        raise AssertionError(
            f"rotated linearization deviates from closed form by {gap:.3e}"
        )
    return closed


def polar_rates(J: float, delta: float) -> tuple[float, float]:
    """(radial, angular) rates of the planar linearization in polar form.

    dr/dt = r (J - 2) and dtheta/dt = -sqrt(3) J (2 delta - 1); at J = 2 the
    radius is conserved and the rotation direction flips across delta = 1/2.
    """
    return J - 2.0, -math.sqrt(3.0) * J * (2.0 * delta - 1.0)


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    median: float
    q25: float
    q75: float


@dataclass(frozen=True)
class ConvergenceResult:
    """Sup-distance statistics per reservoir size, plus the log-log slope."""

    rows: tuple[ConvergenceRow, ...]
    slope: float | None

    def medians(self) -> list[float]:
        return [r.median for r in self.rows]


def _replica_sup(args) -> float:
    spec, x0, t, run_seed, ref_times, ref_states = args
    ref = Trajectory(ref_times, ref_states, kind="deterministic")
    traj = jump.ssa_simulate(spec, x0, t, seed=run_seed, thinning=1)
    return jump.sup_distance(traj, ref, t)


def convergence_experiment(
    base: LoopSpec,
    N_values,
    x0,
    t: float,
    replicas: int,
    seed: int,
    *,
    rtol: float = 1e-8,
    workers: int | None = None,
) -> ConvergenceResult:
    """Measure how fast stochastic paths approach the deterministic one.

    For each reservoir size N, ``replicas`` independent paths start from the
    grid point nearest x0 and their sup-distance to the rtol-accurate ODE
    solution on [0, t] is summarized by median and quartiles.  Medians must
    decrease strictly in N (raises otherwise).  Replica seeds derive from
    (seed, N index, replica index); ``workers`` > 1 runs replicas in a
    process pool (capped by the TDSIM_THREADS environment variable),
    ordered deterministically either way.
    """
    if replicas < 0:
        raise ValueError("replicas must be non-negative")
    x0 = np.asarray(x0, dtype=float)
    N_values = [int(v) for v in N_values]
    if replicas == 0 or len(N_values) == 0:
        return ConvergenceResult(rows=(), slope=None)
    settings = ode.IntegratorSettings(method="rk45", rtol=rtol, atol=1e-10, sample_dt=1e-3)
    reference = ode.integrate(replace(base, N=max(N_values)), x0, t, settings)
    if workers is None:
        workers = int(os.environ.get("TDSIM_THREADS", "1"))
    rows = []
    for p, N in enumerate(N_values):
        spec = replace(base, N=int(N))
        grid_x0 = DensityState.from_counts(
            [int(round(v * N)) for v in x0], int(N)
        )
        tasks = [
            (spec, grid_x0, t, jump.derive_seed(seed, p, r), reference.times, reference.states)
            for r in range(replicas)
        ]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                sups = list(pool.map(_replica_sup, tasks, chunksize=8))
        else:
            sups = [_replica_sup(task) for task in tasks]
        q25, med, q75 = np.percentile(sups, [25, 50, 75])
        rows.append(ConvergenceRow(N=int(N), median=float(med), q25=float(q25), q75=float(q75)))
    medians = [r.median for r in rows]
    for prev, cur in zip(medians, medians[1:]):
        if not cur < prev:
            raise RuntimeError(
                f"median sup-distance failed to decrease: {medians} for N={N_values}"
            )
    slope = None
    if len(rows) >= 2:
        logn = np.log([r.N for r in rows])
        logm = np.log(medians)
        slope = float(np.polyfit(logn, logm, 1)[0])
    return ConvergenceResult(rows=tuple(rows), slope=slope)
