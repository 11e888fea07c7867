"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with ``pytest -s tests/test_acceptance.py`` to see the per-criterion
lines including measured runtimes against their budgets.
"""
import math
import time

import numpy as np
import pytest

from tdsim import micro, ode
from tdsim.analysis import (
    classify,
    convergence_experiment,
    fixed_point_branch,
    polar_rates,
    rotation_matrix,
    scan,
    symmetric_spectrum,
    z_system,
)
from tdsim.cli import main as cli_main
from tdsim.cli import read_dataset
from tdsim.model import LoopSpec, jacobian, vector_field

SQRT3 = math.sqrt(3.0)


def _finish(num, name, started, budget, failures):
    elapsed = time.perf_counter() - started
    if elapsed >= budget:
        failures.append(f"runtime {elapsed:.1f}s exceeded budget {budget:.0f}s")
    verdict = "PASS" if not failures else "FAIL"
    print(f"criterion {num} [{verdict}] {name} ({elapsed:.1f}s / {budget:.0f}s budget)",
          flush=True)
    assert not failures, f"criterion {num}: " + "; ".join(failures)


def test_criterion_1_eigenvalue_formulas():
    started = time.perf_counter()
    failures = []
    worst = 0.0
    for J in range(-3, 4):
        for d10 in range(11):
            delta = d10 / 10.0
            eig = symmetric_spectrum(float(J), delta).eigenvalues
            spec = LoopSpec.with_half_j(float(J), delta, N=1)
            numeric = list(np.linalg.eigvals(jacobian(spec, np.full(3, 0.5))))
            for z in eig:
                gaps = [abs(z - w) for w in numeric]
                j = int(np.argmin(gaps))
                worst = max(worst, gaps[j])
                numeric.pop(j)
    if worst > 1e-8:
        failures.append(f"closed form vs numeric spectrum gap {worst:.3e} > 1e-8")
    _finish(1, "eigenvalue formulas on the (J, delta) grid", started, 1.0, failures)


def test_criterion_2_pitchfork():
    started = time.perf_counter()
    failures = []
    grid = [round(-1.10 + 0.01 * i, 10) for i in range(21)]
    records = scan(grid, delta=0.2)
    bistable = [r.J for r in records if r.classification == "bistable"]
    non_bistable = [r.J for r in records if r.classification != "bistable"]
    if not (-1.01 <= max(bistable) <= -1.0):
        failures.append(f"bistable branch ends at {max(bistable)} not within one step of -1")
    if min(non_bistable) > max(bistable) + 0.0201:
        failures.append("stable and bistable regimes separated by more than two steps")
    roots = fixed_point_branch(-math.log(3.0))
    points = sorted(0.5 + y for y in roots)
    if abs(points[0] - 0.25) > 1e-9 or abs(points[2] - 0.75) > 1e-9:
        failures.append(f"branch points at J=-ln3 are {points}, expected 0.25/0.75 to 1e-9")
    _finish(2, "pitchfork at J=-1 and branch values", started, 10.0, failures)


def test_criterion_3_hopf():
    started = time.perf_counter()
    failures = []
    grid = [round(1.95 + 0.01 * i, 10) for i in range(11)]
    records = scan(grid, delta=0.0)
    onset = min(r.J for r in records if r.classification == "oscillatory")
    if not (2.0 <= onset <= 2.01):
        failures.append(f"oscillation onset at J={onset}, outside [2.00, 2.01]")
    spec = LoopSpec.with_half_j(J=1.9, delta=0.0, N=10)
    traj = ode.integrate(spec, np.array([0.55, 0.5, 0.45]), 200.0)
    gap = float(np.abs(traj.final_state - 0.5).max())
    if gap >= 1e-6:
        failures.append(f"J=1.9 endpoint distance {gap:.2e} >= 1e-6")
    rec = classify(2.1, 0.0)
    if rec.amplitude <= 0.05:
        failures.append(f"J=2.1 amplitude {rec.amplitude:.4f} <= 0.05")
    _finish(3, "Hopf at J=2 (onset, decay below, oscillation above)", started, 30.0,
            failures)


def test_criterion_4_bifurcation_dataset(tmp_path):
    started = time.perf_counter()
    failures = []
    out = tmp_path / "diagram.csv"
    code = cli_main(["bifurcate", "--grid=-2:3:0.05", "--delta", "0",
                     "--out", str(out)])
    if code != 0:
        failures.append(f"cmd_bifurcate exited {code}")
    config, columns, rows = read_dataset(str(out))
    tag = {row[0]: row[2] for row in rows}
    fp_mid = columns.index("fp_mid")
    fp_low = columns.index("fp_low")
    fp_high = columns.index("fp_high")
    o_min = columns.index("orbit_min_A")
    o_max = columns.index("orbit_max_A")
    # single stable branch on the open window (-1, 2)
    for row in rows:
        J = row[0]
        if -0.999 < J < 1.999:
            if row[2] != "stable-point" or abs(row[fp_mid] - 0.5) > 1e-12:
                failures.append(f"window point J={J} not a single stable branch")
                break
    # symmetric bistable pair below -1 satisfying the branch relation
    for row in rows:
        if row[0] <= -1.05:
            if row[2] != "bistable":
                failures.append(f"J={row[0]} expected bistable, got {row[2]}")
                break
            y = row[fp_high] - 0.5
            residual = abs(math.sinh(2 * row[0] * y) + 2 * y * math.cosh(2 * row[0] * y))
            if residual > 1e-9:
                failures.append(f"branch residual {residual:.2e} > 1e-9 at J={row[0]}")
                break
            if abs((row[fp_high] - 0.5) + (row[fp_low] - 0.5)) > 1e-9:
                failures.append(f"asymmetric pair at J={row[0]}")
                break
    # growing orbit above 2
    for row in rows:
        if row[0] >= 2.05 and row[2] != "oscillatory":
            failures.append(f"J={row[0]} expected oscillatory, got {row[2]}")
            break
    amp = {row[0]: row[o_max] - row[o_min] for row in rows if row[2] == "oscillatory"}
    if not amp[2.1] < amp[2.3] < amp[2.5]:
        failures.append(
            f"amplitudes not increasing: {amp[2.1]:.3f}, {amp[2.3]:.3f}, {amp[2.5]:.3f}"
        )
    _finish(4, "bifurcation diagram dataset over J in [-2, 3]", started, 120.0,
            failures)


def test_criterion_5_convergence():
    started = time.perf_counter()
    failures = []
    base = LoopSpec(J=1.0, delta=0.3, kappa=(0.5,) * 3, N=100)
    result = convergence_experiment(
        base, [100, 1000, 10000], (0.8, 0.2, 0.5), 5.0, replicas=200, seed=20240601
    )
    medians = result.medians()
    if not (medians[0] > medians[1] > medians[2]):
        failures.append(f"medians not strictly decreasing: {medians}")
    if medians[2] >= 0.05:
        failures.append(f"median at N=10000 is {medians[2]:.4f} >= 0.05")
    if not (-0.65 <= result.slope <= -0.35):
        failures.append(f"log-log slope {result.slope:.3f} outside [-0.65, -0.35]")
    _finish(5, "path convergence to the deterministic limit", started, 300.0,
            failures)


def test_criterion_6_micro_macro_equivalence():
    started = time.perf_counter()
    failures = []
    rng = np.random.default_rng(606)
    worst = 0.0
    for trial in range(20):
        N = int(rng.integers(1, 5))
        spec = LoopSpec(
            J=float(rng.uniform(-2.5, 2.5)),
            delta=float(rng.uniform(0, 1)),
            kappa=tuple(rng.uniform(-1, 1, 3)),
            N=N,
        )
        gap = float(
            np.abs(
                micro.lumped_density_generator(spec) - micro.density_generator(spec)
            ).max()
        )
        worst = max(worst, gap)
    if worst > 1e-12:
        failures.append(f"lumped vs density generator gap {worst:.3e} > 1e-12")
    _finish(6, "micro-macro generator equivalence (20 random specs)", started, 30.0,
            failures)


def test_criterion_7_non_reversibility():
    started = time.perf_counter()
    failures = []
    balanced = LoopSpec(J=0.0, delta=0.5, kappa=(0.0,) * 3, N=2)
    r0 = micro.reversibility_residual(balanced)
    if r0 > 1e-12:
        failures.append(f"residual {r0:.3e} > 1e-12 at J=0")
    directed = LoopSpec(J=2.0, delta=0.0, kappa=(1.0,) * 3, N=1)
    r1 = micro.reversibility_residual(directed)
    if r1 <= 1e-6:
        failures.append(f"residual {r1:.3e} <= 1e-6 for the directed cycle")
    _finish(7, "non-reversibility by exact enumeration", started, 1.0, failures)


def test_criterion_8_linearization_geometry():
    started = time.perf_counter()
    failures = []
    r = rotation_matrix()
    ortho = float(np.abs(r.T @ r - np.eye(3)).max())
    if ortho > 1e-14:
        failures.append(f"R^T R deviates from identity by {ortho:.2e} > 1e-14")
    worst = 0.0
    for J in np.arange(-3.0, 3.01, 0.5):
        for delta in np.arange(0.0, 1.01, 0.25):
            spec = LoopSpec.with_half_j(float(J), float(delta), N=1)
            numeric = r.T @ jacobian(spec, np.full(3, 0.5)) @ r
            worst = max(worst, float(np.abs(numeric - z_system(float(J), float(delta))).max()))
    if worst > 1e-10:
        failures.append(f"rotated linearization gap {worst:.3e} > 1e-10")
    for delta in (0.0, 0.3):
        a = z_system(2.0, delta)
        traj = ode.integrate_linear(a, np.array([0.6, -0.3, 0.2]), 10.0)
        r2 = traj.states[:, 0] ** 2 + traj.states[:, 1] ** 2
        drift = float(np.abs(r2 - r2[0]).max() / r2[0])
        if drift > 1e-6:
            failures.append(f"radius drift {drift:.3e} > 1e-6 at delta={delta}")
    if not (polar_rates(2.0, 0.2)[1] > 0 > polar_rates(2.0, 0.8)[1]):
        failures.append("angular rate does not flip sign across delta=1/2")
    _finish(8, "rotated-frame geometry and conservation at J=2", started, 5.0,
            failures)


def test_criterion_9_jacobian_oracle():
    started = time.perf_counter()
    failures = []
    rng = np.random.default_rng(909)
    h = 1e-6
    worst = 0.0
    for _ in range(50):
        spec = LoopSpec(
            J=float(rng.uniform(-3, 3)),
            delta=float(rng.uniform(0, 1)),
            kappa=tuple(rng.uniform(-1, 1, 3)),
            N=10,
        )
        x = rng.uniform(0.05, 0.95, 3)
        jac = jacobian(spec, x)
        fd = np.empty((3, 3))
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            fd[:, j] = (vector_field(spec, x + e) - vector_field(spec, x - e)) / (2 * h)
        worst = max(worst, float(np.abs(jac - fd).max()))
    if worst > 1e-6:
        failures.append(f"jacobian vs finite differences gap {worst:.3e} > 1e-6")
    _finish(9, "jacobian against the finite-difference oracle", started, 1.0,
            failures)
