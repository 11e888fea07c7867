"""Exact jump-process sampler and the path-distance metric."""
import math

import numpy as np
import pytest

from tdsim import ode
from tdsim.jump import default_thinning, ssa_simulate, sup_distance
from tdsim.model import (
    DensityState,
    JumpDirection,
    LoopSpec,
    jump_rate,
    vector_field,
)
from tdsim.trajectory import Trajectory


def birth_death_stationary_mean(N):
    """Mean density of the single-type chain with rates up=(N-n), down=n.

    Detailed balance gives pi(n) ~ C(N, n); the mean is exactly 1/2, but we
    compute it by the recursion to keep the oracle independent.
    """
    w = [1.0]
    for n in range(N):
        w.append(w[-1] * (N - n) / (n + 1))
    total = sum(w)
    return sum(n * wn for n, wn in enumerate(w)) / (N * total)


class TestSsaSimulate:
    def test_zero_horizon(self):
        spec = LoopSpec.with_half_j(J=1.0, delta=0.2, N=10)
        x0 = DensityState.from_counts((5, 5, 5), 10)
        traj = ssa_simulate(spec, x0, 0.0, seed=1)
        assert len(traj) == 1
        assert traj.times[0] == 0.0
        assert traj.states[0] == pytest.approx([0.5, 0.5, 0.5])

    def test_initial_total_rate(self):
        # At the symmetric point of the half-J field every channel has
        # beta = 1/2, so the process leaves at rate 6 * N/2.
        spec = LoopSpec.with_half_j(J=2.0, delta=1.0, N=100)
        x0 = DensityState((0.5, 0.5, 0.5), grid=100)
        total = sum(
            spec.N * jump_rate(spec, x0, d) for d in JumpDirection.all_directions(3)
        )
        assert total == 300.0

    def test_seed_determinism_bytewise(self):
        spec = LoopSpec(J=1.0, delta=0.4, kappa=(0.3,) * 3, N=50)
        x0 = DensityState.from_counts((10, 25, 40), 50)
        a = ssa_simulate(spec, x0, 3.0, seed=123)
        b = ssa_simulate(spec, x0, 3.0, seed=123)
        assert a.times.tobytes() == b.times.tobytes()
        assert a.states.tobytes() == b.states.tobytes()
        c = ssa_simulate(spec, x0, 3.0, seed=124)
        assert not np.array_equal(a.times, c.times)

    def test_generic_k_path_matches_contract(self):
        spec = LoopSpec(J=0.8, delta=0.6, kappa=(0.1,) * 4, N=30, k=4)
        x0 = DensityState.from_counts((10, 15, 20, 25), 30)
        traj = ssa_simulate(spec, x0, 2.0, seed=3)
        counts = traj.states * spec.N
        assert np.abs(counts - np.round(counts)).max() < 1e-9

    def test_raw_jumps_single_coordinate(self):
        spec = LoopSpec.with_half_j(J=1.5, delta=0.7, N=40)
        x0 = DensityState.from_counts((20, 20, 20), 40)
        traj = ssa_simulate(spec, x0, 2.0, seed=8, thinning=1)
        steps = np.diff(traj.states, axis=0)
        interior = steps[:-1] if traj.times[-1] == traj.meta["t_end"] else steps
        nonzero_per_jump = (np.abs(interior) > 1e-12).sum(axis=1)
        assert np.all(nonzero_per_jump == 1)
        magnitudes = np.abs(interior).max(axis=1)
        assert magnitudes == pytest.approx(np.full(len(interior), 1 / 40), abs=1e-12)

    def test_grid_closure(self):
        spec = LoopSpec(J=-1.2, delta=0.1, kappa=(0.0,) * 3, N=25)
        x0 = DensityState.from_counts((5, 20, 12), 25)
        traj = ssa_simulate(spec, x0, 4.0, seed=21)
        assert np.all(traj.states >= 0) and np.all(traj.states <= 1)
        counts = traj.states * spec.N
        assert np.abs(counts - np.round(counts)).max() < 1e-9

    def test_default_thinning_bounds_memory(self):
        assert default_thinning(500) == 1
        assert default_thinning(1000) == 1
        assert default_thinning(10000) == 100
        spec = LoopSpec(J=1.0, delta=0.3, kappa=(0.5,) * 3, N=2000)
        x0 = DensityState.from_counts((1000,) * 3, 2000)
        traj = ssa_simulate(spec, x0, 1.0, seed=4)
        assert traj.meta["thinning"] == 20
        assert len(traj) <= traj.meta["events"] / 20 + 3

    def test_stationary_mean_of_decoupled_chain(self):
        # J = 0, kappa = 0: each coordinate is an independent birth-death
        # chain whose stationary mean the oracle computes exactly.
        oracle = birth_death_stationary_mean(50)
        assert oracle == pytest.approx(0.5, abs=1e-12)
        spec = LoopSpec(J=0.0, delta=0.0, kappa=(0.0,) * 3, N=1000)
        x0 = DensityState.from_counts((500,) * 3, 1000)
        traj = ssa_simulate(spec, x0, 100.0, seed=2024, thinning=1)
        times = traj.times
        states = traj.states
        mask = times >= 10.0
        # time-weighted average over [10, 100]
        t_sel = np.concatenate(([10.0], times[mask]))
        holds = np.diff(np.concatenate((t_sel, [100.0])))
        idx = np.searchsorted(times, t_sel, side="right") - 1
        avg = (states[idx] * holds[:, None]).sum(axis=0) / 90.0
        assert np.all(avg > 0.48) and np.all(avg < 0.52)

    def test_mean_drift_matches_vector_field(self):
        # Mean increment per unit time over many short replicas ~ F(x0)
        # within three standard errors (small-h bias kept well below).
        spec = LoopSpec(J=0.5, delta=0.3, kappa=(0.25,) * 3, N=500)
        x0_counts = (150, 300, 250)
        x0 = DensityState.from_counts(x0_counts, 500)
        f = vector_field(spec, x0.as_array())
        h = 0.002
        reps = 20000
        increments = np.empty((reps, 3))
        for r in range(reps):
            traj = ssa_simulate(spec, x0, h, seed=9000 + r)
            increments[r] = (traj.final_state - x0.as_array()) / h
        mean = increments.mean(axis=0)
        se = increments.std(axis=0, ddof=1) / math.sqrt(reps)
        assert np.all(np.abs(mean - f) <= 3 * se + 1e-9)

    def test_invalid_inputs(self):
        spec = LoopSpec.with_half_j(J=1.0, delta=0.5, N=10)
        x0 = DensityState.from_counts((5, 5, 5), 10)
        with pytest.raises(ValueError):
            ssa_simulate(spec, x0, float("inf"), seed=0)
        with pytest.raises(ValueError):
            ssa_simulate(spec, x0, 1.0, seed=0, thinning=0)
        with pytest.raises(ValueError):
            ssa_simulate(spec, DensityState.from_counts((5, 5), 10), 1.0, seed=0)


class TestSupDistance:
    def test_identical_paths(self):
        spec = LoopSpec.with_half_j(J=1.0, delta=0.4, N=20)
        x0 = DensityState.from_counts((10, 10, 10), 20)
        traj = ssa_simulate(spec, x0, 2.0, seed=5)
        assert sup_distance(traj, traj, 2.0) == 0.0

    def test_constant_shift(self):
        spec = LoopSpec.with_half_j(J=1.0, delta=0.4, N=20)
        x0 = DensityState.from_counts((8, 10, 12), 20)
        a = ssa_simulate(spec, x0, 2.0, seed=6)
        shifted = Trajectory(
            a.times, np.clip(a.states + 0.013, 0, 1.2), kind="stochastic"
        )
        assert sup_distance(a, shifted, 2.0) == pytest.approx(0.013, abs=1e-12)

    def test_step_vs_interpolated(self):
        # One step at t=1 against the straight line through the endpoints:
        # both one-sided limits at the jump sit 0.25 away from the line.
        step = Trajectory(
            np.array([0.0, 1.0, 2.0]),
            np.array([[0.0, 0, 0], [0.5, 0, 0], [0.5, 0, 0]]),
            kind="stochastic",
        )
        line = Trajectory(
            np.array([0.0, 2.0]),
            np.array([[0.0, 0, 0], [0.5, 0, 0]]),
            kind="deterministic",
        )
        d = sup_distance(step, line, 2.0)
        assert d == pytest.approx(0.25, abs=1e-12)

    def test_insufficient_coverage(self):
        spec = LoopSpec.with_half_j(J=1.0, delta=0.4, N=20)
        x0 = DensityState.from_counts((10, 10, 10), 20)
        a = ssa_simulate(spec, x0, 1.0, seed=7)
        b = ssa_simulate(spec, x0, 3.0, seed=7)
        with pytest.raises(ValueError):
            sup_distance(a, b, 2.0)

    def test_ssa_close_to_ode_at_large_N(self):
        spec = LoopSpec(J=1.0, delta=0.3, kappa=(0.5,) * 3, N=10000)
        x0 = DensityState.from_counts((8000, 2000, 5000), 10000)
        ref = ode.integrate(
            spec, x0.as_array(), 5.0, ode.IntegratorSettings(sample_dt=1e-3)
        )
        hits = 0
        seeds = 20
        for s in range(seeds):
            traj = ssa_simulate(spec, x0, 5.0, seed=s)
            if sup_distance(traj, ref, 5.0) < 0.05:
                hits += 1
        assert hits >= 0.95 * seeds
