"""Spin-level machinery on small systems: energies, exact generators, checks.

Sites live on a k x N lattice (type, position) with spins in {-1, +1}.  The
interaction is mean-field: a +1 spin of type j pushes every site of its
clockwise neighbour type with weight -delta*J*b/N and of its anticlockwise
neighbour with weight -(1-delta)*J*b/N (b the receiving spin); pairs of
equal type contribute the field kappa regardless of spin states.  With that
coupling table the kappa part of the energy is a configuration-independent
constant, so it drops out of every energy difference while kappa still
enters the flip rates directly; the per-spin dynamics is therefore not
reversible with respect to the Gibbs measure, which
:func:`reversibility_residual` quantifies by exact enumeration.

Note the energy double sum runs over all ordered site pairs including the
diagonal pair; excluding the diagonal would only shift the energy by
another constant.  All exact enumerations are guarded by k*N <= 20.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import LoopSpec
from .trajectory import Trajectory

__all__ = [
    "SpinConfiguration",
    "EnergyDelta",
    "hamiltonian",
    "energy_deltas",
    "gibbs_measure",
    "generator_matrix",
    "lumped_density_generator",
    "density_generator",
    "reversibility_residual",
    "micro_simulate",
]

ENUMERATION_LIMIT = 20


@dataclass(frozen=True)
class SpinConfiguration:
    """Spin values over the k x N site lattice of a spec."""

    spins: np.ndarray
    spec: LoopSpec

    def __post_init__(self):
        spins = np.asarray(self.spins, dtype=np.int8)
        if spins.shape != (self.spec.k, self.spec.N):
            raise ValueError(
                f"spins must have shape ({self.spec.k}, {self.spec.N}), got {spins.shape}"
            )
        if not np.all(np.abs(spins) == 1):
            raise ValueError("spins must be +1 or -1")
        object.__setattr__(self, "spins", spins)

    @classmethod
    def all_plus(cls, spec: LoopSpec) -> "SpinConfiguration":
        return cls(np.ones((spec.k, spec.N), dtype=np.int8), spec)

    @classmethod
    def all_minus(cls, spec: LoopSpec) -> "SpinConfiguration":
        return cls(-np.ones((spec.k, spec.N), dtype=np.int8), spec)

    @classmethod
    def from_counts(cls, spec: LoopSpec, counts) -> "SpinConfiguration":
        """First counts[i] positions of type i active, the rest inactive."""
        spins = -np.ones((spec.k, spec.N), dtype=np.int8)
        for i, c in enumerate(counts):
            if not 0 <= c <= spec.N:
                raise ValueError(f"count {c} outside 0..{spec.N}")
            spins[i, :c] = 1
        return cls(spins, spec)

    def counts(self) -> np.ndarray:
        return np.sum(self.spins == 1, axis=1)

    def densities(self) -> np.ndarray:
        return self.counts() / self.spec.N

    def with_spin(self, site: tuple[int, int], value: int) -> "SpinConfiguration":
        spins = self.spins.copy()
        spins[site] = value
        return SpinConfiguration(spins, self.spec)


@dataclass(frozen=True)
class EnergyDelta:
    """Energy change of a single-site flip, split into the incoming part
    (change of the influence the rest of the system exerts on the site) and
    the outgoing part (change of the site's influence on the rest)."""

    delta_in: float
    delta_out: float

    @property
    def total(self) -> float:
        return self.delta_in + self.delta_out


def _require_clock(spec: LoopSpec):
    if spec.k != 3:
        raise ValueError("the coupling table is defined for the 3-type cycle only")


def _require_enumerable(spec: LoopSpec):
    if spec.k * spec.N > ENUMERATION_LIMIT:
        raise ValueError(
            f"k*N = {spec.k * spec.N} exceeds the enumeration guard {ENUMERATION_LIMIT}"
        )


def hamiltonian(config: SpinConfiguration) -> float:
    """Total interaction energy of a configuration (k = 3 only).

    Computed through per-type counts; identical to the double sum over all
    ordered site pairs of the coupling table divided by N.  The kappa part
    is the constant -N * sum(kappa).
    """
    spec = config.spec
    _require_clock(spec)
    n = config.counts().astype(float)
    s = 2.0 * n - spec.N  # per-type spin sums
    a_idx, h_idx = spec.neighbour_indices
    coupling = float(np.sum(n * (spec.delta * s[h_idx] + (1.0 - spec.delta) * s[a_idx])))
    return (spec.J / spec.N) * coupling - spec.N * float(np.sum(spec.kappa))


def energy_deltas(
    config: SpinConfiguration, site: tuple[int, int], a: int, b: int
) -> EnergyDelta:
    """Incoming/outgoing energy change for flipping ``site`` from a to b.

    The total equals the difference of :func:`hamiltonian` between the
    configuration with the site set to b and the one with it set to a.
    """
    spec = config.spec
    _require_clock(spec)
    if a not in (-1, 1) or b not in (-1, 1):
        raise ValueError("spin states must be +1 or -1")
    i, pos = site
    if not (0 <= i < spec.k and 0 <= pos < spec.N):
        raise ValueError(f"site {site!r} outside the lattice")
    n = config.counts().astype(float)
    s = 2.0 * n - spec.N
    ai = spec.anticlockwise(i)
    hi = spec.clockwise(i)
    d = spec.delta
    # Incoming: +1 spins of the neighbour types act on the flipped site.
    delta_in = (b - a) * spec.J * (d * n[ai] + (1.0 - d) * n[hi]) / spec.N
    # Outgoing: the site acts on every site of its neighbour types when +1.
    delta_out = (b - a) * spec.J * (d * s[hi] + (1.0 - d) * s[ai]) / (2.0 * spec.N)
    return EnergyDelta(delta_in=float(delta_in), delta_out=float(delta_out))


def _config_counts(spec: LoopSpec, idx: np.ndarray) -> np.ndarray:
    """Per-type +1 counts for configurations given as bitmask indices.

    Bit (i*N + n) set means site (i, n) carries spin +1.
    """
    N = spec.N
    table = np.array([bin(v).count("1") for v in range(1 << N)], dtype=np.int64)
    mask = (1 << N) - 1
    counts = np.empty((len(idx), spec.k), dtype=np.int64)
    for i in range(spec.k):
        counts[:, i] = table[(idx >> (i * N)) & mask]
    return counts


def _energies_by_index(spec: LoopSpec, idx: np.ndarray) -> np.ndarray:
    counts = _config_counts(spec, idx).astype(float)
    s = 2.0 * counts - spec.N
    a_idx, h_idx = spec.neighbour_indices
    coupling = np.sum(
        counts * (spec.delta * s[:, h_idx] + (1.0 - spec.delta) * s[:, a_idx]), axis=1
    )
    return (spec.J / spec.N) * coupling - spec.N * float(np.sum(spec.kappa))


def gibbs_measure(spec: LoopSpec) -> np.ndarray:
    """Gibbs probabilities exp(-H)/Z over all 2^(kN) configurations.

    Configuration c is indexed by its bitmask: bit (i*N + n) set means site
    (i, n) is +1.  Requires k = 3 and k*N <= 20.
    """
    _require_clock(spec)
    _require_enumerable(spec)
    idx = np.arange(1 << (spec.k * spec.N), dtype=np.int64)
    h = _energies_by_index(spec, idx)
    w = np.exp(-(h - np.min(h)))
    return w / np.sum(w)


def _site_flip_exponents(spec: LoopSpec, counts: np.ndarray) -> np.ndarray:
    """Rate exponent E_i per type for configurations with given counts."""
    a_idx, h_idx = spec.neighbour_indices
    kappa = np.asarray(spec.kappa)
    return 2.0 * (
        -spec.delta * spec.J * counts[:, a_idx] / spec.N
        - (1.0 - spec.delta) * spec.J * counts[:, h_idx] / spec.N
        + kappa
    )


def generator_matrix(spec: LoopSpec) -> np.ndarray:
    """Dense generator of the spin-flip chain over all 2^(kN) configurations.

    Off-diagonal entries are the single-site flip rates, diagonal entries
    make rows sum to zero, multi-site transitions have rate zero.  Memory
    grows as 4^(kN); meant for desk-scale verification.
    """
    _require_enumerable(spec)
    kn = spec.k * spec.N
    size = 1 << kn
    idx = np.arange(size, dtype=np.int64)
    counts = _config_counts(spec, idx)
    expo = _site_flip_exponents(spec, counts.astype(float))
    q = np.zeros((size, size))
    for i in range(spec.k):
        up = np.exp(expo[:, i])
        down = np.exp(-expo[:, i])
        for pos in range(spec.N):
            bit = 1 << (i * spec.N + pos)
            is_plus = (idx & bit) != 0
            targets = idx ^ bit
            rates = np.where(is_plus, down, up)
            q[idx, targets] = rates
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    return q


def density_generator(spec: LoopSpec) -> np.ndarray:
    """Generator of the density jump process on the grid {0..N}^k / N.

    States are count vectors ordered lexicographically; the rate from n to
    n +/- e_i is N * beta for the matching jump direction.
    """
    from .model import channel_rates

    N = spec.N
    k = spec.k
    shape = (N + 1,) * k
    size = (N + 1) ** k
    q = np.zeros((size, size))
    for flat in range(size):
        n = np.array(np.unravel_index(flat, shape))
        beta = channel_rates(spec, n / N)
        for i in range(k):
            if n[i] < N:
                up = np.ravel_multi_index(tuple(n + np.eye(k, dtype=int)[i]), shape)
                q[flat, up] = N * beta[2 * i]
            if n[i] > 0:
                dn = np.ravel_multi_index(tuple(n - np.eye(k, dtype=int)[i]), shape)
                q[flat, dn] = N * beta[2 * i + 1]
    np.fill_diagonal(q, -q.sum(axis=1))
    return q


def lumped_density_generator(spec: LoopSpec, tol: float = 1e-9) -> np.ndarray:
    """Project :func:`generator_matrix` onto count vectors.

    For every source configuration the outgoing rates are summed over the
    target count class; all representatives of a count class must agree
    (the chain is lumpable because rates depend only on counts), which is
    verified to ``tol``.
    """
    _require_enumerable(spec)
    N = spec.N
    k = spec.k
    q = generator_matrix(spec)
    size = q.shape[0]
    idx = np.arange(size, dtype=np.int64)
    counts = _config_counts(spec, idx)
    shape = (N + 1,) * k
    class_of = np.ravel_multi_index(tuple(counts.T), shape)
    nclasses = (N + 1) ** k
    # Sum outgoing rates over target classes for every configuration.
    per_config = np.zeros((size, nclasses))
    for c in range(size):
        per_config[c] = np.bincount(class_of, weights=q[c], minlength=nclasses)
    lumped = np.zeros((nclasses, nclasses))
    for cls in range(nclasses):
        members = np.flatnonzero(class_of == cls)
        if len(members) == 0:
            continue
        rows = per_config[members]
        if np.max(np.abs(rows - rows[0])) > tol:
            raise AssertionError(f"count class {cls} is not lumpable to {tol}")
        lumped[cls] = rows[0]
    return lumped


def reversibility_residual(spec: LoopSpec) -> float:
    """max over configuration pairs of |mu(s) q(s,s') - mu(s') q(s',s)|.

    Zero would mean detailed balance of the flip dynamics with respect to
    the Gibbs measure; the type-dependent rates generically break it.
    """
    _require_clock(spec)
    _require_enumerable(spec)
    mu = gibbs_measure(spec)
    idx = np.arange(1 << (spec.k * spec.N), dtype=np.int64)
    counts = _config_counts(spec, idx)
    expo = _site_flip_exponents(spec, counts.astype(float))
    worst = 0.0
    for i in range(spec.k):
        up = np.exp(expo[:, i])
        down = np.exp(-expo[:, i])
        for pos in range(spec.N):
            bit = 1 << (i * spec.N + pos)
            minus = idx[(idx & bit) == 0]
            plus = minus ^ bit
            # Flipping -1 -> +1 does not change neighbour counts, so the
            # reverse rate is the down rate at the same exponent.
            forward = mu[minus] * up[minus]
            backward = mu[plus] * down[minus]
            worst = max(worst, float(np.max(np.abs(forward - backward))))
    return worst


def micro_simulate(
    spec: LoopSpec,
    sigma0: SpinConfiguration,
    t_end: float,
    seed: int,
) -> Trajectory:
    """Exact event-driven run of the per-site flip dynamics.

    Every event flips one site; the returned trajectory is the projected
    density path (counts / N) with every event recorded.  The per-type
    aggregate flip rates equal N * beta of the density process, so the
    projection has the density process law.
    """
    if sigma0.spec != spec:
        raise ValueError("sigma0 belongs to a different spec")
    if not math.isfinite(t_end) or t_end < 0:
        raise ValueError(f"t_end must be finite and non-negative, got {t_end!r}")
    k = spec.k
    N = spec.N
    spins = sigma0.spins.copy()
    n = list(int(v) for v in sigma0.counts())
    a_idx = [spec.anticlockwise(i) for i in range(k)]
    h_idx = [spec.clockwise(i) for i in range(k)]
    kap = list(spec.kappa)
    dJ = spec.delta * spec.J
    hJ = (1.0 - spec.delta) * spec.J
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))

    times = [0.0]
    states = [tuple(c / N for c in n)]
    t = 0.0
    rates = [0.0] * (2 * k)
    while True:
        tot = 0.0
        for i in range(k):
            e = 2.0 * (-dJ * (n[a_idx[i]] / N) - hJ * (n[h_idx[i]] / N) + kap[i])
            r_up = (N - n[i]) * math.exp(e)
            r_dn = n[i] * math.exp(-e)
            rates[2 * i] = r_up
            rates[2 * i + 1] = r_dn
            tot += r_up + r_dn
        if tot <= 0.0:
            break
        t_next = t + rng.standard_exponential() / tot
        if t_next >= t_end:
            break
        target = rng.random() * tot
        acc = 0.0
        chosen = 2 * k - 1
        for c in range(2 * k):
            acc += rates[c]
            if target < acc:
                chosen = c
                break
        i = chosen >> 1
        want = -1 if (chosen & 1) == 0 else 1  # current spin of the flipped site
        eligible = np.flatnonzero(spins[i] == want)
        pos = int(eligible[rng.integers(len(eligible))])
        spins[i, pos] = -want
        n[i] += 1 if want == -1 else -1
        t = t_next
        times.append(t)
        states.append(tuple(c / N for c in n))

    if times[-1] < t_end:
        times.append(t_end)
        states.append(tuple(c / N for c in n))
    meta = {"spec": spec, "seed": int(seed), "t_end": float(t_end), "level": "micro"}
    return Trajectory(np.array(times), np.array(states), kind="stochastic", meta=meta)
