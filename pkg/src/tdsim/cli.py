"""Command-line front end: simulate | ode | bifurcate | converge | validate.

Every command writes one dataset file, CSV by default ('#'-prefixed header
lines carrying the full configuration, then one row per record) or JSON
(an object with "config", "columns" and "rows" mirroring the CSV schema).
Floats are serialized with shortest round-trip precision, so a rerun with
the same configuration and seed reproduces the file byte for byte.

Exit codes: 0 success, 1 runtime or check failure, 2 configuration error.
The TDSIM_THREADS environment variable caps worker processes for replica
sweeps (default 1).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import secrets
import sys

import numpy as np

from . import __version__, analysis, jump, micro, ode
from .model import DensityState, LoopSpec


class ConfigError(ValueError):
    """A bad configuration value; the message names the offending field."""


def _parse_grid(text: str) -> list[float]:
    """Grid spec: 'start:stop:step', a comma list, or a single value."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid: expected start:stop:step, got {text!r}")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from None
        if step <= 0 or not all(map(math.isfinite, (start, stop, step))):
            raise ConfigError("grid: step must be positive and bounds finite")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = [round(start + i * step, 12) for i in range(count)]
    else:
        try:
            values = [float(p) for p in text.split(",") if p.strip()]
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from None
    if not values or not all(map(math.isfinite, values)):
        raise ConfigError("grid: must be non-empty and finite")
    return values


def _parse_x0(text: str, k: int) -> tuple[float, ...]:
    try:
        vals = tuple(float(p) for p in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"x0: {exc}") from None
    if len(vals) != k:
        raise ConfigError(f"x0: expected {k} comma-separated values, got {len(vals)}")
    if any(not math.isfinite(v) or v < 0 or v > 1 for v in vals):
        raise ConfigError("x0: entries must be finite and in [0, 1]")
    return vals


def _resolve_kappa(values: list[str] | None, J: float, k: int) -> tuple[float, ...]:
    if not values or (len(values) == 1 and values[0] == "half-J"):
        return (J / 2.0,) * k
    try:
        floats = [float(v) for part in values for v in part.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"kappa: {exc}") from None
    if len(floats) == 1:
        floats = floats * k
    if len(floats) != k:
        raise ConfigError(f"kappa: expected 1 or {k} values, got {len(floats)}")
    return tuple(floats)


def _build_spec(args) -> LoopSpec:
    kappa = _resolve_kappa(args.kappa, args.J, args.k)
    try:
        return LoopSpec(J=args.J, delta=args.delta, kappa=kappa, N=args.N, k=args.k)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = secrets.randbelow(2**63)
    print(f"seed = {seed}", file=sys.stderr)
    return seed


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))  # plain shortest-repr even for numpy scalars
    return str(value)


def write_dataset(
    path: str,
    config: dict,
    columns: list[str],
    rows: list[list],
    fmt: str,
    footer: dict | None = None,
):
    """Emit one dataset; ``footer`` entries land after the rows (CSV) or in
    the config object (JSON), and re-parse into config either way."""
    if fmt == "csv":
        lines = [f"# tdsim {__version__}"]
        for key, value in config.items():
            lines.append(f"# {key} = {_fmt(value)}")
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
        for key, value in (footer or {}).items():
            lines.append(f"# {key} = {_fmt(value)}")
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        merged = dict(config, **(footer or {}))
        payload = {"tdsim": __version__, "config": merged, "columns": columns, "rows": rows}
        text = json.dumps(payload, indent=1) + "\n"
    else:
        raise ConfigError(f"format: unknown format {fmt!r}")
    with open(path, "w") as fh:
        fh.write(text)


def read_dataset(path: str):
    """Parse a dataset file back into (config, columns, rows)."""
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        payload = json.loads(text)
        return payload["config"], payload["columns"], payload["rows"]
    config: dict = {}
    columns: list[str] = []
    rows: list[list] = []
    for line in text.splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if " = " in body:
                key, raw = body.split(" = ", 1)
                config[key.strip()] = _parse_scalar(raw.strip())
            continue
        if not line.strip():
            continue
        if not columns:
            columns = line.split(",")
            continue
        rows.append([_parse_scalar(cell) for cell in line.split(",")])
    return config, columns, rows


def _parse_scalar(raw: str):
    if raw == "":
        return None
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            continue
    return raw


def _common_config(args, spec: LoopSpec, **extra) -> dict:
    config = {
        "command": args.command,
        "J": float(spec.J),
        "delta": float(spec.delta),
        "kappa": ",".join(repr(v) for v in spec.kappa),
        "N": spec.N,
        "k": spec.k,
    }
    config.update(extra)
    return config


def cmd_simulate(args) -> int:
    spec = _build_spec(args)
    if args.t_end < 0 or not math.isfinite(args.t_end):
        raise ConfigError("t-end: must be finite and non-negative")
    seed = _resolve_seed(args)
    x0 = _parse_x0(args.x0, spec.k)
    counts = [int(round(v * spec.N)) for v in x0]
    if args.level == "density":
        state0 = DensityState.from_counts(counts, spec.N)
        traj = jump.ssa_simulate(spec, state0, args.t_end, seed, thinning=args.thinning)
    else:
        sigma0 = micro.SpinConfiguration.from_counts(spec, counts)
        traj = micro.micro_simulate(spec, sigma0, args.t_end, seed)
    config = _common_config(
        args, spec, level=args.level, t_end=float(args.t_end), seed=seed, x0=args.x0
    )
    columns = ["t"] + [f"x_{chr(65 + i)}" for i in range(spec.k)]
    rows = [[float(t)] + [float(v) for v in state] for t, state in zip(traj.times, traj.states)]
    write_dataset(args.out, config, columns, rows, args.format)
    return 0


def cmd_ode(args) -> int:
    spec = _build_spec(args)
    if args.t_end < 0 or not math.isfinite(args.t_end):
        raise ConfigError("t-end: must be finite and non-negative")
    x0 = _parse_x0(args.x0, spec.k)
    try:
        settings = ode.IntegratorSettings(
            method=args.method, step=args.step, rtol=args.rtol,
            atol=args.atol, sample_dt=args.sample_dt,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    traj = ode.integrate(spec, np.array(x0), args.t_end, settings)
    config = _common_config(
        args, spec, t_end=float(args.t_end), x0=args.x0, method=args.method,
        step=float(args.step), rtol=float(args.rtol), atol=float(args.atol),
    )
    columns = ["t"] + [f"x_{chr(65 + i)}" for i in range(spec.k)]
    rows = [[float(t)] + [float(v) for v in state] for t, state in zip(traj.times, traj.states)]
    write_dataset(args.out, config, columns, rows, args.format)
    return 0


def cmd_bifurcate(args) -> int:
    grid = _parse_grid(args.grid)
    if not (0.0 <= args.delta <= 1.0):
        raise ConfigError("delta: must lie in [0, 1]")
    records = analysis.scan(grid, args.delta)
    config = {
        "command": args.command,
        "delta": float(args.delta),
        "grid": args.grid,
        "k": 3,
    }
    columns = [
        "J", "delta", "classification",
        "lambda1_re", "lambda1_im", "lambda2_re", "lambda2_im", "lambda3_re", "lambda3_im",
        "fp_low", "fp_mid", "fp_high", "orbit_min_A", "orbit_max_A",
    ]
    rows = []
    for rec in records:
        eig = rec.spectrum.eigenvalues
        fps = sorted(p[0] for p in rec.fixed_points)
        if len(fps) == 1:
            fp_cells = [None, fps[0], None]
        else:
            fp_cells = [fps[0], fps[1], fps[2]]
        rows.append(
            [rec.J, rec.delta, rec.classification]
            + [val for z in eig for val in (z.real, z.imag)]
            + fp_cells
            + [
                rec.orbit_min[0] if rec.orbit_min else None,
                rec.orbit_max[0] if rec.orbit_max else None,
            ]
        )
    write_dataset(args.out, config, columns, rows, args.format)
    return 0


def cmd_converge(args) -> int:
    if not args.N_list:
        raise ConfigError("N: at least one reservoir size is required")
    if args.replicas < 1:
        raise ConfigError("replicas: must be >= 1")
    seed = _resolve_seed(args)
    args.N = args.N_list[0]  # base spec; the sweep replaces N per entry
    base = _build_spec(args)
    x0 = _parse_x0(args.x0, base.k)
    workers = int(os.environ.get("TDSIM_THREADS", "1"))
    result = analysis.convergence_experiment(
        base, args.N_list, np.array(x0), args.t_end, args.replicas, seed,
        workers=workers,
    )
    config = _common_config(
        args, base, t_end=float(args.t_end), seed=seed, x0=args.x0,
        replicas=args.replicas, N_list=",".join(str(n) for n in args.N_list),
    )
    columns = ["N", "median", "q25", "q75"]
    rows = [[row.N, row.median, row.q25, row.q75] for row in result.rows]
    footer = {"slope": result.slope} if result.slope is not None else None
    write_dataset(args.out, config, columns, rows, args.format, footer=footer)
    return 0


def _validate_checks(spec: LoopSpec, seed: int):
    """Run the verification battery; yields (name, residual, threshold, status)."""
    rng = np.random.default_rng(seed)

    if spec.k == 3 and spec.k * spec.N <= micro.ENUMERATION_LIMIT:
        lumped = micro.lumped_density_generator(spec)
        dens = micro.density_generator(spec)
        res = float(np.max(np.abs(lumped - dens)))
        yield "micro-macro generator equivalence", res, 1e-12, None
    else:
        yield "micro-macro generator equivalence", None, 1e-12, "skipped (k*N > 20)"

    zero_spec = LoopSpec(J=0.0, delta=spec.delta, kappa=(0.0,) * 3, N=min(spec.N, 2), k=3)
    yield "reversibility residual at J=0", micro.reversibility_residual(zero_spec), 1e-12, None

    if spec.k == 3 and spec.k * spec.N <= micro.ENUMERATION_LIMIT:
        res = micro.reversibility_residual(spec)
        yield "reversibility residual at config", res, None, f"info ({res:.3e})"
    else:
        yield "reversibility residual at config", None, None, "skipped (k*N > 20)"

    from .model import jacobian, vector_field

    worst = 0.0
    for _ in range(20):
        x = rng.uniform(0.05, 0.95, size=spec.k)
        jac = jacobian(spec, x)
        fd = np.empty_like(jac)
        h = 1e-6
        for j in range(spec.k):
            e = np.zeros(spec.k)
            e[j] = h
            fd[:, j] = (vector_field(spec, x + e) - vector_field(spec, x - e)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(jac - fd))))
    yield "jacobian vs finite differences", worst, 1e-6, None

    r = analysis.rotation_matrix()
    yield "rotation orthonormality", float(np.max(np.abs(r.T @ r - np.eye(3)))), 1e-14, None

    worst = 0.0
    for J in (-2.0, 0.0, spec.J, 2.0, 3.0):
        for delta in (0.0, spec.delta, 0.5, 1.0):
            z = analysis.z_system(J, delta)
            spec_j = LoopSpec.with_half_j(J=J, delta=delta, N=1)
            numeric = r.T @ jacobian(spec_j, np.full(3, 0.5)) @ r
            worst = max(worst, float(np.max(np.abs(numeric - z))))
    yield "rotated linearization closed form", worst, 1e-10, None

    a = analysis.z_system(2.0, spec.delta)
    traj = ode.integrate_linear(a, np.array([0.6, -0.3, 0.2]), 10.0)
    r2 = traj.states[:, 0] ** 2 + traj.states[:, 1] ** 2
    drift = float(np.max(np.abs(r2 - r2[0])) / r2[0])
    yield "radius conservation at J=2", drift, 1e-6, None


def cmd_validate(args) -> int:
    spec = _build_spec(args)
    seed = _resolve_seed(args)
    columns = ["check", "residual", "threshold", "status"]
    rows = []
    failed = False
    for name, residual, threshold, note in _validate_checks(spec, seed):
        if note is not None:
            status = note
        elif threshold is None:
            status = "pass"
        else:
            status = "pass" if residual <= threshold else "FAIL"
            failed = failed or status == "FAIL"
        rows.append([name, residual, threshold, status])
    config = _common_config(args, spec, seed=seed)
    write_dataset(args.out, config, columns, rows, args.format)
    for name, residual, threshold, status in rows:
        res = "" if residual is None else f" residual={residual:.3e}"
        print(f"{status:>8}  {name}{res}")
    return 1 if failed else 0


def _add_model_args(p: argparse.ArgumentParser, default_N: int, repeat_N: bool = False):
    p.add_argument("--J", type=float, default=1.0, help="coupling strength")
    p.add_argument("--delta", type=float, default=0.0, help="asymmetry in [0, 1]")
    p.add_argument(
        "--kappa", action="append", default=None,
        help="external field: 'half-J' (default), one value, or k comma-separated values",
    )
    if repeat_N:
        p.add_argument(
            "--N", type=int, action="append", default=None, dest="N_list",
            help="reservoir size; repeat for a sweep", required=True,
        )
    else:
        p.add_argument("--N", type=int, default=default_N, help="reservoir size per type")
    p.add_argument("--k", type=int, default=3, help="number of types on the cycle")


def _add_output_args(p: argparse.ArgumentParser):
    p.add_argument("--out", required=True, help="output file path")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tdsim",
        description="Feedback-cycle spin dynamics: simulation, fluid limits, bifurcations",
    )
    parser.add_argument("--version", action="version", version=f"tdsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample a stochastic path")
    _add_model_args(p, default_N=100)
    p.add_argument("--t-end", dest="t_end", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--x0", default="0.5,0.5,0.5")
    p.add_argument("--level", choices=("density", "micro"), default="density")
    p.add_argument("--thinning", type=int, default=None, help="record every n-th event")
    _add_output_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ode", help="integrate the deterministic limit")
    _add_model_args(p, default_N=100)
    p.add_argument("--t-end", dest="t_end", type=float, default=10.0)
    p.add_argument("--x0", default="0.5,0.5,0.5")
    p.add_argument("--method", choices=("rk4", "rk45"), default="rk45")
    p.add_argument("--step", type=float, default=1e-3, help="rk4 step size")
    p.add_argument("--rtol", type=float, default=1e-8)
    p.add_argument("--atol", type=float, default=1e-10)
    p.add_argument("--sample-dt", dest="sample_dt", type=float, default=None)
    _add_output_args(p)
    p.set_defaults(func=cmd_ode)

    p = sub.add_parser("bifurcate", help="classification scan over a J grid")
    p.add_argument("--grid", required=True, help="J grid: start:stop:step or comma list")
    p.add_argument("--delta", type=float, default=0.0)
    _add_output_args(p)
    p.set_defaults(func=cmd_bifurcate)

    p = sub.add_parser("converge", help="stochastic-to-deterministic distance vs N")
    _add_model_args(p, default_N=100, repeat_N=True)
    p.add_argument("--t-end", dest="t_end", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--x0", default="0.5,0.5,0.5")
    p.add_argument("--replicas", type=int, default=100)
    _add_output_args(p)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("validate", help="run the internal consistency battery")
    _add_model_args(p, default_N=2)
    p.add_argument("--seed", type=int, default=None)
    _add_output_args(p)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"tdsim: configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures map to exit 1
        print(f"tdsim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
