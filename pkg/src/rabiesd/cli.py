"""Command-line driver.

Subcommands ``run`` (single alpha_sq), ``sweep`` (alpha_sq grid),
``oracle-check`` (Fock cutoff convergence and reduced-vs-exact deviation)
and ``events`` (event detection on an existing CSV). Flags mirror the
fields of :class:`rabiesd.sweep.RunConfig`; ``--config FILE`` reads
``key = value`` lines with the same keys and flags override the file.

Exit codes: 0 success, 2 configuration error, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .integrator import TimeGrid
from .model import InitialState
from .oracle import OracleConfig, oracle_converged, oracle_evolve_joint, top_fock_population
from .sweep import (
    ConfigError,
    Engine,
    RunConfig,
    SweepAbort,
    concurrence_curve,
    detect_events,
    emit,
    evolve_states,
    output_paths,
    read_csv,
    run,
    surface_events,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("rabiesd")

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _field_types() -> dict:
    hints = {
        "engine": str,
        "family": str,
        "alpha_sq_count": int,
        "n_max": int,
        "sample_every": int,
        "renormalize_trace": bool,
        "off_resonance": bool,
        "output_path": str,
    }
    return {f.name: hints.get(f.name, float) for f in dataclasses.fields(RunConfig)}


def parse_value(key: str, raw: str):
    kind = _field_types()[key]
    raw = raw.strip()
    if raw.lower() in ("none", "null", ""):
        return None
    if kind is bool:
        low = raw.lower()
        if low in _BOOL_TRUE:
            return True
        if low in _BOOL_FALSE:
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    types = _field_types()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in types:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = parse_value(key, value)
    return out


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value file with RunConfig keys")
    p.add_argument("--engine", choices=[e.value for e in Engine])
    p.add_argument("--family", choices=["phi", "psi"])
    p.add_argument("--omega-over-lambda", type=float)
    p.add_argument("--omega0-over-lambda", type=float, help="atomic frequency; defaults to omega")
    p.add_argument("--off-resonance", action="store_const", const=True, help="permit omega0 != omega")
    p.add_argument("--gamma-over-lambda", type=float, help="atomic decay rate (default 0.1)")
    p.add_argument("--alpha-sq", type=float)
    p.add_argument("--alpha-sq-count", type=int, help="sweep alpha_sq over this many points in [0, 1]")
    p.add_argument("--beta-phase", type=float)
    p.add_argument("--t-max-lambda", type=float)
    p.add_argument("--dt-lambda", type=float)
    p.add_argument("--n-max", type=int, help="photon cutoff for the oracle engine")
    p.add_argument("--renormalize-trace", action="store_const", const=True)
    p.add_argument("--output-path")
    p.add_argument("--sample-every", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--hold-window", type=float)
    p.add_argument("--time-axis-scale", type=float, help="multiply output times, e.g. 2.449 for sqrt(6)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rabiesd", description="Concurrence dynamics of two decaying atoms in a single-mode cavity.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("run", "single initial amplitude"),
        ("sweep", "grid over alpha_sq"),
        ("oracle-check", "Fock cutoff convergence and reduced vs exact comparison"),
    ):
        _add_run_flags(sub.add_parser(name, help=help_))
    sub.choices["oracle-check"].add_argument("--tol", type=float, default=1e-4)
    ev = sub.add_parser("events", help="detect death/birth/revivals in a result CSV")
    ev.add_argument("csv")
    ev.add_argument("--threshold", type=float, default=1e-4)
    ev.add_argument("--hold-window", type=float, default=0.5)
    ev.add_argument("--output-path", help="write JSON here instead of stdout")
    return parser


def config_from_args(args, command: str) -> RunConfig:
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    for f in dataclasses.fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    if command == "sweep":
        values.setdefault("alpha_sq_count", 41)
        if values["alpha_sq_count"] is not None:
            values["alpha_sq"] = None
    elif command == "run":
        values["alpha_sq_count"] = None
    return RunConfig.from_dict(values).validate()


def cmd_run(cfg: RunConfig) -> int:
    surface = run(cfg)
    reports = surface_events(surface, cfg.threshold, cfg.hold_window)
    csv_path, json_path = emit(surface, reports, cfg.output_path, cfg)
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def cmd_oracle_check(cfg: RunConfig, tol: float) -> int:
    if cfg.t_max_lambda <= 0:
        raise ConfigError("oracle-check needs t_max_lambda > 0")
    grid = TimeGrid(0.0, cfg.t_max_lambda, cfg.dt_lambda)
    ocfg = OracleConfig(cfg.params, grid, cfg.n_max, cfg.sample_every)
    times, reduced_states = evolve_states(dataclasses.replace(cfg, engine=Engine.REDUCED))
    checks = []
    for i, a in enumerate(cfg.alpha_sq_values()):
        state = InitialState.from_alpha_sq(cfg.family, a, cfg.beta_phase)
        conv = oracle_converged(state, ocfg, tol)
        exact = oracle_evolve_joint(state, ocfg)
        c_red, _ = concurrence_curve(reduced_states[i], a)
        c_orc, _ = concurrence_curve(exact.reduced.states, a)
        ev_red = detect_events(times, c_red, cfg.threshold, cfg.hold_window)
        ev_orc = detect_events(times, c_orc, cfg.threshold, cfg.hold_window)
        checks.append(
            {
                "alpha_sq": float(a),
                "n_max_used": conv.n_max_used,
                "max_concurrence_shift": conv.max_concurrence_shift,
                "converged": conv.converged,
                "top_fock_population": top_fock_population(exact.joint.states, cfg.n_max),
                "max_joint_trace_drift": exact.joint.max_trace_drift,
                "max_reduced_vs_oracle_deviation": float(np.max(np.abs(c_red - c_orc))),
                "reduced_death_time": ev_red.death_time,
                "oracle_death_time": ev_orc.death_time,
            }
        )
    _, json_path = output_paths(cfg.output_path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(json.dumps({"config": cfg.to_dict(), "tol": tol, "checks": checks}, indent=2) + "\n")
    print(f"wrote {json_path}")
    return EXIT_OK if all(c["converged"] for c in checks) else 1


def cmd_events(args) -> int:
    try:
        curves = read_csv(args.csv)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read {args.csv}: {exc}") from None
    out = [
        {"alpha_sq": a, **detect_events(t, c, args.threshold, args.hold_window).to_dict()}
        for a, (t, c) in sorted(curves.items())
    ]
    text = json.dumps(out, indent=2) + "\n"
    if args.output_path:
        Path(args.output_path).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "events":
            return cmd_events(args)
        cfg = config_from_args(args, args.command)
        if args.command == "oracle-check":
            return cmd_oracle_check(cfg, args.tol)
        return cmd_run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SweepAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
