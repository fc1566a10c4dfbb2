"""Command-line interface: config parsing, run orchestration, and manifests.

Configs are flat dotted-key files, one `key = value` per line with `#`
comments. Each subcommand has a documented key set; unknown keys are
rejected and defaults are filled in, so the resolved echo is a normalization
fixpoint: parsing the echo reproduces the echo. Exit codes: 0 success/pass,
1 numerical failure or verdict fail, 2 configuration error.
"""

import argparse
import datetime
import json
import os
import sys

from .errors import ConfigError, ContractViolation, NumericalFailure
from .dynamics import (FORCING_KINDS, INIT_KINDS, SCHEMES, ForcingSpec,
                       InitSpec, SimConfig, build_forcing, run_trajectory,
                       write_trajectory_csv)
from .model import NonlinearityModel
from .spectral import sobolev_norm, scalar_sobolev_norm, write_checkpoint
from .steady import regularity_sweep, solve_steady
from .verify import (PerturbSpec, oracle_check, verify_convective,
                     verify_energy, verify_lipschitz, verify_lyapunov,
                     verify_negative_norm, verify_smoothing)

EXPERIMENT_NAMES = ("energy", "lipschitz", "smoothing", "lyapunov", "negnorm",
                    "convective")

_DEFAULT_LENGTH = 6.283185307179586


def _parse_bool(s, key):
    if s == "true":
        return True
    if s == "false":
        return False
    raise ConfigError(f"{key} must be true or false, got {s!r}")


def _parse_int(s, key):
    try:
        return int(s, 10)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {s!r}") from None


def _parse_float(s, key):
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {s!r}") from None


def _parse_int_list(s, key):
    return tuple(_parse_int(part.strip(), key) for part in s.split(","))


def _parse_float_list(s, key):
    return tuple(_parse_float(part.strip(), key) for part in s.split(","))


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    return str(value)


# key -> (parser, default); REQUIRED defaults are filled per command
_REQUIRED = object()

_SCHEMA = {
    "dim": (_parse_int, _REQUIRED),
    "n": (_parse_int, _REQUIRED),
    "length": (_parse_float, _DEFAULT_LENGTH),
    "convective": (_parse_bool, False),
    "model.enabled": (_parse_bool, True),
    "model.a": (_parse_float, 0.0),
    "model.b": (_parse_float, 1.0),
    "model.r": (_parse_float, 3.0),
    "forcing.kind": (str, "zero"),
    "forcing.amplitude": (_parse_float, 0.0),
    "forcing.seed": (_parse_int, 0),
    "forcing.mode": (_parse_int_list, (1, 0)),
    "out": (str, "out"),
    "scheme": (str, "imex1"),
    "dt": (_parse_float, _REQUIRED),
    "t_end": (_parse_float, _REQUIRED),
    "sample_dt": (_parse_float, None),  # default computed from dt and t_end
    "init.kind": (str, "zero"),
    "init.amplitude": (_parse_float, 0.0),
    "init.seed": (_parse_int, 0),
    "init.file": (str, ""),
    "steady.method": (str, "newton"),
    "steady.tol": (_parse_float, 1e-9),
    "sweep.amplitudes": (_parse_float_list, _REQUIRED),
    "verify.perturb_amplitude": (_parse_float, 1e-6),
    "verify.perturb_seed": (_parse_int, 123),
    "verify.perturb_kind": (str, "random_smooth"),
    "verify.perturb_mode": (_parse_int_list, (1, 0)),
    "verify.exact_tol": (_parse_float, 1e-3),
    "verify.headroom": (_parse_float, 2.0),
    "verify.equilibrium_tol": (_parse_float, 1e-6),
    "verify.slack": (_parse_float, 1e-10),
    "verify.t_burn": (_parse_float, 0.5),
    "verify.b_small": (_parse_float, 0.1),
    "verify.b_large": (_parse_float, 10.0),
    "oracle.dts": (_parse_float_list, (0.004, 0.002, 0.001)),
    "oracle.order_tol": (_parse_float, 0.2),
    "oracle.tol": (_parse_float, 1e-10),
}

_COMMON_KEYS = ("dim", "n", "length", "convective", "model.enabled", "model.a",
                "model.b", "model.r", "forcing.kind", "forcing.amplitude",
                "forcing.seed", "forcing.mode", "out")
_DYN_KEYS = ("scheme", "dt", "t_end", "sample_dt", "init.kind",
             "init.amplitude", "init.seed", "init.file")
_STEADY_KEYS = ("steady.method", "steady.tol")

_COMMAND_KEYS = {
    "simulate": _COMMON_KEYS + _DYN_KEYS,
    "steady": _COMMON_KEYS + _STEADY_KEYS,
    "sweep": _COMMON_KEYS + _STEADY_KEYS + ("sweep.amplitudes",),
    "verify": _COMMON_KEYS + _DYN_KEYS + tuple(
        k for k in _SCHEMA if k.startswith("verify.")),
    "oracle-check": _COMMON_KEYS + _DYN_KEYS + tuple(
        k for k in _SCHEMA if k.startswith("oracle.")),
}

_COMMAND_REQUIRED = {
    "simulate": ("dim", "n", "dt", "t_end"),
    "steady": ("dim", "n"),
    "sweep": ("dim", "n", "sweep.amplitudes"),
    "verify": ("dim", "n", "dt", "t_end"),
    "oracle-check": ("dim", "n", "dt", "t_end"),
}


def _read_pairs(text):
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        key, val = key.strip(), val.strip()
        if key in pairs:
            raise ConfigError(f"duplicate key {key}")
        pairs[key] = val
    return pairs


def _validate(resolved):
    if resolved["dim"] not in (2, 3):
        raise ConfigError("dim must be 2 or 3")
    n = resolved["n"]
    if n < 4 or n & (n - 1):
        raise ConfigError("n must be a power of two >= 4")
    if not resolved["length"] > 0:
        raise ConfigError("length must be positive")
    if resolved["model.enabled"]:
        if not resolved["model.b"] > 0:
            raise ConfigError("model.b must be positive")
        if not resolved["model.r"] >= 1:
            raise ConfigError("model.r must be >= 1")
    if resolved["forcing.kind"] not in FORCING_KINDS:
        raise ConfigError(f"forcing.kind must be one of {FORCING_KINDS}")
    if resolved["forcing.amplitude"] < 0:
        raise ConfigError("forcing.amplitude must be nonnegative")
    if len(resolved["forcing.mode"]) != resolved["dim"]:
        raise ConfigError("forcing.mode must have dim entries")
    if "scheme" in resolved:
        if resolved["scheme"] not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")
        if not resolved["dt"] > 0:
            raise ConfigError("dt must be positive")
        if not resolved["t_end"] > 0:
            raise ConfigError("t_end must be positive")
        if resolved["init.kind"] not in INIT_KINDS:
            raise ConfigError(f"init.kind must be one of {INIT_KINDS}")
        if resolved["init.kind"] == "file" and not resolved["init.file"]:
            raise ConfigError("init.file is required when init.kind = file")
    if "steady.method" in resolved:
        if resolved["steady.method"] not in ("newton", "pseudo_time"):
            raise ConfigError("steady.method must be newton or pseudo_time")
        if not resolved["steady.tol"] > 0:
            raise ConfigError("steady.tol must be positive")
    if "sweep.amplitudes" in resolved:
        amps = resolved["sweep.amplitudes"]
        if any(a < 0 for a in amps) or any(
                b <= a for a, b in zip(amps, amps[1:])):
            raise ConfigError("sweep.amplitudes must be nonnegative and increasing")


def parse_config(text, command):
    """Resolve a config for a subcommand; returns (resolved dict, echo text).

    The echo is canonical: defaults inserted, keys sorted, values formatted
    so that parse_config(echo, command) reproduces the echo byte for byte.
    """
    if command not in _COMMAND_KEYS:
        raise ConfigError(f"unknown command {command!r}")
    keys = _COMMAND_KEYS[command]
    pairs = _read_pairs(text)
    unknown = sorted(set(pairs) - set(keys))
    if unknown:
        raise ConfigError(f"unknown key(s) for {command}: {', '.join(unknown)}")
    missing = [k for k in _COMMAND_REQUIRED[command] if k not in pairs]
    if missing:
        raise ConfigError(
            f"missing required key(s) for {command}: {', '.join(missing)}")

    resolved = {}
    for key in keys:
        parser, default = _SCHEMA[key]
        if key in pairs:
            resolved[key] = parser(pairs[key], key) if parser is not str else pairs[key]
        elif default is _REQUIRED:
            raise ConfigError(f"missing required key {key}")
        else:
            resolved[key] = default

    if "sample_dt" in resolved:
        dt, t_end = resolved["dt"], resolved["t_end"]
        if resolved["sample_dt"] is None:
            resolved["sample_dt"] = max(dt, t_end / 100.0)
        if not dt <= resolved["sample_dt"] <= t_end:
            raise ConfigError("need dt <= sample_dt <= t_end")
        # normalize to whole steps per sample and whole samples per run
        sps = max(1, int(round(resolved["sample_dt"] / dt)))
        resolved["sample_dt"] = sps * dt
        n_samples = max(1, int(round(t_end / dt)) // sps)
        resolved["t_end"] = n_samples * sps * dt
        if not dt <= resolved["sample_dt"] <= resolved["t_end"]:
            raise ConfigError("need dt <= sample_dt <= t_end")

    _validate(resolved)
    echo = "".join(f"{k} = {_fmt(resolved[k])}\n" for k in sorted(resolved))
    return resolved, echo


def build_sim_config(resolved):
    try:
        model = NonlinearityModel(a=resolved["model.a"], b=resolved["model.b"],
                                  r=resolved["model.r"],
                                  enabled=resolved["model.enabled"])
        forcing = ForcingSpec(kind=resolved["forcing.kind"],
                              amplitude=resolved["forcing.amplitude"],
                              seed=resolved["forcing.seed"],
                              mode=resolved["forcing.mode"])
        init = InitSpec(kind=resolved["init.kind"],
                        amplitude=resolved["init.amplitude"],
                        seed=resolved["init.seed"], file=resolved["init.file"])
        return SimConfig(dim=resolved["dim"], n=resolved["n"],
                         length=resolved["length"], model=model,
                         convective=resolved["convective"], forcing=forcing,
                         init=init, dt=resolved["dt"], t_end=resolved["t_end"],
                         scheme=resolved["scheme"],
                         sample_dt=resolved["sample_dt"])
    except ContractViolation as exc:
        raise ConfigError(str(exc)) from None


def apply_seed_override(resolved, seed):
    """Replace every role seed deterministically from one base seed."""
    if "forcing.seed" in resolved:
        resolved["forcing.seed"] = 10 * seed + 1
    if "init.seed" in resolved:
        resolved["init.seed"] = 10 * seed + 2
    if "verify.perturb_seed" in resolved:
        resolved["verify.perturb_seed"] = 10 * seed + 3
    return resolved


def _grid_model_forcing(resolved):
    from .spectral import Grid
    grid = Grid(resolved["dim"], resolved["n"], resolved["length"])
    model = NonlinearityModel(a=resolved["model.a"], b=resolved["model.b"],
                              r=resolved["model.r"],
                              enabled=resolved["model.enabled"])
    forcing = ForcingSpec(kind=resolved["forcing.kind"],
                          amplitude=resolved["forcing.amplitude"],
                          seed=resolved["forcing.seed"],
                          mode=resolved["forcing.mode"])
    return grid, model, build_forcing(grid, forcing)


def _write_json(path, payload):
    with open(path, "w") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _run_simulate(resolved, out_dir, jobs):
    config = build_sim_config(resolved)
    try:
        log = run_trajectory(config, store_fields=True)
    except NumericalFailure as exc:
        if exc.partial_log is not None:
            write_trajectory_csv(exc.partial_log,
                                 os.path.join(out_dir, "trajectory.csv"))
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    write_trajectory_csv(log, os.path.join(out_dir, "trajectory.csv"))
    write_checkpoint(log.checkpoints[-1][1],
                     os.path.join(out_dir, "final_state.bfld"))
    return 0


def _run_steady(resolved, out_dir, jobs):
    grid, model, g = _grid_model_forcing(resolved)
    try:
        sol = solve_steady(g, model, convective=resolved["convective"],
                           method=resolved["steady.method"],
                           tol=resolved["steady.tol"], grid=grid)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    write_checkpoint(sol.w, os.path.join(out_dir, "steady_w.bfld"))
    _write_json(os.path.join(out_dir, "steady_summary.json"), {
        "residual": sol.residual, "iterations": sol.iterations,
        "method": sol.method,
        "w_l2": sobolev_norm(sol.w, 0), "w_h1": sobolev_norm(sol.w, 1),
        "w_h2": sobolev_norm(sol.w, 2),
        "p_h1": scalar_sobolev_norm(grid, sol.p, 1),
    })
    return 0


def _run_sweep(resolved, out_dir, jobs):
    grid, model, g_shape = _grid_model_forcing(resolved)
    nrm = sobolev_norm(g_shape, 0)
    if nrm == 0:
        print("config error: sweep needs a nonzero forcing shape", file=sys.stderr)
        return 2
    g_shape.data /= nrm
    table = regularity_sweep(g_shape, resolved["sweep.amplitudes"], model,
                             convective=resolved["convective"],
                             tol=resolved["steady.tol"],
                             method=resolved["steady.method"], jobs=jobs)
    table.write_csv(os.path.join(out_dir, "sweep.csv"))
    _write_json(os.path.join(out_dir, "sweep_summary.json"), {
        "slope_h2_vs_l2": table.slope_h2_vs_l2,
        "energy_envelope_C": table.energy_envelope_C,
        "model_r": table.model_r,
        "rows": len(table.rows),
        "rows_converged": sum(1 for r in table.rows if r.converged),
    })
    return 0 if all(r.converged for r in table.rows) else 1


def _run_verify(resolved, out_dir, jobs, experiment):
    config = build_sim_config(resolved)
    perturb = PerturbSpec(amplitude=resolved["verify.perturb_amplitude"],
                          seed=resolved["verify.perturb_seed"],
                          kind=resolved["verify.perturb_kind"],
                          mode=resolved["verify.perturb_mode"])
    try:
        if experiment == "energy":
            report = verify_energy(config, out_dir,
                                   exact_tol=resolved["verify.exact_tol"],
                                   headroom=resolved["verify.headroom"])
        elif experiment == "lipschitz":
            report = verify_lipschitz(config, out_dir, perturb=perturb,
                                      exact_tol=resolved["verify.exact_tol"])
        elif experiment == "smoothing":
            report = verify_smoothing(config, out_dir,
                                      t_burn=resolved["verify.t_burn"],
                                      headroom=resolved["verify.headroom"])
        elif experiment == "lyapunov":
            report = verify_lyapunov(
                config, out_dir,
                equilibrium_tol=resolved["verify.equilibrium_tol"],
                slack=resolved["verify.slack"])
        elif experiment == "negnorm":
            report = verify_negative_norm(config, out_dir,
                                          exact_tol=resolved["verify.exact_tol"],
                                          headroom=resolved["verify.headroom"])
        elif experiment == "convective":
            report = verify_convective(config, out_dir, perturb=perturb,
                                       headroom=resolved["verify.headroom"],
                                       b_small=resolved["verify.b_small"],
                                       b_large=resolved["verify.b_large"])
        else:
            print(f"config error: unknown experiment {experiment}", file=sys.stderr)
            return 2
    except ContractViolation as exc:
        # an experiment rejecting its configuration is a config error
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    print(f"{report.experiment}: {'pass' if report.passed else 'fail'}")
    return 0 if report.passed else 1


def _run_oracle(resolved, out_dir, jobs):
    config = build_sim_config(resolved)
    try:
        report = oracle_check(config, out_dir, dts=resolved["oracle.dts"],
                              order_tol=resolved["oracle.order_tol"],
                              oracle_tol=resolved["oracle.tol"])
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    print(f"oracle: measured order {report.fitted['measured_order']:.3f} "
          f"({'pass' if report.passed else 'fail'})")
    return 0 if report.passed else 1


def _parser():
    p = argparse.ArgumentParser(prog="bflab",
                                description="Brinkman-Forchheimer spectral lab")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("simulate", "steady", "sweep", "oracle-check"):
        sp = sub.add_parser(name)
        _common_flags(sp)
    sp = sub.add_parser("verify")
    sp.add_argument("experiment", choices=EXPERIMENT_NAMES)
    _common_flags(sp)
    return p


def _common_flags(sp):
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", default=None)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--seed-override", type=int, default=None)


def main(argv=None):
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0

    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"config error: cannot read {args.config}: {exc}", file=sys.stderr)
        return 2

    try:
        resolved, echo = parse_config(text, args.command)
        if args.seed_override is not None:
            resolved = apply_seed_override(resolved, args.seed_override)
            _, echo = parse_config(
                "".join(f"{k} = {_fmt(v)}\n" for k, v in resolved.items()),
                args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out_dir = args.out if args.out is not None else resolved["out"]
    os.makedirs(out_dir, exist_ok=True)

    try:
        if args.command == "simulate":
            status = _run_simulate(resolved, out_dir, args.jobs)
        elif args.command == "steady":
            status = _run_steady(resolved, out_dir, args.jobs)
        elif args.command == "sweep":
            status = _run_sweep(resolved, out_dir, args.jobs)
        elif args.command == "verify":
            status = _run_verify(resolved, out_dir, args.jobs, args.experiment)
        else:
            status = _run_oracle(resolved, out_dir, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        status = 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        status = 1

    finished = datetime.datetime.now(datetime.timezone.utc).isoformat()
    artifacts = sorted(set(os.listdir(out_dir)) | {"manifest.json"})
    _write_json(os.path.join(out_dir, "manifest.json"), {
        "command": args.command,
        "config_path": os.path.abspath(args.config),
        "config_echo": echo,
        "out_dir": os.path.abspath(out_dir),
        "started": started,
        "finished": finished,
        "exit_status": status,
        "artifacts": artifacts,
    })
    return status


def cli_entry():
    sys.exit(main())


if __name__ == "__main__":
    cli_entry()
