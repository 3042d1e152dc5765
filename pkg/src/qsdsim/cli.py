"""Command-line front end.

One verb per pipeline: run (trajectory or ensemble), oracle, classical,
poincare, plus list-scenarios and validate.  Errors leave as a single
JSON line on stderr carrying a machine-readable category, with the exit
code keyed to that category.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, fock
from .config import RunConfig, parse_config, resolve_run
from .ensemble import run_ensemble
from .errors import ConfigError, QsdError
from .master import integrate_master, trace_distance
from .noise import moment_suite
from .output import (emit_series, write_ensemble_series, write_oracle_series,
                     write_poincare)
from .scenarios import (PRESET_NAMES, integrate_classical, kaos_params,
                        poincare_section, preset)
from .trajectory import run_trajectory

OUT_DIR_ENV = "QSDSIM_OUT_DIR"

_EXIT_CODES = {
    "config": 2, "expression": 2, "dimension": 2, "hermiticity": 2,
    "invalid-step": 2, "blowup": 3, "truncation-leak": 3,
    "integrator-step-too-large": 3, "io": 4,
}

_SCENARIO_NOTES = {
    "fig1": "pure number measurement from a five-state superposition",
    "fig2": "driven damped cavity settling on a coherent state",
    "fig3": "zero-temperature damping of a number state",
    "fig4": "double-well localization with position-resolving damping",
    "fig5": "photon-counting cascade with slow decay",
    "kaos": "pulsed anharmonic oscillator for the classical limit",
}

_KAOS_PARAM_KEYS = ("anharmonicity", "damping", "amplitude",
                    "off_duration", "on_duration", "beta")
_KAOS_QUANTUM_KEYS = ("dim", "periods", "dt", "t_final", "record_stride",
                      "seed", "leak_abort")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qsdsim",
        description="Stochastic pure-state simulation of open quantum systems.")
    sub = parser.add_subparsers(dest="verb", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run document")
    common.add_argument("--scenario", choices=PRESET_NAMES,
                        help="built-in scenario (alternative to --config)")
    common.add_argument("--seed", type=int)
    common.add_argument("--trajectories", type=int)
    common.add_argument("--dt", type=float)
    common.add_argument("--t-final", type=float, dest="t_final")
    common.add_argument("--beta", type=float,
                        help="scaling parameter for the kaos scenario")
    common.add_argument("--out", help="output file path")
    common.add_argument("--format", choices=("csv", "jsonl"))
    common.add_argument("--discard-periods", type=int, dest="discard_periods")
    common.add_argument("--workers", type=int)

    sub.add_parser("list-scenarios", help="show built-in scenarios and defaults")
    sub.add_parser("run", parents=[common],
                   help="integrate trajectories (ensemble when --trajectories > 1)")
    sub.add_parser("oracle", parents=[common],
                   help="deterministic density-matrix reference run")
    sub.add_parser("classical", parents=[common],
                   help="classical section of the kaos scenario")
    sub.add_parser("poincare", parents=[common],
                   help="stroboscopic section of a quantum kaos run")
    val = sub.add_parser("validate", help="run the built-in invariant battery")
    val.add_argument("--seed", type=int, default=0)
    return parser


def _load_config(args) -> RunConfig:
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as err:
            raise ConfigError(f"cannot read config {args.config}: {err}") from err
        rc = parse_config(text)
        if args.scenario and rc.scenario != args.scenario:
            raise ConfigError("--scenario conflicts with the config document")
    elif args.scenario:
        rc = RunConfig(scenario=args.scenario)
    else:
        raise ConfigError("provide --config FILE or --scenario NAME")
    rc = rc.with_flags(seed=args.seed, trajectories=args.trajectories,
                       dt=args.dt, t_final=args.t_final, out=args.out,
                       format=args.format, discard_periods=args.discard_periods,
                       workers=args.workers)
    if args.beta is not None:
        rc = replace(rc, overrides={**rc.overrides, "beta": args.beta})
    return rc


def _out_path(rc: RunConfig, mode: str) -> str:
    ext = "csv" if rc.format == "csv" else "jsonl"
    name = rc.out or f"{rc.scenario or 'model'}_{mode}.{ext}"
    path = Path(name)
    if not path.is_absolute():
        path = Path(os.environ.get(OUT_DIR_ENV, ".")) / path
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    return str(path)


def _header(rc: RunConfig, mode: str, seed: int) -> dict:
    return {"tool": "qsdsim", "version": __version__, "mode": mode,
            "seed": seed, "config": rc.describe()}


def _echo(header: dict):
    print(f"qsdsim {header['version']} {header['mode']} seed={header['seed']}")


def _classical_parameters(rc: RunConfig):
    if rc.scenario != "kaos":
        raise ConfigError("classical and poincare modes run the kaos scenario")
    unknown = set(rc.overrides) - set(_KAOS_PARAM_KEYS) - set(_KAOS_QUANTUM_KEYS)
    if unknown:
        raise ConfigError(f"override(s) not meaningful here: {', '.join(sorted(unknown))}")
    taken = {k: rc.overrides[k] for k in _KAOS_PARAM_KEYS if k in rc.overrides}
    return kaos_params(**taken)


def run_command(rc: RunConfig, mode: str) -> int:
    """Execute one pipeline for a resolved configuration.

    Modes: trajectory, ensemble, oracle, classical, poincare.  Every
    output file starts with a header embedding the version, master seed
    and resolved settings, so the file alone reproduces the run.
    """
    if mode in ("trajectory", "ensemble", "oracle"):
        model, psi0, cfg = resolve_run(rc)
        header = _header(rc, mode, cfg.seed)
        _echo(header)
        path = _out_path(rc, mode)
        if mode == "trajectory":
            res = run_trajectory(model, psi0, cfg)
            emit_series(res, path, rc.format, header)
            print(f"wrote {path} ({len(res)} records)")
        elif mode == "ensemble":
            result = run_ensemble(model, psi0, cfg, rc.trajectories,
                                  workers=rc.workers)
            if model.dim <= 16 or rc.oracle_dt is not None:
                td = _oracle_distance(model, psi0, cfg, rc.oracle_dt, result)
                header["oracle_max_trace_distance"] = td
                print(f"oracle max trace distance {td:.6g} "
                      f"over {len(result.times)} times")
            write_ensemble_series(result, path, rc.format, header)
            print(f"wrote {path} ({rc.trajectories} trajectories)")
        else:
            dt = rc.oracle_dt or cfg.dt
            stride = _matched_stride(cfg, dt)
            evolution = integrate_master(model, fock.pure_density(psi0), dt,
                                         cfg.t_final, record_stride=stride)
            write_oracle_series(evolution, cfg.observables, path, rc.format, header)
            print(f"wrote {path} ({len(evolution)} records)")
        return 0

    if mode == "classical":
        params = _classical_parameters(rc)
        periods = int(rc.overrides.get("periods", 200))
        dt = rc.dt or rc.overrides.get("dt") or params.period / 9900
        t_final = rc.t_final or rc.overrides.get("t_final") or periods * params.period
        seed = rc.seed if rc.seed is not None else 0
        header = _header(rc, mode, seed)
        _echo(header)
        stride = max(1, round(params.period / dt))
        traj = integrate_classical(rc.initial_xi, params, dt, t_final,
                                   record_stride=stride)
        points = poincare_section(traj, params, discard=rc.discard_periods)
        path = _out_path(rc, mode)
        write_poincare(points, path, rc.format, header)
        print(f"wrote {path} ({len(points)} section points)")
        return 0

    if mode == "poincare":
        params = _classical_parameters(rc)
        model, psi0, cfg = resolve_run(rc)
        header = _header(rc, mode, cfg.seed)
        _echo(header)
        res = run_trajectory(model, psi0, cfg)
        points = poincare_section(res, params, discard=rc.discard_periods)
        path = _out_path(rc, mode)
        write_poincare(points, path, rc.format, header)
        print(f"wrote {path} ({len(points)} section points)")
        return 0

    raise ConfigError(f"unknown mode {mode!r}")


def _matched_stride(cfg, oracle_dt: float) -> int:
    """Oracle record stride landing on the trajectory record times."""
    span = cfg.record_stride * cfg.dt
    stride = round(span / oracle_dt)
    if stride < 1 or abs(stride * oracle_dt - span) > 1e-9 * max(1.0, span):
        raise ConfigError(
            f"oracle_dt {oracle_dt:g} does not divide the record spacing {span:g}")
    return stride


def _oracle_distance(model, psi0, cfg, oracle_dt, result) -> float:
    dt = oracle_dt or cfg.dt
    stride = _matched_stride(cfg, dt)
    evolution = integrate_master(model, fock.pure_density(psi0), dt,
                                 cfg.t_final, record_stride=stride)
    worst = 0.0
    for (t, rho), mean in zip(evolution, result.mean_density):
        worst = max(worst, trace_distance(rho, mean))
    return worst


def _list_scenarios() -> int:
    for name in PRESET_NAMES:
        model, psi0, cfg = preset(name)
        pulse = " pulsed" if model.pulse is not None else ""
        print(f"{name:6s} dim={model.dim:<4d} channels={model.channel_count}"
              f"{pulse}  dt={cfg.dt:g} t_final={cfg.t_final:g}")
        print(f"       {_SCENARIO_NOTES[name]}")
    return 0


def _validate(seed: int) -> int:
    failures = 0
    for name, fn in _VALIDATIONS:
        start = time.perf_counter()
        try:
            detail = fn(seed)
            ok = True
        except AssertionError as err:
            detail = str(err)
            ok = False
        elapsed = time.perf_counter() - start
        flag = "ok  " if ok else "FAIL"
        print(f"{flag} {name:32s} {elapsed:6.1f}s  {detail}")
        failures += 0 if ok else 1
    if failures:
        print(f"{failures} validation(s) failed")
        return 1
    print("all validations passed")
    return 0


def _check_noise(seed):
    checks = moment_suite(seed, samples=1_000_000)
    bad = [c for c in checks if not c.ok]
    assert not bad, f"failing moments: {bad}"
    return f"{len(checks)} moment checks"


def _check_eigenstate(seed):
    from .trajectory import OpenSystemModel, TrajectoryConfig
    dim = 8
    model = OpenSystemModel(dim=dim, hamiltonian=fock.OperatorMatrix(
        dim, np.zeros((dim, dim)), hermitian_hint=True, label="0"),
        lindblads=(fock.number(dim),))
    cfg = TrajectoryConfig(dt=1e-3, t_final=0.05, record_stride=50,
                           seed=seed, leak_abort=None)
    res = run_trajectory(model, fock.basis_state(dim, 3), cfg)
    drift = abs(fock.projector_fidelity(res.final_state, 3) - 1.0)
    assert drift < 1e-12, f"eigenstate drifted by {drift:.3e}"
    return f"fidelity change {drift:.1e}"


def _check_oracle(seed):
    model, psi0, cfg = preset("fig5", dim=6, n0=5, dt=1e-3, t_final=0.3,
                              record_stride=50, seed=seed, leak_abort=None)
    result = run_ensemble(model, psi0, cfg, 100)
    evolution = integrate_master(model, fock.pure_density(psi0), cfg.dt,
                                 cfg.t_final, record_stride=cfg.record_stride)
    worst = max(trace_distance(rho, mean)
                for (t, rho), mean in zip(evolution, result.mean_density))
    bound = 1e-2 + 5 / np.sqrt(100)
    assert worst <= bound, f"trace distance {worst:.3f} above {bound:.3f}"
    return f"max trace distance {worst:.4f} (bound {bound:.3f})"


def _check_scaling(seed):
    base = kaos_params()
    scaled = kaos_params(beta=2.0)
    t_final = 2 * base.period
    a = integrate_classical(-4 + 4j, base, 5e-3, t_final, record_stride=10)
    b = integrate_classical((-4 + 4j) / 2, scaled, 2.5e-3, t_final / 2,
                            record_stride=10)
    dev = float(np.max(np.abs(a.values - 2.0 * b.values)))
    assert dev <= 1e-6, f"scaled run deviates by {dev:.2e}"
    return f"sup-norm deviation {dev:.2e}"


def _check_determinism(seed):
    model, psi0, cfg = preset("fig5", dim=6, n0=5, dt=1e-3, t_final=0.2,
                              record_stride=20, seed=seed, leak_abort=None)
    one = run_ensemble(model, psi0, cfg, 60, workers=1)
    two = run_ensemble(model, psi0, cfg, 60, workers=2)
    assert np.array_equal(one.densities, two.densities), "densities differ"
    assert np.array_equal(one.mean_observables, two.mean_observables), "means differ"
    return "serial and 2-worker runs bitwise equal"


_VALIDATIONS = [
    ("noise moment suite", _check_noise),
    ("eigenstate stationarity", _check_eigenstate),
    ("ensemble vs oracle", _check_oracle),
    ("classical scaling", _check_scaling),
    ("scheduling determinism", _check_determinism),
]


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.verb == "list-scenarios":
            return _list_scenarios()
        if args.verb == "validate":
            return _validate(args.seed)
        rc = _load_config(args)
        if args.verb == "run":
            mode = "ensemble" if rc.trajectories > 1 else "trajectory"
        else:
            mode = args.verb
        return run_command(rc, mode)
    except QsdError as err:
        _fail(err.category, err)
        return _EXIT_CODES.get(err.category, 1)
    except OSError as err:
        _fail("io", err)
        return _EXIT_CODES["io"]
    except ValueError as err:
        _fail("error", err)
        return 1


def _fail(category: str, err: Exception):
    sys.stderr.write(json.dumps({"error": category, "message": str(err)}) + "\n")


if __name__ == "__main__":
    sys.exit(main())
