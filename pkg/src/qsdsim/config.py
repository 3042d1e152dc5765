"""Run configuration: a strict JSON document resolved into models and settings.

Unknown keys are rejected outright instead of being ignored, because a
misspelled rate or duration would silently change the physics.  Operator
expressions are evaluated at parse time against the declared dimension so
a bad document fails before any integration starts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from . import fock
from .errors import ConfigError, QsdError
from .exprs import eval_expr
from .fock import StateVector
from .scenarios import PRESET_NAMES, DEFAULT_DISCARD, preset
from .trajectory import OpenSystemModel, PulseSchedule, TrajectoryConfig

_FORMATS = ("csv", "jsonl")

# Sentinel: distinguishes "key absent" from an explicit null.
_UNSET = object()


@dataclass(frozen=True)
class RunConfig:
    """Parsed document plus command-line overrides, ready to resolve."""

    scenario: str | None = None
    overrides: dict = field(default_factory=dict)
    model: OpenSystemModel | None = None
    psi0: StateVector | None = None
    observables: tuple = ()
    dt: float | None = None
    t_final: float | None = None
    record_stride: int | None = None
    seed: int | None = None
    leak_abort: object = _UNSET
    trajectories: int = 1
    out: str | None = None
    format: str = "csv"
    oracle_dt: float | None = None
    workers: int | None = None
    initial_xi: complex = 0j
    discard_periods: int = DEFAULT_DISCARD

    def with_flags(self, **updates) -> "RunConfig":
        """Overlay non-None command-line values on the parsed document."""
        live = {k: v for k, v in updates.items() if v is not None}
        return replace(self, **live) if live else self

    def describe(self) -> dict:
        """Resolved settings for output headers; everything JSON-safe."""
        out: dict = {}
        if self.scenario is not None:
            out["scenario"] = self.scenario
            if self.overrides:
                out["overrides"] = {k: v for k, v in sorted(self.overrides.items())}
        if self.model is not None:
            out["dim"] = self.model.dim
        # workers is deliberately absent: scheduling never changes the data,
        # so the header only records what does
        for key in ("dt", "t_final", "record_stride", "seed", "trajectories",
                    "format", "oracle_dt", "discard_periods"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        if self.leak_abort is not _UNSET:
            out["leak_abort"] = self.leak_abort
        if self.initial_xi:
            out["initial_xi"] = [self.initial_xi.real, self.initial_xi.imag]
        return out


class _StrictMap:
    """Dict wrapper that tracks consumption and rejects leftovers."""

    def __init__(self, mapping, context):
        if not isinstance(mapping, dict):
            raise ConfigError(f"{context} must be an object")
        self.mapping = dict(mapping)
        self.context = context

    def take(self, key, default=_UNSET):
        if key in self.mapping:
            return self.mapping.pop(key)
        return default

    def done(self):
        if self.mapping:
            bad = ", ".join(sorted(self.mapping))
            raise ConfigError(f"unknown key(s) in {self.context}: {bad}")


def _number(value, key, *, positive=False, nonnegative=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number")
    x = float(value)
    if positive and not x > 0:
        raise ConfigError(f"{key} must be positive")
    if nonnegative and x < 0:
        raise ConfigError(f"{key} must not be negative")
    return x

def _integer(value, key, *, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key} must be an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{key} must be at least {minimum}")
    return int(value)


def _expression(value, key, dim, label=None):
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be an operator expression string")
    try:
        return eval_expr(value, dim, label=label)
    except QsdError as err:
        raise ConfigError(f"{key}: {err}") from err


def _complex_value(value, key) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if (isinstance(value, list) and len(value) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        return complex(value[0], value[1])
    raise ConfigError(f"{key} must be a number or a [re, im] pair")


def _parse_inline_model(doc) -> tuple[OpenSystemModel, StateVector, tuple]:
    spec = _StrictMap(doc, "model")
    dim = _integer(spec.take("dim"), "model.dim", minimum=2)
    h_src = spec.take("hamiltonian")
    if h_src is _UNSET:
        raise ConfigError("model.hamiltonian is required")
    hamiltonian = _expression(h_src, "model.hamiltonian", dim, label="H")

    lindblads = []
    for i, src in enumerate(_string_list(spec.take("lindblads", []), "model.lindblads")):
        lindblads.append(_expression(src, f"model.lindblads[{i}]", dim))

    drive_op = None
    pulse = None
    drive_doc = spec.take("drive")
    if drive_doc is not _UNSET and drive_doc is not None:
        drive = _StrictMap(drive_doc, "model.drive")
        op_src = drive.take("operator")
        if op_src is _UNSET:
            raise ConfigError("model.drive.operator is required")
        drive_op = _expression(op_src, "model.drive.operator", dim, label="drive")
        pulse = PulseSchedule(
            off_duration=_number(drive.take("off_duration", 0.0),
                                 "model.drive.off_duration", nonnegative=True),
            on_duration=_number(drive.take("on_duration"), "model.drive.on_duration",
                                positive=True),
            amplitude=_number(drive.take("amplitude"), "model.drive.amplitude"),
        )
        drive.done()

    psi0 = _parse_initial_state(spec.take("initial_state", 0), dim)

    observables = tuple(
        _expression(src, f"model.observables[{i}]", dim, label=src)
        for i, src in enumerate(_string_list(spec.take("observables", ["n"]),
                                             "model.observables")))
    spec.done()

    try:
        model = OpenSystemModel(dim=dim, hamiltonian=hamiltonian,
                                lindblads=tuple(lindblads),
                                drive_op=drive_op, pulse=pulse, label="inline")
    except QsdError as err:
        raise ConfigError(f"model: {err}") from err
    return model, psi0, observables


def _string_list(value, key):
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ConfigError(f"{key} must be a list of expression strings")
    return value


def _parse_initial_state(value, dim) -> StateVector:
    if isinstance(value, int) and not isinstance(value, bool):
        if not 0 <= value < dim:
            raise ConfigError(f"model.initial_state {value} outside basis 0..{dim - 1}")
        return fock.basis_state(dim, value)
    if isinstance(value, dict):
        spec = _StrictMap(value, "model.initial_state")
        alpha = spec.take("coherent")
        if alpha is _UNSET:
            raise ConfigError("model.initial_state object needs a 'coherent' key")
        spec.done()
        return fock.coherent_state(dim, _complex_value(alpha, "model.initial_state.coherent"))
    raise ConfigError("model.initial_state must be a basis index or {\"coherent\": ...}")


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run document.

    Raises ConfigError with line and column for malformed JSON, and with
    the offending key path for schema violations.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON: {err.msg}",
                          line=err.lineno, column=err.colno) from err
    top = _StrictMap(doc, "config")

    scenario = top.take("scenario")
    model_doc = top.take("model")
    if scenario is not _UNSET and model_doc is not _UNSET:
        raise ConfigError("give either 'scenario' or 'model', not both")

    kw: dict = {}
    if scenario is not _UNSET:
        if scenario not in PRESET_NAMES:
            known = ", ".join(PRESET_NAMES)
            raise ConfigError(f"unknown scenario {scenario!r}; expected one of {known}")
        kw["scenario"] = scenario
        overrides = top.take("overrides", {})
        if not isinstance(overrides, dict):
            raise ConfigError("overrides must be an object")
        kw["overrides"] = dict(overrides)
    elif model_doc is not _UNSET:
        model, psi0, observables = _parse_inline_model(model_doc)
        kw.update(model=model, psi0=psi0, observables=observables)

    for key, parse in (
        ("dt", lambda v: _number(v, "dt", positive=True)),
        ("t_final", lambda v: _number(v, "t_final", positive=True)),
        ("record_stride", lambda v: _integer(v, "record_stride", minimum=1)),
        ("seed", lambda v: _integer(v, "seed", minimum=0)),
        ("trajectories", lambda v: _integer(v, "trajectories", minimum=1)),
        ("oracle_dt", lambda v: _number(v, "oracle_dt", positive=True)),
        ("workers", lambda v: _integer(v, "workers", minimum=1)),
        ("discard_periods", lambda v: _integer(v, "discard_periods", minimum=0)),
        ("initial_xi", lambda v: _complex_value(v, "initial_xi")),
    ):
        value = top.take(key)
        if value is not _UNSET:
            kw[key] = parse(value)

    leak = top.take("leak_abort")
    if leak is not _UNSET:
        kw["leak_abort"] = None if leak is None else _number(leak, "leak_abort", positive=True)

    out = top.take("out")
    if out is not _UNSET:
        if not isinstance(out, str):
            raise ConfigError("out must be a path string")
        kw["out"] = out

    fmt = top.take("format")
    if fmt is not _UNSET:
        if fmt not in _FORMATS:
            raise ConfigError(f"format must be one of {', '.join(_FORMATS)}")
        kw["format"] = fmt

    top.done()
    rc = RunConfig(**kw)
    if rc.scenario is None and rc.model is None:
        raise ConfigError("config needs a 'scenario' name or an inline 'model'")
    return rc


def resolve_run(rc: RunConfig) -> tuple[OpenSystemModel, StateVector, TrajectoryConfig]:
    """Concrete (model, initial state, trajectory settings) for a RunConfig."""
    if rc.scenario is not None:
        ov = dict(rc.overrides)
        for key in ("dt", "t_final", "record_stride", "seed"):
            value = getattr(rc, key)
            if value is not None:
                ov[key] = value
        if rc.leak_abort is not _UNSET:
            ov["leak_abort"] = rc.leak_abort
        try:
            return preset(rc.scenario, **ov)
        except (TypeError, ValueError, QsdError) as err:
            raise ConfigError(f"scenario {rc.scenario!r}: {err}") from err

    if rc.dt is None or rc.t_final is None:
        raise ConfigError("inline models need explicit dt and t_final")
    kw = dict(dt=rc.dt, t_final=rc.t_final,
              record_stride=rc.record_stride or 1,
              seed=rc.seed if rc.seed is not None else 0,
              observables=rc.observables)
    if rc.leak_abort is not _UNSET:
        kw["leak_abort"] = rc.leak_abort
    try:
        cfg = TrajectoryConfig(**kw)
    except QsdError as err:
        raise ConfigError(str(err)) from err
    return rc.model, rc.psi0, cfg
