"""Stochastic pure-state integration.

One trajectory follows the Ito diffusion

    dpsi = drift(psi, t) dt + sum_j (L_j - <L_j>) psi dxi_j

with drift -iH psi - 1/2 sum_j (L_j^dag L_j + |l_j|^2 - 2 conj(l_j) L_j) psi,
l_j = <psi|L_j|psi>, followed by renormalization each step.  The ensemble
mean of |psi><psi| then reproduces the master equation handled by the
deterministic oracle module.

Aligned runs (step counts that tile the pulse phases exactly) go through
compiled kernels; anything else falls back to a plain per-step loop that
subdivides steps crossing a pulse edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .errors import BlowupError, DimensionError, HermiticityError, InvalidStepError, LeakError
from .fock import HERMITIAN_CHECK_ATOL, OperatorMatrix, StateVector, top_level_leak
from .noise import NoiseStream

BLOWUP_THRESHOLD = 1e6
LEAK_ABORT = 1e-3
LEAK_LEVELS = 5


@dataclass(frozen=True)
class PulseSchedule:
    """Rectangular pulse train: off for off_duration, then on at amplitude."""

    off_duration: float
    on_duration: float
    amplitude: float

    def __post_init__(self):
        if self.off_duration < 0:
            raise ValueError("off_duration must be >= 0")
        if self.on_duration <= 0:
            raise ValueError("on_duration must be > 0")

    @property
    def period(self) -> float:
        return self.off_duration + self.on_duration


def pulse_value(schedule: PulseSchedule, t: float) -> float:
    """Instantaneous drive amplitude; the off-to-on edge itself counts as on."""
    r = math.fmod(t, schedule.period)
    if r < 0.0:
        r += schedule.period
    return schedule.amplitude if r >= schedule.off_duration else 0.0


@dataclass(frozen=True)
class OpenSystemModel:
    """Hamiltonian, optional pulsed drive, and environment coupling operators.

    The instantaneous Hamiltonian is hamiltonian + F(t) * drive_op with
    F(t) from the pulse schedule (zero when there is no drive).
    """

    dim: int
    hamiltonian: OperatorMatrix
    lindblads: tuple = ()
    drive_op: OperatorMatrix | None = None
    pulse: PulseSchedule | None = None
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "lindblads", tuple(self.lindblads))
        for op in (self.hamiltonian, *self.lindblads, *((self.drive_op,) if self.drive_op is not None else ())):
            if op.dim != self.dim:
                raise DimensionError(f"operator dim {op.dim} does not match model dim {self.dim}")
        if (self.drive_op is None) != (self.pulse is None):
            raise ValueError("drive_op and pulse must be given together")
        self._check_hermitian(self.hamiltonian.entries, "static Hamiltonian")
        if self.drive_op is not None:
            h_on = self.hamiltonian.entries + self.pulse.amplitude * self.drive_op.entries
            self._check_hermitian(h_on, "Hamiltonian at full drive")

    @staticmethod
    def _check_hermitian(mat, what):
        dev = float(np.max(np.abs(mat - mat.conj().T)))
        if dev > HERMITIAN_CHECK_ATOL:
            raise HermiticityError(f"{what} deviates from hermitian by {dev:.3e}")

    @property
    def channel_count(self) -> int:
        return len(self.lindblads)

    def drive_value(self, t: float) -> float:
        if self.pulse is None:
            return 0.0
        return pulse_value(self.pulse, t)

    def hamiltonian_at(self, t: float) -> np.ndarray:
        h = self.hamiltonian.entries
        f = self.drive_value(t)
        if f != 0.0:
            h = h + f * self.drive_op.entries
        return h


@dataclass(frozen=True)
class TrajectoryConfig:
    """Step size, duration, recording cadence, seed, and tracked observables.

    leak_abort may be None to disable the truncation-leak abort, e.g. for
    deliberately tiny bases where the top levels are the whole state.
    """

    dt: float
    t_final: float
    record_stride: int = 1
    seed: int = 0
    observables: tuple = ()
    leak_abort: float | None = LEAK_ABORT
    blowup_threshold: float = BLOWUP_THRESHOLD

    def __post_init__(self):
        if not (self.dt > 0.0) or not math.isfinite(self.dt):
            raise InvalidStepError(f"dt must be positive and finite, got {self.dt}")
        if self.t_final < self.dt:
            raise InvalidStepError("t_final must be at least one step")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")
        object.__setattr__(self, "observables", tuple(self.observables))

    def step_count(self) -> int:
        n = int(round(self.t_final / self.dt))
        if abs(n * self.dt - self.t_final) > 1e-9 * max(1.0, abs(self.t_final)):
            raise InvalidStepError(
                f"t_final={self.t_final} is not an integer number of steps at dt={self.dt}")
        return n


@dataclass(frozen=True)
class TrajectoryRecord:
    t: float
    expectations: tuple
    variances: tuple
    norm_drift: float
    top_level_leak: float


def _hermitian_mask(observables) -> np.ndarray:
    mask = np.zeros(len(observables), dtype=bool)
    for k, op in enumerate(observables):
        dev = float(np.max(np.abs(op.entries - op.entries.conj().T))) if op.dim else 0.0
        mask[k] = dev <= HERMITIAN_CHECK_ATOL
    return mask


class TrajectoryResult:
    """Array-backed record of one run; behaves as a sequence of records."""

    def __init__(self, model, cfg, times, states, norm_drifts, final_amp):
        self.model = model
        self.cfg = cfg
        self.times = times
        self.states = states
        self.norm_drifts = norm_drifts
        self._final_amp = final_amp
        self.hermitian_mask = _hermitian_mask(cfg.observables)
        self.expectations, self.variances = _observables_over(states, cfg.observables, self.hermitian_mask)
        self.leaks = _leaks_over(states)

    @property
    def final_state(self) -> StateVector:
        return StateVector(self.states.shape[1], self._final_amp)

    @cached_property
    def records(self) -> list[TrajectoryRecord]:
        out = []
        for r in range(len(self.times)):
            out.append(TrajectoryRecord(
                t=float(self.times[r]),
                expectations=tuple(self.expectations[r]),
                variances=tuple(self.variances[r]),
                norm_drift=float(self.norm_drifts[r]),
                top_level_leak=float(self.leaks[r]),
            ))
        return out

    def __len__(self):
        return len(self.times)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return self.records[idx]
        return self.records[idx]

    def __iter__(self):
        return iter(self.records)

    def expectation_series(self, index: int) -> np.ndarray:
        return self.expectations[:, index]


def _observables_over(states, observables, mask):
    """Expectations (and variances for hermitian ops) at every record."""
    n_rec = states.shape[0]
    exps = np.zeros((n_rec, len(observables)), dtype=np.complex128)
    vars_ = np.zeros((n_rec, int(mask.sum())), dtype=np.float64)
    col = 0
    for k, op in enumerate(observables):
        applied = states @ op.entries.T
        exps[:, k] = np.sum(states.conj() * applied, axis=1)
        if mask[k]:
            second = np.sum(np.abs(applied) ** 2, axis=1)
            vars_[:, col] = second - exps[:, k].real ** 2
            col += 1
    return exps, vars_


def _leaks_over(states):
    levels = min(LEAK_LEVELS, states.shape[1])
    return np.sum(np.abs(states[:, states.shape[1] - levels:]) ** 2, axis=1)


def drift(psi: StateVector, model: OpenSystemModel, t: float = 0.0) -> np.ndarray:
    """Deterministic (dt-coefficient) part of the diffusion equation."""
    if psi.dim != model.dim:
        raise DimensionError(f"state dim {psi.dim} does not match model dim {model.dim}")
    amp = psi.amp
    out = -1j * (model.hamiltonian_at(t) @ amp)
    for op in model.lindblads:
        lamp = op.entries @ amp
        ell = np.vdot(amp, lamp)
        out += np.conj(ell) * lamp
        out -= 0.5 * (op.entries.conj().T @ lamp)
        out -= 0.5 * abs(ell) ** 2 * amp
    return out


def diffusion_vectors(psi: StateVector, model: OpenSystemModel) -> list[np.ndarray]:
    """Per-channel noise coefficient vectors (L_j - <L_j>) psi."""
    if psi.dim != model.dim:
        raise DimensionError(f"state dim {psi.dim} does not match model dim {model.dim}")
    amp = psi.amp
    out = []
    for op in model.lindblads:
        lamp = op.entries @ amp
        ell = np.vdot(amp, lamp)
        out.append(lamp - ell * amp)
    return out


def step(psi: StateVector, model: OpenSystemModel, t: float, dt: float,
         increments: np.ndarray) -> tuple[StateVector, float]:
    """One Euler-Maruyama step with renormalization.

    Returns the new state and the pre-renormalization norm drift |norm - 1|.
    """
    if len(increments) != model.channel_count:
        raise DimensionError(
            f"got {len(increments)} increments for {model.channel_count} channels")
    v = psi.amp + dt * drift(psi, model, t)
    for inc, vec in zip(increments, diffusion_vectors(psi, model)):
        v = v + inc * vec
    mx = float(np.max(np.abs(v)))
    if not np.isfinite(mx) or mx > BLOWUP_THRESHOLD:
        raise BlowupError(f"amplitude magnitude {mx:.3e} at t={t:.6g}", t=t)
    nrm = float(np.linalg.norm(v))
    return StateVector(psi.dim, v / nrm), abs(nrm - 1.0)


def _static_drift_matrix(model: OpenSystemModel) -> np.ndarray:
    a = -1j * model.hamiltonian.entries
    for op in model.lindblads:
        a = a - 0.5 * (op.entries.conj().T @ op.entries)
    return a


def _segment_plan(model: OpenSystemModel, cfg: TrajectoryConfig):
    """Integer pulse-phase step counts, or None if dt does not tile them."""
    if model.pulse is None:
        return 1, 0, False
    n_off = round(model.pulse.off_duration / cfg.dt)
    n_on = round(model.pulse.on_duration / cfg.dt)
    ok = (abs(n_off * cfg.dt - model.pulse.off_duration) <= 1e-9 * max(1.0, model.pulse.period)
          and abs(n_on * cfg.dt - model.pulse.on_duration) <= 1e-9 * max(1.0, model.pulse.period)
          and n_on > 0)
    if not ok:
        return None
    return n_off, n_on, True


_CHUNK_BUDGET = 1 << 22


def run_trajectory(model: OpenSystemModel, psi0: StateVector, cfg: TrajectoryConfig,
                   stream: NoiseStream | None = None,
                   trajectory_index: int | None = None) -> TrajectoryResult:
    """Integrate one trajectory and record observables every record_stride steps.

    Deterministic in (model, psi0, cfg.seed); an explicit stream overrides
    the seed, which is how ensemble members get their forked streams.
    """
    if psi0.dim != model.dim:
        raise DimensionError(f"state dim {psi0.dim} does not match model dim {model.dim}")
    n_steps = cfg.step_count()
    stride = int(cfg.record_stride)
    nch = model.channel_count
    if stream is None:
        stream = NoiseStream(cfg.seed, nch)

    n_rec = n_steps // stride + 1
    states = np.zeros((n_rec, model.dim), dtype=np.complex128)
    drifts = np.zeros(n_rec, dtype=np.float64)
    states[0] = psi0.amp
    times = np.arange(n_rec) * (stride * cfg.dt)

    plan = _segment_plan(model, cfg)
    if plan is None:
        final = _run_python(model, psi0, cfg, stream, n_steps, stride, states, drifts,
                            trajectory_index)
    else:
        n_off, n_on, has_pulse = plan
        final = _run_kernel(model, psi0, cfg, stream, n_steps, stride, states, drifts,
                            n_off, n_on, has_pulse, trajectory_index)
    return TrajectoryResult(model, cfg, times, states, drifts, final)


def _run_kernel(model, psi0, cfg, stream, n_steps, stride, states, drifts,
                n_off, n_on, has_pulse, trajectory_index):
    a_off = _static_drift_matrix(model)
    if has_pulse:
        a_on = a_off - 1j * model.pulse.amplitude * model.drive_op.entries
    else:
        a_on = a_off
    lind = np.stack([op.entries for op in model.lindblads]) if model.lindblads \
        else np.zeros((0, model.dim, model.dim), dtype=np.complex128)

    hw = max([kernels.half_width(a_off), kernels.half_width(a_on)]
             + [kernels.half_width(m) for m in lind])
    banded = (2 * hw + 1) * 2 <= model.dim
    if banded:
        a_off_k = kernels.to_banded(a_off, hw)
        a_on_k = kernels.to_banded(a_on, hw)
        lind_k = np.stack([kernels.to_banded(m, hw) for m in lind]) if len(lind) \
            else np.zeros((0, 2 * hw + 1, model.dim), dtype=np.complex128)
        runner = kernels.em_banded
    else:
        a_off_k, a_on_k, lind_k = a_off, a_on, lind
        runner = kernels.em_dense

    leak_levels = min(LEAK_LEVELS, model.dim)
    leak_limit = 0.0 if cfg.leak_abort is None else float(cfg.leak_abort)
    psi = psi0.amp.copy()
    chunk = max(1, _CHUNK_BUDGET // max(1, len(lind)))
    done = 0
    while done < n_steps:
        block = min(chunk, n_steps - done)
        noise = stream.sample_block(cfg.dt, block) if len(lind) else \
            np.zeros((block, 0), dtype=np.complex128)
        if banded:
            status, g, aux = runner(psi, a_off_k, a_on_k, lind_k, hw, cfg.dt, noise,
                                    done, block, n_off, n_on, has_pulse, stride,
                                    states, drifts, leak_levels, leak_limit,
                                    cfg.blowup_threshold)
        else:
            status, g, aux = runner(psi, a_off_k, a_on_k, lind_k, cfg.dt, noise,
                                    done, block, n_off, n_on, has_pulse, stride,
                                    states, drifts, leak_levels, leak_limit,
                                    cfg.blowup_threshold)
        if status == kernels.STATUS_BLOWUP:
            raise BlowupError(f"amplitude exceeded {cfg.blowup_threshold:.1e} at t={g * cfg.dt:.6g}",
                              t=g * cfg.dt, trajectory_index=trajectory_index)
        if status == kernels.STATUS_LEAK:
            raise LeakError(
                f"top-level probability {aux:.3e} exceeded {leak_limit:.1e} at "
                f"t={g * cfg.dt:.6g}; increase dim", t=g * cfg.dt, leak=aux)
        done += block
    return psi


def _run_python(model, psi0, cfg, stream, n_steps, stride, states, drifts, trajectory_index):
    """Reference path: per-step loop, subdividing steps that cross a pulse edge."""
    psi = psi0
    leak_levels = min(LEAK_LEVELS, model.dim)
    for g in range(n_steps):
        t0 = g * cfg.dt
        t1 = (g + 1) * cfg.dt
        edges = _edges_inside(model.pulse, t0, t1)
        drift_total = 0.0
        try:
            lo = t0
            for hi in edges + [t1]:
                sub = hi - lo
                if sub <= 0.0:
                    continue
                inc = stream.sample_increments(sub)
                psi, d = step(psi, model, lo, sub, inc)
                drift_total += d
                lo = hi
        except BlowupError as err:
            raise BlowupError(str(err), t=err.t, trajectory_index=trajectory_index) from None
        if cfg.leak_abort is not None:
            leak = top_level_leak(psi, leak_levels)
            if leak > cfg.leak_abort:
                raise LeakError(
                    f"top-level probability {leak:.3e} exceeded {cfg.leak_abort:.1e} at "
                    f"t={t1:.6g}; increase dim", t=t1, leak=leak)
        if (g + 1) % stride == 0:
            slot = (g + 1) // stride
            states[slot] = psi.amp
            drifts[slot] = drift_total
    return psi.amp


def _edges_inside(pulse: PulseSchedule | None, t0: float, t1: float) -> list[float]:
    if pulse is None:
        return []
    edges = []
    period = pulse.period
    k = math.floor(t0 / period)
    while k * period < t1:
        for edge in (k * period, k * period + pulse.off_duration):
            if t0 < edge < t1:
                edges.append(edge)
        k += 1
    return sorted(edges)
