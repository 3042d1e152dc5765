"""Named scenario presets and the classical pulsed oscillator.

Six presets cover the standard demonstration systems: projective number
measurement (fig1), the driven damped cavity (fig2), a thermal bath
(fig3), a dissipative double well (fig4), jump-like energy decay (fig5),
and the pulsed anharmonic oscillator (kaos) together with its classical
counterpart and Poincare-section extraction.

Where the underlying description leaves details open (fig3 bath rates,
fig4 potential and dissipators, initial states), the choices here are
reconstructions; every number can be overridden.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit

from . import fock
from .errors import BlowupError, DimensionError
from .fock import OperatorMatrix, StateVector
from .trajectory import (OpenSystemModel, PulseSchedule, TrajectoryConfig,
                         TrajectoryResult, _edges_inside, pulse_value)

PRESET_NAMES = ("fig1", "fig2", "fig3", "fig4", "fig5", "kaos")

DEFAULT_DISCARD = 20


@dataclass(frozen=True)
class KaosParams:
    """Pulsed anharmonic oscillator parameters (base, unscaled set)."""

    anharmonicity: float = 0.004
    damping: float = 0.1
    amplitude: float = 2.0
    off_duration: float = 5.0
    on_duration: float = 4.9

    def __post_init__(self):
        # zero damping is allowed so the bare derivative can be evaluated
        # term by term; integrations of interest all use damping > 0
        if self.damping < 0:
            raise ValueError("damping must be >= 0")
        if self.off_duration + self.on_duration <= 0:
            raise ValueError("pulse period must be > 0")

    @property
    def period(self) -> float:
        return self.off_duration + self.on_duration

    def pulse(self) -> PulseSchedule:
        return PulseSchedule(self.off_duration, self.on_duration, self.amplitude)


def beta_scale(params: KaosParams, beta: float) -> KaosParams:
    """Scale phase-space extent by 1/beta: damping and anharmonicity grow,
    pulse durations shrink, the drive amplitude is unchanged."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return KaosParams(
        anharmonicity=params.anharmonicity * beta**3,
        damping=params.damping * beta,
        amplitude=params.amplitude,
        off_duration=params.off_duration / beta,
        on_duration=params.on_duration / beta,
    )


@dataclass(frozen=True)
class ClassicalState:
    """Phase-space point; re(xi) tracks position, im(xi) momentum."""

    xi: complex

    def __post_init__(self):
        if not (math.isfinite(self.xi.real) and math.isfinite(self.xi.imag)):
            raise ValueError(f"non-finite classical state {self.xi}")


@dataclass(frozen=True)
class PoincarePoint:
    re: float
    im: float
    period_index: int


def classical_rhs(state, t: float, params: KaosParams) -> complex:
    """dxi/dt = -damping/2 xi + F(t) - i chi xi^2 xi*."""
    xi = state.xi if isinstance(state, ClassicalState) else complex(state)
    f = pulse_value(params.pulse(), t)
    return -0.5 * params.damping * xi + f - 1j * params.anharmonicity * xi * xi * np.conj(xi)


@njit(cache=True)
def _rk4_classical(xi, dt, n_steps, n_off, n_on, gamma, chi, f0, stride, out):
    period = n_off + n_on
    for g in range(n_steps):
        f = f0 if (g % period) >= n_off else 0.0
        k1 = -0.5 * gamma * xi + f - 1j * chi * xi * xi * np.conj(xi)
        z = xi + 0.5 * dt * k1
        k2 = -0.5 * gamma * z + f - 1j * chi * z * z * np.conj(z)
        z = xi + 0.5 * dt * k2
        k3 = -0.5 * gamma * z + f - 1j * chi * z * z * np.conj(z)
        z = xi + dt * k3
        k4 = -0.5 * gamma * z + f - 1j * chi * z * z * np.conj(z)
        xi = xi + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        if not (np.isfinite(xi.real) and np.isfinite(xi.imag)):
            return g
        if (g + 1) % stride == 0:
            out[(g + 1) // stride] = xi
    return -1


class ClassicalTrajectory:
    """Uniformly sampled classical run; iterates as (t, ClassicalState)."""

    def __init__(self, times: np.ndarray, values: np.ndarray):
        self.times = times
        self.values = values

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        for t, v in zip(self.times, self.values):
            yield float(t), ClassicalState(complex(v))

    def __getitem__(self, idx):
        return float(self.times[idx]), ClassicalState(complex(self.values[idx]))


def integrate_classical(xi0, params: KaosParams, dt: float, t_final: float,
                        record_stride: int = 1) -> ClassicalTrajectory:
    """RK4 for the classical oscillator, steps aligned to the pulse edges."""
    xi = xi0.xi if isinstance(xi0, ClassicalState) else complex(xi0)
    cfg = TrajectoryConfig(dt=dt, t_final=t_final, record_stride=record_stride)
    n_steps = cfg.step_count()
    stride = int(record_stride)
    n_rec = n_steps // stride + 1
    out = np.zeros(n_rec, dtype=np.complex128)
    out[0] = xi
    times = np.arange(n_rec) * (stride * dt)

    n_off = round(params.off_duration / dt)
    n_on = round(params.on_duration / dt)
    aligned = (abs(n_off * dt - params.off_duration) <= 1e-9 * max(1.0, params.period)
               and abs(n_on * dt - params.on_duration) <= 1e-9 * max(1.0, params.period)
               and n_on > 0)
    if aligned:
        bad = _rk4_classical(xi, dt, n_steps, n_off, n_on, params.damping,
                             params.anharmonicity, params.amplitude, stride, out)
        if bad >= 0:
            raise BlowupError(f"classical state non-finite at t={bad * dt:.6g}", t=bad * dt)
    else:
        pulse = params.pulse()
        for g in range(n_steps):
            t0, t1 = g * dt, (g + 1) * dt
            lo = t0
            for hi in _edges_inside(pulse, t0, t1) + [t1]:
                h = hi - lo
                if h <= 0.0:
                    continue
                xi = _rk4_py(xi, lo, h, params)
                lo = hi
            if not (math.isfinite(xi.real) and math.isfinite(xi.imag)):
                raise BlowupError(f"classical state non-finite at t={t1:.6g}", t=t1)
            if (g + 1) % stride == 0:
                out[(g + 1) // stride] = xi
    return ClassicalTrajectory(times, out)


def _rk4_py(xi, t, h, params):
    k1 = classical_rhs(xi, t, params)
    k2 = classical_rhs(xi + 0.5 * h * k1, t, params)
    k3 = classical_rhs(xi + 0.5 * h * k2, t, params)
    k4 = classical_rhs(xi + h * k3, t, params)
    return xi + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


def poincare_section(source, params: KaosParams, discard: int = DEFAULT_DISCARD) -> list[PoincarePoint]:
    """Stroboscopic samples at integer multiples of the pulse period.

    Accepts a ClassicalTrajectory, a TrajectoryResult whose observables
    include the lowering operator (label "a"), or a (times, values) pair.
    One point per full period after the first ``discard`` periods.
    """
    times, values = _series_of(source)
    if len(times) < 2:
        raise ValueError("need at least two samples for a section")
    h = float(times[1] - times[0])
    k_per = round(params.period / h)
    if k_per < 1 or abs(k_per * h - params.period) > 0.5 * h:
        raise ValueError(
            f"record spacing {h:.6g} does not divide the pulse period {params.period:.6g}")
    points = []
    m = discard + 1
    while m * k_per < len(times):
        v = complex(values[m * k_per])
        points.append(PoincarePoint(re=v.real, im=v.imag, period_index=m))
        m += 1
    return points


def _series_of(source):
    if isinstance(source, ClassicalTrajectory):
        return source.times, source.values
    if isinstance(source, TrajectoryResult):
        for k, op in enumerate(source.cfg.observables):
            if getattr(op, "label", None) == "a":
                return source.times, source.expectations[:, k]
        raise ValueError('quantum source must track the lowering operator (label "a")')
    times, values = source
    return np.asarray(times, dtype=float), np.asarray(values)


def double_well_operators(dim: int, well_center: float = 8.0,
                          rate: float = 0.1) -> tuple[OperatorMatrix, OperatorMatrix]:
    """Independent damping into each well of a symmetric double well.

    Splits position space at zero with spectral projectors and damps each
    half toward the well bottom at +-well_center.
    """
    u, xs = fock.position_eigenbasis(dim)
    span = float(xs[-1])
    if span < 1.5 * well_center:
        raise DimensionError(
            f"dim={dim} spans positions only to {span:.2f}; "
            f"need at least {1.5 * well_center:.2f} for wells at +-{well_center}")
    nonneg = xs >= 0
    proj_plus = u[:, nonneg] @ u[:, nonneg].conj().T
    proj_minus = u[:, ~nonneg] @ u[:, ~nonneg].conj().T
    lower = (fock.position(dim).entries + 1j * fock.momentum(dim).entries) / math.sqrt(2.0)
    shift = (well_center / math.sqrt(2.0)) * np.eye(dim)
    root = math.sqrt(rate)
    l_plus = OperatorMatrix(dim, root * (proj_plus @ (lower - shift)), label="well+")
    l_minus = OperatorMatrix(dim, root * (proj_minus @ (lower + shift)), label="well-")
    return l_plus, l_minus


# ---------------------------------------------------------------------------
# preset construction


class _Overrides:
    def __init__(self, name, kwargs):
        self.name = name
        self.kw = dict(kwargs)

    def take(self, key, default):
        return self.kw.pop(key, default)

    def done(self):
        if self.kw:
            bad = ", ".join(sorted(self.kw))
            raise ValueError(f"unknown override(s) for preset {self.name!r}: {bad}")


def _zero_h(dim):
    return OperatorMatrix(dim, np.zeros((dim, dim)), hermitian_hint=True, label="0")


def _cfg(o, *, dt, t_final, record_stride, observables, leak_abort="default"):
    kw = dict(
        dt=o.take("dt", dt),
        t_final=o.take("t_final", t_final),
        record_stride=o.take("record_stride", record_stride),
        seed=o.take("seed", 0),
        observables=observables,
    )
    leak = o.take("leak_abort", leak_abort)
    if leak != "default":
        kw["leak_abort"] = leak
    return TrajectoryConfig(**kw)


def _build_fig1(o: _Overrides):
    dim = o.take("dim", 16)
    kappa = o.take("kappa", 1.0)
    n_op = fock.number(dim)
    model = OpenSystemModel(dim=dim, hamiltonian=_zero_h(dim),
                            lindblads=(kappa * n_op,), label="fig1")
    amp = np.zeros(dim, dtype=np.complex128)
    amp[[1, 3, 5, 7, 9]] = 1.0 / math.sqrt(5.0)
    psi0 = StateVector(dim, amp)
    cfg = _cfg(o, dt=2e-4, t_final=6.0, record_stride=10, observables=(n_op,))
    return model, psi0, cfg


def _build_fig2(o: _Overrides):
    dim = o.take("dim", 100)
    drive = o.take("drive", 2.0)
    damping = o.take("damping", 1.0)
    a_op = fock.annihilation(dim)
    h = (1j * drive * (fock.creation(dim) - a_op)).hermitized(label="H")
    model = OpenSystemModel(dim=dim, hamiltonian=h,
                            lindblads=(math.sqrt(damping) * a_op,), label="fig2")
    psi0 = fock.basis_state(dim, o.take("n0", 8))
    cfg = _cfg(o, dt=5e-4, t_final=24.0, record_stride=120,
               observables=(a_op, fock.number(dim), fock.position(dim), fock.momentum(dim)))
    return model, psi0, cfg


def _build_fig3(o: _Overrides):
    dim = o.take("dim", 16)
    damping = o.take("damping", 0.1)
    nbar = o.take("nbar", 0.0)
    a_op = fock.annihilation(dim)
    lind = [math.sqrt(damping * (nbar + 1.0)) * a_op]
    if nbar > 0.0:
        lind.append(math.sqrt(damping * nbar) * fock.creation(dim))
    model = OpenSystemModel(dim=dim, hamiltonian=fock.number(dim),
                            lindblads=tuple(lind), label="fig3")
    psi0 = fock.basis_state(dim, o.take("n0", 3))
    cfg = _cfg(o, dt=1e-3, t_final=60.0, record_stride=50,
               observables=(fock.number(dim), fock.position(dim), fock.momentum(dim)))
    return model, psi0, cfg


def _build_fig4(o: _Overrides):
    dim = o.take("dim", 256)
    well = o.take("well_center", 8.0)
    rate = o.take("rate", 0.1)
    q_op = fock.position(dim)
    p_op = fock.momentum(dim)
    lam = 1.0 / (8.0 * well * well)
    qq = q_op.entries @ q_op.entries
    v = qq - (well * well) * np.eye(dim)
    h = OperatorMatrix(dim, 0.5 * (p_op.entries @ p_op.entries) + lam * (v @ v)).hermitized(label="H")
    model = OpenSystemModel(dim=dim, hamiltonian=h,
                            lindblads=double_well_operators(dim, well, rate), label="fig4")
    psi0 = fock.basis_state(dim, 0)
    # the sharp well projectors feed a slowly decaying tail of high Fock
    # levels, so the truncation-leak abort would fire long before the
    # trajectory settles; leave it off and let users re-enable it
    cfg = _cfg(o, dt=1e-4, t_final=60.0, record_stride=1000,
               observables=(q_op, p_op, fock.number(dim)), leak_abort=None)
    return model, psi0, cfg


def _build_fig5(o: _Overrides):
    dim = o.take("dim", 100)
    measure = o.take("measure", 6.0)
    decay = o.take("decay", 0.1)
    n_op = fock.number(dim)
    model = OpenSystemModel(dim=dim, hamiltonian=_zero_h(dim),
                            lindblads=(measure * n_op, decay * fock.annihilation(dim)),
                            label="fig5")
    psi0 = fock.basis_state(dim, o.take("n0", 8))
    cfg = _cfg(o, dt=2e-4, t_final=100.0, record_stride=2500, observables=(n_op,))
    return model, psi0, cfg


def kaos_step_size(params: KaosParams, dim: int) -> float:
    """Step small enough for both accuracy and top-of-basis stability.

    The top basis level rotates at the anharmonic energy E_top; explicit
    stepping inflates its amplitude by (dt E_top)^2/2 per step, which must
    stay below the damping removed per step, giving dt < damping (dim-1)
    / E_top^2.  The result is snapped so both pulse phases are integer
    numbers of steps.
    """
    e_top = 0.5 * params.anharmonicity * (dim - 1) * (dim - 2)
    drive_span = params.amplitude * 2.0 * math.sqrt(dim)
    dt_rule = 0.05 / max(e_top + drive_span, params.damping * (dim - 1), 1.0)
    dt_stab = math.inf
    if e_top > 0:
        dt_stab = 0.8 * params.damping * (dim - 1) / (e_top * e_top)
    target = min(dt_rule, dt_stab)

    ratio = Fraction(params.off_duration / params.on_duration).limit_denominator(10**6)
    per_off = ratio.numerator
    k = max(1, math.ceil(params.off_duration / (per_off * target)))
    return params.off_duration / (per_off * k)


def _build_kaos(o: _Overrides):
    dim = o.take("dim", 64)
    beta = o.take("beta", 1.0)
    params = KaosParams(
        anharmonicity=o.take("anharmonicity", 0.004),
        damping=o.take("damping", 0.1),
        amplitude=o.take("amplitude", 2.0),
        off_duration=o.take("off_duration", 5.0),
        on_duration=o.take("on_duration", 4.9),
    )
    if beta != 1.0:
        params = beta_scale(params, beta)
    a_op = fock.annihilation(dim)
    adag = fock.creation(dim)
    h = (0.5 * params.anharmonicity) * (adag @ adag @ a_op @ a_op)
    h = h.hermitized(label="H")
    drive_op = (1j * (adag - a_op)).hermitized(label="drive")
    model = OpenSystemModel(
        dim=dim, hamiltonian=h,
        lindblads=(math.sqrt(params.damping) * a_op,),
        drive_op=drive_op, pulse=params.pulse(), label="kaos")
    psi0 = fock.basis_state(dim, 0)

    dt = o.take("dt", None)
    if dt is None:
        dt = kaos_step_size(params, dim)
    periods = o.take("periods", 200)
    t_final = o.take("t_final", None)
    if t_final is None:
        t_final = periods * params.period
    steps_per_period = round(params.period / dt)
    stride = o.take("record_stride", steps_per_period)
    cfg = TrajectoryConfig(dt=dt, t_final=t_final, record_stride=stride,
                           seed=o.take("seed", 0),
                           observables=(a_op, fock.number(dim)),
                           leak_abort=o.take("leak_abort", None))
    return model, psi0, cfg


_BUILDERS = {
    "fig1": _build_fig1,
    "fig2": _build_fig2,
    "fig3": _build_fig3,
    "fig4": _build_fig4,
    "fig5": _build_fig5,
    "kaos": _build_kaos,
}


def preset(name: str, **overrides) -> tuple[OpenSystemModel, StateVector, TrajectoryConfig]:
    """Concrete (model, initial state, config) for a named scenario."""
    if name not in _BUILDERS:
        known = ", ".join(PRESET_NAMES)
        raise ValueError(f"unknown preset {name!r}; expected one of {known}")
    o = _Overrides(name, overrides)
    model, psi0, cfg = _BUILDERS[name](o)
    o.done()
    return model, psi0, cfg


def kaos_params(**overrides) -> KaosParams:
    """The classical parameter set matching preset('kaos', **overrides)."""
    params = KaosParams(
        anharmonicity=overrides.get("anharmonicity", 0.004),
        damping=overrides.get("damping", 0.1),
        amplitude=overrides.get("amplitude", 2.0),
        off_duration=overrides.get("off_duration", 5.0),
        on_duration=overrides.get("on_duration", 4.9),
    )
    beta = overrides.get("beta", 1.0)
    if beta != 1.0:
        params = beta_scale(params, beta)
    return params
