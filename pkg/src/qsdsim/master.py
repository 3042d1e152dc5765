"""Deterministic density-matrix evolution, used as ground truth.

Classic RK4 on the master equation

    drho/dt = -i[H, rho] + sum_j (L_j rho L_j^dag
              - 1/2 L_j^dag L_j rho - 1/2 rho L_j^dag L_j)

with steps subdivided at pulse edges so H is exact on every stage.
Recorded matrices are checked against the DensityMatrix invariants;
a violation means the step was too large and raises instead of being
silently repaired.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, HermiticityError, IntegratorStepError
from .fock import DensityMatrix
from .trajectory import OpenSystemModel, TrajectoryConfig, _edges_inside


def lindblad_rhs(rho, model: OpenSystemModel, t: float = 0.0) -> np.ndarray:
    """Right-hand side of the master equation at time t, as a raw matrix."""
    r = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if r.shape != (model.dim, model.dim):
        raise DimensionError(
            f"density matrix shape {r.shape} does not match model dim {model.dim}")
    h = model.hamiltonian_at(t)
    out = -1j * (h @ r - r @ h)
    for op in model.lindblads:
        l_mat = op.entries
        lr = l_mat @ r
        out += lr @ l_mat.conj().T
        ldl = l_mat.conj().T @ l_mat
        out -= 0.5 * (ldl @ r + r @ ldl)
    return out


def _phase_matrices(model: OpenSystemModel):
    """K = -iH - 1/2 sum L^dag L for the off and on pulse phases."""
    k_off = -1j * model.hamiltonian.entries
    for op in model.lindblads:
        k_off = k_off - 0.5 * (op.entries.conj().T @ op.entries)
    if model.pulse is None:
        return k_off, k_off
    k_on = k_off - 1j * model.pulse.amplitude * model.drive_op.entries
    return k_off, k_on


def _rhs_fast(r, k_mat, lind):
    out = k_mat @ r + r @ k_mat.conj().T
    for l_mat in lind:
        out += l_mat @ r @ l_mat.conj().T
    return out


def _rk4(r, h, k_mat, lind):
    k1 = _rhs_fast(r, k_mat, lind)
    k2 = _rhs_fast(r + (0.5 * h) * k1, k_mat, lind)
    k3 = _rhs_fast(r + (0.5 * h) * k2, k_mat, lind)
    k4 = _rhs_fast(r + h * k3, k_mat, lind)
    return r + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


def integrate_master(model: OpenSystemModel, rho0: DensityMatrix, dt: float,
                     t_final: float, record_stride: int = 1) -> list[tuple[float, DensityMatrix]]:
    """Integrate and return [(t, rho)] every record_stride steps, t=0 included."""
    if rho0.dim != model.dim:
        raise DimensionError(f"state dim {rho0.dim} does not match model dim {model.dim}")
    cfg = TrajectoryConfig(dt=dt, t_final=t_final, record_stride=record_stride)
    n_steps = cfg.step_count()
    stride = int(record_stride)

    k_off, k_on = _phase_matrices(model)
    lind = [op.entries for op in model.lindblads]
    r = rho0.entries.copy()
    out = [(0.0, rho0)]

    for g in range(n_steps):
        t0 = g * dt
        t1 = (g + 1) * dt
        lo = t0
        for hi in _edges_inside(model.pulse, t0, t1) + [t1]:
            h = hi - lo
            if h <= 0.0:
                continue
            k_mat = k_on if model.drive_value(lo) != 0.0 else k_off
            r = _rk4(r, h, k_mat, lind)
            lo = hi
        if (g + 1) % stride == 0:
            out.append(((g + 1) * dt, _as_density(r, (g + 1) * dt)))
    return out


def _as_density(r: np.ndarray, t: float) -> DensityMatrix:
    try:
        rho = DensityMatrix(r.shape[0], r)
        rho.validate()
    except (ValueError, HermiticityError) as err:
        raise IntegratorStepError(
            f"recorded state at t={t:.6g} violates density-matrix invariants "
            f"({err}); reduce dt") from None
    return rho


def trace_distance(rho1, rho2) -> float:
    """Half the trace norm of the difference; 0 for equal, 1 for orthogonal."""
    r1 = rho1.entries if isinstance(rho1, DensityMatrix) else np.asarray(rho1)
    r2 = rho2.entries if isinstance(rho2, DensityMatrix) else np.asarray(rho2)
    if r1.shape != r2.shape:
        raise DimensionError(f"shape mismatch: {r1.shape} vs {r2.shape}")
    eigs = np.linalg.eigvalsh(r1 - r2)
    return 0.5 * float(np.sum(np.abs(eigs)))
