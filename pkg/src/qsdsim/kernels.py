"""Compiled Euler-Maruyama inner loops.

Two variants: a banded one for the oscillator models, whose operators
only couple levels a few steps apart, and a dense fallback.  Both walk a
contiguous block of steps, write normalized states into preallocated
record slots, and report blowup or truncation leak through a status code
instead of raising (numba cannot raise our exception types).

Band storage: band[r, i] holds M[i, i + r - hw] for half width hw, so a
matrix-vector product touches 2*hw + 1 entries per row.

Pulse state is decided from the global step index in exact integer
arithmetic; floating point time never touches the on/off boundary.
"""

from __future__ import annotations

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_BLOWUP = 1
STATUS_LEAK = 2


def to_banded(mat: np.ndarray, hw: int) -> np.ndarray:
    """Pack a dense matrix into (2*hw+1, dim) band storage."""
    dim = mat.shape[0]
    band = np.zeros((2 * hw + 1, dim), dtype=np.complex128)
    for r in range(2 * hw + 1):
        for i in range(dim):
            j = i + r - hw
            if 0 <= j < dim:
                band[r, i] = mat[i, j]
    return band


def half_width(mat: np.ndarray, tol: float = 0.0) -> int:
    """Smallest hw such that entries beyond the hw-th diagonals vanish."""
    dim = mat.shape[0]
    hw = 0
    for i in range(dim):
        for j in range(dim):
            if abs(mat[i, j]) > tol:
                hw = max(hw, abs(i - j))
    return hw


@njit(cache=True)
def _band_matvec(band, hw, x, out):
    dim = x.shape[0]
    for i in range(dim):
        acc = 0.0 + 0.0j
        lo = -hw if i >= hw else -i
        hi = hw if i + hw < dim else dim - 1 - i
        for r in range(lo, hi + 1):
            acc += band[r + hw, i] * x[i + r]
        out[i] = acc
    return out


@njit(cache=True)
def em_banded(psi, drift_off, drift_on, lind, hw, dt, noise, step0, n_steps,
              n_off, n_on, has_pulse, stride, rec_states, rec_drift,
              leak_levels, leak_limit, blowup_limit):
    """Banded Euler-Maruyama block.

    psi is updated in place.  drift_off/on are the deterministic,
    state-independent parts -iH - 0.5 sum L^dag L for the two pulse
    phases, in band storage.  noise has shape (n_steps, n_channels).
    Records go to slot (g+1)//stride whenever (g+1) % stride == 0 with g
    the global step index.  Returns (status, global_step, leak_value).
    """
    dim = psi.shape[0]
    nch = lind.shape[0]
    period = n_off + n_on
    hpsi = np.empty(dim, np.complex128)
    lpsi = np.empty((nch, dim), np.complex128)
    ell = np.empty(nch, np.complex128)
    new = np.empty(dim, np.complex128)
    blow2 = blowup_limit * blowup_limit

    for k in range(n_steps):
        g = step0 + k
        on = has_pulse and (g % period) >= n_off
        if on:
            _band_matvec(drift_on, hw, psi, hpsi)
        else:
            _band_matvec(drift_off, hw, psi, hpsi)

        s2 = 0.0
        for c in range(nch):
            _band_matvec(lind[c], hw, psi, lpsi[c])
            acc = 0.0 + 0.0j
            for i in range(dim):
                acc += np.conj(psi[i]) * lpsi[c, i]
            ell[c] = acc
            s2 += acc.real * acc.real + acc.imag * acc.imag

        nrm2 = 0.0
        mx = 0.0
        for i in range(dim):
            d = hpsi[i] - 0.5 * s2 * psi[i]
            for c in range(nch):
                d += np.conj(ell[c]) * lpsi[c, i]
            v = psi[i] + dt * d
            for c in range(nch):
                v += (lpsi[c, i] - ell[c] * psi[i]) * noise[k, c]
            new[i] = v
            a2 = v.real * v.real + v.imag * v.imag
            nrm2 += a2
            if a2 > mx:
                mx = a2

        if mx > blow2 or not np.isfinite(nrm2):
            return STATUS_BLOWUP, g, 0.0
        nrm = np.sqrt(nrm2)
        inv = 1.0 / nrm
        for i in range(dim):
            psi[i] = new[i] * inv

        leak = 0.0
        for i in range(dim - leak_levels, dim):
            leak += psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
        if leak_limit > 0.0 and leak > leak_limit:
            return STATUS_LEAK, g, leak

        if (g + 1) % stride == 0:
            slot = (g + 1) // stride
            for i in range(dim):
                rec_states[slot, i] = psi[i]
            rec_drift[slot] = abs(nrm - 1.0)

    return STATUS_OK, step0 + n_steps - 1, 0.0


@njit(cache=True)
def em_dense(psi, drift_off, drift_on, lind, dt, noise, step0, n_steps,
             n_off, n_on, has_pulse, stride, rec_states, rec_drift,
             leak_levels, leak_limit, blowup_limit):
    """Dense-matrix twin of em_banded; same contract."""
    dim = psi.shape[0]
    nch = lind.shape[0]
    period = n_off + n_on
    lpsi = np.empty((nch, dim), np.complex128)
    ell = np.empty(nch, np.complex128)
    new = np.empty(dim, np.complex128)
    blow2 = blowup_limit * blowup_limit

    for k in range(n_steps):
        g = step0 + k
        on = has_pulse and (g % period) >= n_off
        if on:
            hpsi = drift_on @ psi
        else:
            hpsi = drift_off @ psi

        s2 = 0.0
        for c in range(nch):
            lpsi[c] = lind[c] @ psi
            acc = 0.0 + 0.0j
            for i in range(dim):
                acc += np.conj(psi[i]) * lpsi[c, i]
            ell[c] = acc
            s2 += acc.real * acc.real + acc.imag * acc.imag

        nrm2 = 0.0
        mx = 0.0
        for i in range(dim):
            d = hpsi[i] - 0.5 * s2 * psi[i]
            for c in range(nch):
                d += np.conj(ell[c]) * lpsi[c, i]
            v = psi[i] + dt * d
            for c in range(nch):
                v += (lpsi[c, i] - ell[c] * psi[i]) * noise[k, c]
            new[i] = v
            a2 = v.real * v.real + v.imag * v.imag
            nrm2 += a2
            if a2 > mx:
                mx = a2

        if mx > blow2 or not np.isfinite(nrm2):
            return STATUS_BLOWUP, g, 0.0
        nrm = np.sqrt(nrm2)
        inv = 1.0 / nrm
        for i in range(dim):
            psi[i] = new[i] * inv

        leak = 0.0
        for i in range(dim - leak_levels, dim):
            leak += psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
        if leak_limit > 0.0 and leak > leak_limit:
            return STATUS_LEAK, g, leak

        if (g + 1) % stride == 0:
            slot = (g + 1) // stride
            for i in range(dim):
                rec_states[slot, i] = psi[i]
            rec_drift[slot] = abs(nrm - 1.0)

    return STATUS_OK, step0 + n_steps - 1, 0.0
