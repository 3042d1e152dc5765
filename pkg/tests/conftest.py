"""Shared fixtures.

The expensive reference runs are session scoped so the unit files and the
acceptance file pay for each of them once per pytest invocation.
"""

import time

import numpy as np
import pytest

from qsdsim import fock
from qsdsim.ensemble import run_ensemble
from qsdsim.fock import pure_density
from qsdsim.master import integrate_master
from qsdsim.scenarios import preset
from qsdsim.trajectory import TrajectoryConfig


@pytest.fixture(scope="session")
def driven_cavity_oracle_final():
    """Deterministic late-time photon number of the fig2 model at dim=100."""
    model, psi0, _ = preset("fig2")
    evo = integrate_master(model, pure_density(psi0), dt=5e-3, t_final=40.0,
                           record_stride=800)
    n_op = fock.number(model.dim)
    _, rho = evo[-1]
    return float(np.trace(rho.entries @ n_op.entries).real)


@pytest.fixture(scope="session")
def small_decay_ensemble():
    """Serial 2000-trajectory run of the dim-6 fig5 variant, with its oracle.

    Returns (ensemble result, oracle evolution, elapsed seconds). The tiny
    basis starts in its top level, so the truncation abort is switched off.
    """
    model, psi0, _ = preset("fig5", dim=6, n0=5)
    cfg = TrajectoryConfig(dt=1e-3, t_final=1.0, record_stride=100, seed=0,
                           leak_abort=None, observables=(fock.number(6),))
    start = time.perf_counter()
    result = run_ensemble(model, psi0, cfg, 2000, workers=1)
    elapsed = time.perf_counter() - start
    oracle = integrate_master(model, pure_density(psi0), dt=1e-3, t_final=1.0,
                              record_stride=100)
    return result, oracle, elapsed


@pytest.fixture(scope="session")
def collapse_ensemble():
    """1000 trajectories of the fig1 number-measurement preset."""
    model, psi0, cfg = preset("fig1")
    return run_ensemble(model, psi0, cfg, 1000, workers=4)


@pytest.fixture(scope="session")
def collapse_oracle():
    model, psi0, cfg = preset("fig1")
    return integrate_master(model, pure_density(psi0), cfg.dt, cfg.t_final,
                            cfg.record_stride)
