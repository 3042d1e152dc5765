"""Ensemble reduction, Born statistics, and oracle cross-checks."""

import math

import numpy as np
import pytest

from qsdsim import fock
from qsdsim.ensemble import (BornTally, born_tally, observable_series,
                             run_ensemble)
from qsdsim.errors import BlowupError, DimensionError
from qsdsim.master import integrate_master, trace_distance
from qsdsim.scenarios import preset
from qsdsim.trajectory import OpenSystemModel, TrajectoryConfig


def _decay_setup(**overrides):
    model, psi0, _ = preset("fig5", dim=6, n0=5)
    cfg = TrajectoryConfig(observables=(fock.number(6),), leak_abort=None,
                           **overrides)
    return model, psi0, cfg


def test_single_trajectory_ensemble_is_rank_one():
    model, psi0, cfg = _decay_setup(dt=1e-3, t_final=0.1, record_stride=10, seed=2)
    res = run_ensemble(model, psi0, cfg, trajectory_count=1)
    assert res.trajectory_count == 1
    assert res.standard_errors is None
    for rho in res.mean_density:
        eigs = np.sort(np.linalg.eigvalsh(rho.entries))
        assert abs(eigs[-1] - 1.0) <= 1e-10
        assert np.max(np.abs(eigs[:-1])) <= 1e-10


def test_static_ensemble_reduces_to_initial_projector():
    dim = 6
    model = OpenSystemModel(dim=dim, hamiltonian=0.0 * fock.number(dim))
    cfg = TrajectoryConfig(dt=1e-2, t_final=0.1, record_stride=5, leak_abort=None)
    psi0 = fock.basis_state(dim, 2)
    res = run_ensemble(model, psi0, cfg, trajectory_count=5)
    want = fock.pure_density(psi0).entries
    for dens in res.densities:
        assert np.array_equal(dens, want)

    amp = np.zeros(dim)
    amp[0] = amp[1] = 1.0
    plus = fock.StateVector.from_amplitudes(amp)
    res = run_ensemble(model, plus, cfg, trajectory_count=5)
    for dens in res.densities:
        assert np.max(np.abs(dens - fock.pure_density(plus).entries)) <= 1e-15


def test_mean_density_tracks_oracle(small_decay_ensemble):
    res, oracle, _ = small_decay_ensemble
    for (t, rho_ref), rho in zip(oracle, res.mean_density):
        assert trace_distance(rho, rho_ref) <= 0.05, t


def test_mean_density_invariants(small_decay_ensemble):
    res, _, _ = small_decay_ensemble
    for rho in res.mean_density:
        assert abs(np.trace(rho.entries).real - 1.0) <= 1e-8
        rho.validate()


def test_oracle_agreement_on_thermalizing_cavity():
    model, psi0, _ = preset("fig3")
    cfg = TrajectoryConfig(dt=1e-3, t_final=3.0, record_stride=500, seed=0,
                           leak_abort=None)
    res = run_ensemble(model, psi0, cfg, trajectory_count=200, workers=4)
    oracle = integrate_master(model, fock.pure_density(psi0), dt=1e-3,
                              t_final=3.0, record_stride=500)
    bound = 1e-2 + 5.0 / math.sqrt(200)
    for (t, rho_ref), rho in zip(oracle, res.mean_density):
        assert trace_distance(rho, rho_ref) <= bound, t


def test_oracle_agreement_on_measurement_collapse(collapse_ensemble, collapse_oracle):
    bound = 1e-2 + 5.0 / math.sqrt(collapse_ensemble.trajectory_count)
    for (t, rho_ref), rho in zip(collapse_oracle, collapse_ensemble.mean_density):
        assert trace_distance(rho, rho_ref) <= bound, t


# ---------------------------------------------------------------------------
# Born statistics


def test_born_tally_of_settled_states():
    states = [fock.basis_state(8, 3) for _ in range(7)]
    tally = born_tally(states)
    assert tally.as_dict() == {"3": 7}
    assert tally.frequency(3) == 1.0
    assert tally.frequency(5) == 0.0


def test_born_threshold_range():
    states = [fock.basis_state(4, 0)]
    for bad in (0.5, 0.2, 1.0001):
        with pytest.raises(ValueError):
            born_tally(states, classify_threshold=bad)
    born_tally(states, classify_threshold=1.0)


def test_born_counts_must_sum():
    with pytest.raises(ValueError):
        BornTally(labels=("1", "2"), counts=(3, 4), total=8)


def test_born_frequencies_follow_initial_weights(collapse_ensemble):
    tally = born_tally(collapse_ensemble.final_states)
    table = tally.as_dict()
    unconverged = table.get("unconverged", 0)
    assert unconverged / tally.total <= 0.05
    for level in (1, 3, 5, 7, 9):
        assert abs(tally.frequency(level) - 0.2) <= 0.038
    assert set(table) <= {"1", "3", "5", "7", "9", "unconverged"}


# ---------------------------------------------------------------------------
# statistics of the reported uncertainties


def test_standard_error_shrinks_with_ensemble_size():
    model, psi0, cfg = _decay_setup(dt=1e-3, t_final=0.5, record_stride=50,
                                    seed=11)
    se = {}
    for m in (2000, 8000):
        res = run_ensemble(model, psi0, cfg, trajectory_count=m, workers=4)
        se[m] = res.standard_errors[1:, 0]
    ratio = np.median(se[2000] / se[8000])
    assert 1.6 <= ratio <= 2.4


def test_mean_occupation_within_four_standard_errors():
    model, psi0, _ = preset("fig5", dim=8, n0=5)
    cfg = TrajectoryConfig(dt=5e-4, t_final=10.0, record_stride=2000, seed=5,
                           leak_abort=None, observables=(fock.number(8),))
    res = run_ensemble(model, psi0, cfg, trajectory_count=200, workers=4)
    want = 5.0 * np.exp(-0.01 * res.times)
    dev = np.abs(res.mean_observables[:, 0].real - want)
    assert np.all(dev <= 4.0 * res.standard_errors[:, 0])


# ---------------------------------------------------------------------------
# scheduling and bookkeeping


def test_result_independent_of_worker_count():
    model, psi0, cfg = _decay_setup(dt=1e-3, t_final=0.2, record_stride=20, seed=9)
    serial = run_ensemble(model, psi0, cfg, trajectory_count=60)
    pooled = run_ensemble(model, psi0, cfg, trajectory_count=60, workers=3)
    assert np.array_equal(serial.densities, pooled.densities)
    assert np.array_equal(serial.mean_observables, pooled.mean_observables)
    assert np.array_equal(serial.standard_errors, pooled.standard_errors)
    for a, b in zip(serial.final_states, pooled.final_states):
        assert np.array_equal(a.amp, b.amp)


def test_observable_series_identity():
    model, psi0, cfg = _decay_setup(dt=1e-3, t_final=0.2, record_stride=20, seed=1)
    res = run_ensemble(model, psi0, cfg, trajectory_count=30)
    means, errors = observable_series(res, fock.identity(6))
    assert errors is None
    assert np.max(np.abs(means - 1.0)) <= 1e-8


def test_observable_series_tracked_versus_untracked():
    model, psi0, cfg = _decay_setup(dt=1e-3, t_final=0.2, record_stride=20, seed=1)
    res = run_ensemble(model, psi0, cfg, trajectory_count=50)
    means, errors = observable_series(res, fock.number(6))
    assert np.array_equal(means, res.mean_observables[:, 0])
    assert errors is not None
    untracked, no_err = observable_series(res, fock.annihilation(6))
    assert no_err is None
    assert untracked.shape == means.shape
    with pytest.raises(DimensionError):
        observable_series(res, fock.number(5))


def test_blowup_abort_names_trajectory_and_seed():
    dim = 4
    model = OpenSystemModel(dim=dim, hamiltonian=fock.number(dim))
    cfg = TrajectoryConfig(dt=1e6, t_final=1e6, seed=21, leak_abort=None)
    with pytest.raises(BlowupError) as err:
        run_ensemble(model, fock.basis_state(dim, 3), cfg, trajectory_count=4)
    assert "master seed 21" in str(err.value)
    assert err.value.trajectory_index == 0


def test_rejects_empty_ensemble():
    model, psi0, cfg = _decay_setup(dt=1e-3, t_final=0.1, record_stride=10)
    with pytest.raises(ValueError):
        run_ensemble(model, psi0, cfg, trajectory_count=0)
