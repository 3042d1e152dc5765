"""Monte Carlo ensembles of diffusion trajectories.

Averaging the pure-state projectors over many runs reproduces the density
matrix evolved by the deterministic oracle.  The reducer here works in
fixed trajectory-index order with compensated summation, so the result is
bitwise identical whether the chunks ran serially or on a process pool.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import BlowupError, DimensionError
from .fock import DensityMatrix, OperatorMatrix, StateVector
from .noise import NoiseStream
from .trajectory import OpenSystemModel, TrajectoryConfig, run_trajectory

# Trajectories per work unit.  Also the batch size for standard errors, so
# changing it changes reported uncertainties (not means).
CHUNK = 25


class EnsembleResult:
    """Reduction of a trajectory ensemble at the recorded times.

    ``densities`` holds the raw mean projector stack (n_rec, dim, dim);
    ``mean_density`` wraps each slice in a checked DensityMatrix.
    ``standard_errors`` is None when fewer than two full batches of
    CHUNK trajectories were available.
    """

    def __init__(self, times, densities, mean_observables, standard_errors,
                 trajectory_count, observables, final_states):
        self.times = times
        self.densities = densities
        self.mean_observables = mean_observables
        self.standard_errors = standard_errors
        self.trajectory_count = trajectory_count
        self.observables = tuple(observables)
        self.final_states = tuple(final_states)

    @property
    def dim(self) -> int:
        return self.densities.shape[1]

    @cached_property
    def mean_density(self) -> tuple[DensityMatrix, ...]:
        return tuple(DensityMatrix(self.dim, m) for m in self.densities)

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class BornTally:
    """Counts of trajectories settled onto basis states.

    Labels are Fock indices as strings; a trailing "unconverged" label
    collects runs that never crossed the classification threshold, so the
    counts always sum to the ensemble size.
    """

    labels: tuple[str, ...]
    counts: tuple[int, ...]
    total: int

    def __post_init__(self):
        if sum(self.counts) != self.total:
            raise ValueError("tally counts must sum to the ensemble size")

    def as_dict(self) -> dict[str, int]:
        return dict(zip(self.labels, self.counts))

    def frequency(self, label: str) -> float:
        table = self.as_dict()
        return table.get(str(label), 0) / self.total


def _chunk_partials(model, psi0, cfg, start, count):
    """Sum projectors and tracked expectations over one block of indices."""
    base = NoiseStream(cfg.seed, model.channel_count)
    dens = None
    outer = None
    exps = None
    finals = np.empty((count, model.dim), dtype=np.complex128)
    for k in range(count):
        idx = start + k
        res = run_trajectory(model, psi0, cfg, stream=base.fork(idx),
                             trajectory_index=idx)
        if dens is None:
            dens = np.zeros((res.states.shape[0], model.dim, model.dim),
                            dtype=np.complex128)
            outer = np.empty_like(dens)
            exps = np.zeros_like(res.expectations)
        np.einsum("ri,rj->rij", res.states, res.states.conj(), out=outer)
        dens += outer
        exps += res.expectations
        finals[k] = res.final_state.amp
    return dens, exps, finals


def _chunk_worker(args):
    return _chunk_partials(*args)


def _kahan_add(total, comp, value):
    y = value - comp
    t = total + y
    comp[...] = (t - total) - y
    total[...] = t


def run_ensemble(model: OpenSystemModel, psi0: StateVector, cfg: TrajectoryConfig,
                 trajectory_count: int, workers: int | None = None) -> EnsembleResult:
    """Run ``trajectory_count`` trajectories off forked streams and reduce them.

    Trajectory i always uses fork(i) of the master stream and the partial
    sums are folded in index order, so the outcome does not depend on
    ``workers``.  A blown-up trajectory aborts the whole ensemble; the
    error names the trajectory index and the master seed.
    """
    m = int(trajectory_count)
    if m < 1:
        raise ValueError("trajectory_count must be at least 1")
    spans = [(s, min(CHUNK, m - s)) for s in range(0, m, CHUNK)]
    args = [(model, psi0, cfg, start, count) for start, count in spans]

    try:
        if workers is not None and workers > 1 and len(spans) > 1:
            with ProcessPoolExecutor(max_workers=int(workers)) as pool:
                reduced = _reduce(spans, pool.map(_chunk_worker, args))
        else:
            reduced = _reduce(spans, map(_chunk_worker, args))
    except BlowupError as err:
        raise BlowupError(f"{err} [master seed {cfg.seed}]", t=err.t,
                          trajectory_index=err.trajectory_index) from err

    dens_total, exps_total, batch_means, finals = reduced
    densities = dens_total / m
    means = exps_total / m
    if len(batch_means) >= 2:
        stack = np.stack(batch_means)
        b = stack.shape[0]
        spread = np.sum(np.abs(stack - stack.mean(axis=0)) ** 2, axis=0)
        errors = np.sqrt(spread / (b - 1) / b)
    else:
        errors = None

    n_rec = densities.shape[0]
    times = np.arange(n_rec) * (cfg.record_stride * cfg.dt)
    final_states = [StateVector(model.dim, amp) for block in finals for amp in block]
    return EnsembleResult(times, densities, means, errors, m,
                          cfg.observables, final_states)


def _reduce(spans, parts):
    dens_total = comp_d = exps_total = comp_e = None
    batch_means = []
    finals = []
    for (start, count), (dens, exps, fin) in zip(spans, parts):
        if dens_total is None:
            dens_total = np.zeros_like(dens)
            comp_d = np.zeros_like(dens)
            exps_total = np.zeros_like(exps)
            comp_e = np.zeros_like(exps)
        _kahan_add(dens_total, comp_d, dens)
        _kahan_add(exps_total, comp_e, exps)
        if count == CHUNK:
            batch_means.append(exps / CHUNK)
        finals.append(fin)
    return dens_total, exps_total, batch_means, finals


def born_tally(final_states, classify_threshold: float = 0.99) -> BornTally:
    """Classify settled trajectories by their dominant basis weight.

    A state lands on label k when its weight on basis state k exceeds the
    threshold; anything else is flagged unconverged rather than dropped.
    """
    if not 0.5 < classify_threshold <= 1.0:
        raise ValueError("classification threshold must lie in (0.5, 1]")
    states = list(final_states)
    counts: dict[int, int] = {}
    unconverged = 0
    for psi in states:
        weights = np.abs(psi.amp) ** 2
        k = int(np.argmax(weights))
        if weights[k] > classify_threshold:
            counts[k] = counts.get(k, 0) + 1
        else:
            unconverged += 1
    labels = tuple(str(k) for k in sorted(counts))
    tallies = tuple(counts[k] for k in sorted(counts))
    if unconverged:
        labels += ("unconverged",)
        tallies += (unconverged,)
    return BornTally(labels=labels, counts=tallies, total=len(states))


def observable_series(result: EnsembleResult, op: OperatorMatrix):
    """Ensemble mean (and standard error, if available) of one observable.

    Observables tracked during the run come back with their batch standard
    errors.  Anything else is evaluated as a trace against the mean
    density, for which no per-trajectory spread exists, so the error slot
    is None.
    """
    if op.entries.shape != (result.dim, result.dim):
        raise DimensionError(
            f"observable dim {op.entries.shape[0]} does not match ensemble dim {result.dim}")
    for j, tracked in enumerate(result.observables):
        if np.array_equal(tracked.entries, op.entries):
            if result.standard_errors is None:
                return result.mean_observables[:, j].copy(), None
            return result.mean_observables[:, j].copy(), result.standard_errors[:, j].copy()
    means = np.einsum("rij,ji->r", result.densities, op.entries)
    return means, None
