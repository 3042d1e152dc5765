"""Data emission: column layout, round-trip fidelity, formats."""

import json
import math

import numpy as np
import pytest

from qsdsim import fock
from qsdsim.output import emit_series, read_series, write_poincare
from qsdsim.scenarios import PoincarePoint
from qsdsim.trajectory import (OpenSystemModel, TrajectoryConfig,
                               TrajectoryRecord, run_trajectory)


def _tiny_run(seed=0):
    dim = 4
    model = OpenSystemModel(dim=dim, hamiltonian=fock.number(dim),
                            lindblads=(fock.annihilation(dim),))
    cfg = TrajectoryConfig(dt=1e-3, t_final=0.02, record_stride=5, seed=seed,
                           leak_abort=None,
                           observables=(fock.number(dim), fock.annihilation(dim)))
    return run_trajectory(model, fock.basis_state(dim, 2), cfg)


def test_csv_layout_and_roundtrip(tmp_path):
    res = _tiny_run()
    path = tmp_path / "series.csv"
    emit_series(res, path, header={"seed": 0})
    header, columns, data = read_series(path)
    assert header == {"seed": 0}
    # variance column appears only for the hermitian observable
    assert columns == ["t", "re_n", "im_n", "re_a", "im_a", "var_n",
                       "norm_drift", "leak"]
    assert np.array_equal(data["t"], res.times)
    assert np.array_equal(data["re_n"], res.expectations[:, 0].real)
    assert np.array_equal(data["im_a"], res.expectations[:, 1].imag)
    assert np.array_equal(data["var_n"], res.variances[:, 0])
    assert np.array_equal(data["norm_drift"], res.norm_drifts)


def test_seventeen_digit_roundtrip(tmp_path):
    # awkward doubles must survive the text round trip bit for bit
    values = [math.pi, 1.0 / 3.0, 2.0 ** -52, 1e17 + 1.0, -0.1]
    records = [TrajectoryRecord(t=v, expectations=(complex(v, -v),),
                                variances=(v * v,), norm_drift=abs(v),
                                top_level_leak=0.0)
               for v in values]
    path = tmp_path / "r.csv"
    emit_series(records, path)
    _, _, data = read_series(path)
    assert np.array_equal(data["t"], np.array(values))
    assert np.array_equal(data["var0"], np.array(values) ** 2)


def test_single_record_two_lines(tmp_path):
    rec = TrajectoryRecord(t=0.0, expectations=(1 + 0j,), variances=(0.0,),
                           norm_drift=0.0, top_level_leak=0.0)
    path = tmp_path / "one.csv"
    emit_series([rec], path)
    lines = path.read_text().splitlines()
    assert len(lines) == 2


def test_jsonl_keys_match_csv_columns(tmp_path):
    res = _tiny_run()
    csv_path = tmp_path / "s.csv"
    jl_path = tmp_path / "s.jsonl"
    emit_series(res, csv_path, header={"seed": 0})
    emit_series(res, jl_path, format="jsonl", header={"seed": 0})
    _, columns, data = read_series(csv_path)
    lines = jl_path.read_text().splitlines()
    assert json.loads(lines[0]) == {"header": {"seed": 0}}
    objs = [json.loads(line) for line in lines[1:]]
    assert len(objs) == len(res)
    for obj in objs:
        assert list(obj) == columns
    assert [o["re_n"] for o in objs] == list(data["re_n"])


def test_empty_series_rejected(tmp_path):
    with pytest.raises(ValueError):
        emit_series([], tmp_path / "never.csv")


def test_unknown_format_rejected(tmp_path):
    rec = TrajectoryRecord(t=0.0, expectations=(), variances=(),
                           norm_drift=0.0, top_level_leak=0.0)
    with pytest.raises(ValueError):
        emit_series([rec], tmp_path / "x.xml", format="xml")


def test_poincare_columns(tmp_path):
    pts = [PoincarePoint(re=0.5, im=-1.5, period_index=k) for k in range(3)]
    path = tmp_path / "p.csv"
    write_poincare(pts, path)
    _, columns, data = read_series(path)
    assert columns == ["period_index", "re", "im"]
    assert list(data["period_index"]) == [0.0, 1.0, 2.0]
    assert np.all(data["im"] == -1.5)


def test_identical_runs_identical_bytes(tmp_path):
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_series(_tiny_run(seed=3), p1, header={"seed": 3})
    emit_series(_tiny_run(seed=3), p2, header={"seed": 3})
    assert p1.read_bytes() == p2.read_bytes()
