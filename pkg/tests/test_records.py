import numpy as np
import pytest

from stepadapt.errors import DimensionError
from stepadapt.records import (RecordWriter, RunRecord, header, read_records,
                               write_records)


def make_record(step, m=2):
    rng = np.random.default_rng(step)
    ab = np.abs(rng.normal(size=m)) * 1e-3
    bb = np.log(ab)
    return RunRecord(step=step, loss=rng.normal() ** 2, alpha_mean=float(ab.mean()),
                     alpha_min=float(ab.min()), alpha_max=float(ab.max()),
                     alpha_blocks=ab, beta_blocks=bb, z_norm=abs(rng.normal()),
                     switch=1 if step % 10 == 0 and step else 0,
                     step_micros=rng.uniform(1, 100))


def test_header_column_order():
    assert header(2) == ["step", "loss", "alpha_mean", "alpha_block_0", "alpha_block_1",
                         "beta_block_0", "beta_block_1", "z_norm", "switch", "step_micros"]


def test_roundtrip_is_float_exact(tmp_path):
    recs = [make_record(t) for t in range(25)]
    path = tmp_path / "r.csv"
    write_records(path, recs, timing=True)
    back, abort = read_records(path)
    assert abort is None
    assert len(back) == len(recs)
    for a, b in zip(recs, back):
        assert a.step == b.step and a.switch == b.switch
        assert a.loss == b.loss and a.z_norm == b.z_norm
        np.testing.assert_array_equal(a.alpha_blocks, b.alpha_blocks)
        np.testing.assert_array_equal(a.beta_blocks, b.beta_blocks)
        assert a.step_micros == b.step_micros


def test_abort_marker_row(tmp_path):
    recs = [make_record(t) for t in range(5)]
    path = tmp_path / "r.csv"
    write_records(path, recs, abort_step=5)
    text = path.read_text().strip().splitlines()
    assert len(text) == 1 + 5 + 1  # header + rows + marker
    back, abort = read_records(path)
    assert abort == 5 and len(back) == 5


def test_incremental_writer_flushes_each_row(tmp_path):
    path = tmp_path / "r.csv"
    with RecordWriter(path, 2) as w:
        w.write(make_record(0))
        mid = path.read_text().strip().splitlines()
        assert len(mid) == 2
        w.write(make_record(1))
    assert len(path.read_text().strip().splitlines()) == 3


def test_block_count_mismatch_rejected(tmp_path):
    with RecordWriter(tmp_path / "r.csv", 3) as w:
        with pytest.raises(DimensionError):
            w.write(make_record(0, m=2))


def test_schema_mismatch_on_read(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("step,loss,nonsense\n0,1.0,2.0\n")
    with pytest.raises(DimensionError):
        read_records(p)
