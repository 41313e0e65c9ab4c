"""Per-step run records and their CSV file format.

Fixed column order:

    step, loss, alpha_mean, alpha_block_0..alpha_block_{m-1},
    beta_block_0..beta_block_{m-1}, z_norm, switch, step_micros

Floats are written with 17 significant digits so a written file round-trips
to the exact float64 values. A run that aborted on a numeric error keeps its
completed rows and ends with one marker row (switch = -1, NaN metrics).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

ABORT_SWITCH = -1


@dataclass(frozen=True)
class RunRecord:
    step: int
    loss: float
    alpha_mean: float
    alpha_min: float
    alpha_max: float
    alpha_blocks: np.ndarray
    beta_blocks: np.ndarray
    z_norm: float
    switch: int
    step_micros: float

    @property
    def block_count(self) -> int:
        return len(self.alpha_blocks)


def header(m: int) -> list[str]:
    return (["step", "loss", "alpha_mean"]
            + [f"alpha_block_{j}" for j in range(m)]
            + [f"beta_block_{j}" for j in range(m)]
            + ["z_norm", "switch", "step_micros"])


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def record_row(r: RunRecord) -> list[str]:
    return ([str(r.step), _fmt(r.loss), _fmt(r.alpha_mean)]
            + [_fmt(a) for a in r.alpha_blocks]
            + [_fmt(b) for b in r.beta_blocks]
            + [_fmt(r.z_norm), str(r.switch), _fmt(r.step_micros)])


def abort_row(step: int, m: int) -> list[str]:
    nan = _fmt(float("nan"))
    return [str(step), nan, nan] + [nan] * (2 * m) + [nan, str(ABORT_SWITCH), _fmt(0.0)]


class RecordWriter:
    """Incremental CSV writer; rows hit the file as they are written.

    step_micros is written as 0 unless timing=True: wall time is the one
    nondeterministic record field, and files from identical (config, seed)
    pairs must be byte-identical by default. The in-memory records keep the
    real timing either way.
    """

    def __init__(self, path, m: int, timing: bool = False):
        self.path = path
        self.m = m
        self.timing = timing
        self._fh = open(path, "w", newline="")
        self._csv = csv.writer(self._fh)
        self._csv.writerow(header(m))
        self._fh.flush()

    def write(self, r: RunRecord):
        if r.block_count != self.m:
            raise DimensionError(f"record has {r.block_count} blocks, file expects {self.m}")
        row = record_row(r)
        if not self.timing:
            row[-1] = _fmt(0.0)
        self._csv.writerow(row)
        self._fh.flush()

    def write_abort(self, step: int):
        self._csv.writerow(abort_row(step, self.m))
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_records(path, records: list[RunRecord], abort_step: int | None = None,
                  timing: bool = False):
    m = records[0].block_count if records else 1
    with RecordWriter(path, m, timing=timing) as w:
        for r in records:
            w.write(r)
        if abort_step is not None:
            w.write_abort(abort_step)


def _parse_header(cols: list[str], path) -> int:
    mA = sum(1 for c in cols if c.startswith("alpha_block_"))
    mB = sum(1 for c in cols if c.startswith("beta_block_"))
    if mA == 0 or mA != mB or cols != header(mA):
        raise DimensionError(f"{path}: header does not match the record schema")
    return mA


def read_records(path) -> tuple[list[RunRecord], int | None]:
    """Read a record file; returns (records, abort step or None)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DimensionError(f"{path}: empty record file")
    m = _parse_header(rows[0], path)
    records: list[RunRecord] = []
    abort_step: int | None = None
    for row in rows[1:]:
        if len(row) != len(rows[0]):
            raise DimensionError(f"{path}: row with {len(row)} fields, expected {len(rows[0])}")
        switch = int(row[3 + 2 * m + 1])
        if switch == ABORT_SWITCH:
            abort_step = int(row[0])
            continue
        ab = np.array([float(x) for x in row[3:3 + m]])
        bb = np.array([float(x) for x in row[3 + m:3 + 2 * m]])
        records.append(RunRecord(
            step=int(row[0]), loss=float(row[1]), alpha_mean=float(row[2]),
            alpha_min=float(ab.min()), alpha_max=float(ab.max()),
            alpha_blocks=ab, beta_blocks=bb,
            z_norm=float(row[3 + 2 * m]), switch=switch,
            step_micros=float(row[3 + 2 * m + 2]),
        ))
    return records, abort_step


