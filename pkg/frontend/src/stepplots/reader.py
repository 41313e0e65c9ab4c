"""Record-file parsing against the shared CSV schema.

The schema is the external contract with the run harness:

    step, loss, alpha_mean, alpha_block_0..alpha_block_{m-1},
    beta_block_0..beta_block_{m-1}, z_norm, switch, step_micros

A trailing abort-marker row carries switch = -1 and is dropped from the
plotted data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

ABORT_SWITCH = -1


class SchemaError(ValueError):
    """Record file does not match the expected column layout."""


@dataclass(frozen=True)
class RecordTable:
    path: str
    step: np.ndarray
    loss: np.ndarray
    alpha_mean: np.ndarray
    alpha_blocks: np.ndarray  # (rows, m)
    beta_blocks: np.ndarray   # (rows, m)
    z_norm: np.ndarray
    switch: np.ndarray
    aborted: bool

    @property
    def block_count(self) -> int:
        return self.alpha_blocks.shape[1]


def expected_header(m: int) -> list[str]:
    return (["step", "loss", "alpha_mean"]
            + [f"alpha_block_{j}" for j in range(m)]
            + [f"beta_block_{j}" for j in range(m)]
            + ["z_norm", "switch", "step_micros"])


def read_table(path) -> RecordTable:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty record file")
    cols = rows[0]
    m = sum(1 for c in cols if c.startswith("alpha_block_"))
    if m == 0 or cols != expected_header(m):
        raise SchemaError(f"{path}: header does not match the record schema")
    data, aborted = [], False
    for row in rows[1:]:
        if len(row) != len(cols):
            raise SchemaError(f"{path}: row with {len(row)} fields, expected {len(cols)}")
        if int(row[3 + 2 * m + 1]) == ABORT_SWITCH:
            aborted = True
            continue
        data.append(row)
    if not data:
        raise SchemaError(f"{path}: no data rows")
    arr = np.asarray(data, dtype=np.float64)
    return RecordTable(
        path=str(path),
        step=arr[:, 0].astype(np.int64),
        loss=arr[:, 1],
        alpha_mean=arr[:, 2],
        alpha_blocks=arr[:, 3:3 + m],
        beta_blocks=arr[:, 3 + m:3 + 2 * m],
        z_norm=arr[:, 3 + 2 * m],
        switch=arr[:, 3 + 2 * m + 1].astype(np.int64),
        aborted=aborted,
    )
