"""Figure rendering: loss curves, step-size and beta trajectories.

Rendering is read-only over the record files, file order only affects legend
order. Emits both PNG and SVG next to the requested output stem; the
smoothing window is stamped in the figure footer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .reader import RecordTable, SchemaError, read_table

METRICS = ("loss", "alpha", "beta")


@dataclass(frozen=True)
class PlotSpec:
    records: tuple
    metric: str = "loss"
    smoothing: int = 1
    log_x: bool = False
    log_y: bool | None = None  # default: log-scale for step-size plots
    out: str = "figure"
    title: str | None = None

    def __post_init__(self):
        if self.metric not in METRICS:
            raise SchemaError(f"unknown metric {self.metric!r}")
        if self.smoothing < 1:
            raise SchemaError("smoothing window must be >= 1")
        if not self.records:
            raise SchemaError("at least one record file is required")

    @property
    def effective_log_y(self) -> bool:
        if self.log_y is None:
            return self.metric == "alpha"
        return self.log_y


def load_spec(path) -> PlotSpec:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    allowed = {"records", "metric", "smoothing", "log_x", "log_y", "out", "title"}
    unknown = set(data) - allowed
    if unknown:
        raise SchemaError(f"{path}: unknown spec key(s) {sorted(unknown)}")
    if "records" not in data or "out" not in data:
        raise SchemaError(f"{path}: spec needs 'records' and 'out'")
    data["records"] = tuple(data["records"])
    return PlotSpec(**data)


def smooth(y: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average; the first window-1 points average what exists."""
    n = y.size
    if window <= 1 or n == 0:
        return y
    w = min(window, n)
    c = np.cumsum(np.insert(y, 0, 0.0))
    out = np.empty_like(y)
    out[w - 1:] = (c[w:] - c[:n - w + 1]) / w
    for i in range(w - 1):
        out[i] = c[i + 1] / (i + 1)
    return out


def _curves(table: RecordTable, metric: str):
    """(label-suffix, x, y) triples for one record file."""
    if metric == "loss":
        return [("", table.step, table.loss)]
    values = table.alpha_blocks if metric == "alpha" else table.beta_blocks
    m = values.shape[1]
    if m == 1:
        return [("", table.step, values[:, 0])]
    return [(f" [block {j}]", table.step, values[:, j]) for j in range(m)]


def render(spec: PlotSpec) -> list[str]:
    """Render one figure; returns the written file paths (PNG and SVG)."""
    tables = [read_table(p) for p in spec.records]
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for t in tables:
        name = Path(t.path).stem
        for suffix, x, y in _curves(t, spec.metric):
            ax.plot(x, smooth(y, spec.smoothing), label=name + suffix, linewidth=1.2)
    ax.set_xlabel("step")
    ax.set_ylabel(spec.metric)
    if spec.log_x:
        ax.set_xscale("log")
    if spec.effective_log_y:
        ax.set_yscale("log")
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(fontsize=7, loc="best")
    ax.grid(True, alpha=0.3)
    fig.text(0.99, 0.01, f"smoothing window = {spec.smoothing}",
             ha="right", va="bottom", fontsize=6, color="0.4")
    out = Path(spec.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    paths = []
    for ext in ("png", "svg"):
        p = out.with_suffix(f".{ext}")
        fig.savefig(p, dpi=130, bbox_inches="tight")
        paths.append(str(p))
    plt.close(fig)
    return paths
