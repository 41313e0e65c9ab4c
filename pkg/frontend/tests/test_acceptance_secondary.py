"""Secondary acceptance: render a real robustness sweep without error.

The sweep is produced through the run harness's public CLI and record-file
interfaces only; if the harness package is not installed this module skips.
"""

import importlib.util
import json
import subprocess
import sys
from pathlib import Path

import pytest

from stepplots import PlotSpec, render

HARNESS_AVAILABLE = importlib.util.find_spec("stepadapt") is not None

SWEEP_CONFIG = {
    "engine": {
        "variant": "hessian_free",
        "gamma": 1.0,
        "base": {"kind": "adamw", "kappa": 0.0},
        "meta": {"kind": "adam", "eta": 1e-3},
        "map": {"kind": "exponential", "blocks": "scalar"},
    },
    "stream": {"kind": "noisy_quadratic", "dimension": 20, "noise": 0.1, "seed": 101},
    "steps": 600,
    "seed": 9,
    "sweep": {"alpha0": [1e-6, 1e-5, 1e-4, 1e-3, 1e-2]},
}


@pytest.mark.skipif(not HARNESS_AVAILABLE, reason="run harness not installed")
def test_criterion_10_sweep_renders(tmp_path):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps(SWEEP_CONFIG))
    out_dir = tmp_path / "sweep_out"
    r = subprocess.run([sys.executable, "-m", "stepadapt.cli", "sweep",
                        "--config", str(cfg), "--out", str(out_dir)],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    files = sorted(str(p) for p in out_dir.glob("*.csv"))
    assert len(files) == 5

    alpha_fig = render(PlotSpec(records=tuple(files), metric="alpha",
                                smoothing=25, out=str(tmp_path / "alpha_overlay"),
                                title="step-size trajectories across initial values"))
    loss_fig = render(PlotSpec(records=tuple(files), metric="loss",
                               smoothing=50, out=str(tmp_path / "loss_curves")))
    for p in alpha_fig + loss_fig:
        assert Path(p).stat().st_size > 0
    # step-size overlay defaults to a log y axis
    assert PlotSpec(records=tuple(files), metric="alpha", out="x").effective_log_y
    print("\n[PASS] criterion 10: sweep rendered into log-y alpha overlay and loss curves "
          f"({len(files)} record files)")
