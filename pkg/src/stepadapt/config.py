"""Experiment configuration: JSON schema, strict validation, round-trip.

The file is nested key/value JSON (UTF-8). Unknown keys are rejected at every
level. Absent meta step size defaults to 1e-3 and absent gamma to 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .base_opt import BaseConfig
from .blocks import BlockPartition
from .engine import EngineConfig, VARIANTS, W_THEN_BETA
from .errors import ConfigError
from .meta_opt import MetaConfig
from .stepsize import EXPONENTIAL, IDENTITY, StepSizeMap
from .tasks import StreamConfig

DEFAULT_ETA = 1e-3
DEFAULT_GAMMA = 1.0

FIXED_STEP = "fixed_step"
IDBD = "idbd"
HYPERGRADIENT = "hypergradient"
BASELINE_KINDS = (FIXED_STEP, IDBD, HYPERGRADIENT)


def _take(d: dict, where: str, allowed: dict):
    """Check keys of d against {name: required}; reject unknowns."""
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    for k, required in allowed.items():
        if required and k not in d:
            raise ConfigError(f"{where}: missing required key {k!r}")


def _parse_base(d: dict, where: str) -> BaseConfig:
    _take(d, where, {"kind": True, "rho": False, "lam": False, "kappa": False,
                     "c": False, "bias_correction": False, "momentum_timing": False})
    try:
        return BaseConfig(**d)
    except (TypeError, ConfigError) as e:
        raise ConfigError(f"{where}: {e}") from e


def _parse_meta(d: dict, where: str) -> MetaConfig:
    _take(d, where, {"kind": True, "eta": False, "rho_bar": False,
                     "lam_bar": False, "c_bar": False})
    d = dict(d)
    d.setdefault("eta", DEFAULT_ETA)
    try:
        return MetaConfig(**d)
    except (TypeError, ConfigError) as e:
        raise ConfigError(f"{where}: {e}") from e


@dataclass(frozen=True)
class MapSpec:
    kind: str = EXPONENTIAL
    blocks: object = "scalar"  # "scalar" | "weightwise" | int m | list of indices

    def resolve(self, n: int) -> StepSizeMap:
        b = self.blocks
        if b == "scalar":
            p = BlockPartition.scalar(n)
        elif b == "weightwise":
            p = BlockPartition.weightwise(n)
        elif isinstance(b, int):
            p = BlockPartition.contiguous(n, b)
        elif isinstance(b, (list, tuple)):
            import numpy as np
            a = np.asarray(b, dtype=np.int64)
            p = BlockPartition(a, int(a.max()) + 1)
        else:
            raise ConfigError(f"unsupported blocks spec {b!r}")
        return StepSizeMap(kind=self.kind, partition=p)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "blocks": self.blocks if not isinstance(self.blocks, tuple) else list(self.blocks)}


def _parse_map(d: dict, where: str) -> MapSpec:
    _take(d, where, {"kind": False, "blocks": False})
    kind = d.get("kind", EXPONENTIAL)
    if kind not in (EXPONENTIAL, IDENTITY):
        raise ConfigError(f"{where}: unknown map kind {kind!r}")
    blocks = d.get("blocks", "scalar")
    if isinstance(blocks, list):
        blocks = tuple(blocks)
    elif not (blocks in ("scalar", "weightwise") or isinstance(blocks, int)):
        raise ConfigError(f"{where}: blocks must be 'scalar', 'weightwise', an int, or a list")
    return MapSpec(kind=kind, blocks=blocks)


@dataclass(frozen=True)
class EngineSpec:
    variant: str
    gamma: float
    base: BaseConfig
    meta: MetaConfig
    map: MapSpec
    update_order: str = W_THEN_BETA
    diag_hessian: bool = False
    rectifier: bool = False
    exact_init: str = "auto"

    def build(self, n: int) -> EngineConfig:
        return EngineConfig(variant=self.variant, gamma=self.gamma, base=self.base,
                            meta=self.meta, map=self.map.resolve(n),
                            update_order=self.update_order, diag_hessian=self.diag_hessian,
                            rectifier=self.rectifier, exact_init=self.exact_init)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant, "gamma": self.gamma,
            "base": {k: getattr(self.base, k) for k in
                     ("kind", "rho", "lam", "kappa", "c", "bias_correction", "momentum_timing")},
            "meta": {k: getattr(self.meta, k) for k in
                     ("kind", "eta", "rho_bar", "lam_bar", "c_bar")},
            "map": self.map.to_dict(),
            "update_order": self.update_order, "diag_hessian": self.diag_hessian,
            "rectifier": self.rectifier, "exact_init": self.exact_init,
        }


def _parse_engine(d: dict) -> EngineSpec:
    _take(d, "engine", {"variant": True, "gamma": False, "base": True, "meta": True,
                        "map": False, "update_order": False, "diag_hessian": False,
                        "rectifier": False, "exact_init": False})
    if d["variant"] not in VARIANTS:
        raise ConfigError(f"engine.variant: unknown variant {d['variant']!r}")
    spec = EngineSpec(
        variant=d["variant"],
        gamma=float(d.get("gamma", DEFAULT_GAMMA)),
        base=_parse_base(d["base"], "engine.base"),
        meta=_parse_meta(d["meta"], "engine.meta"),
        map=_parse_map(d.get("map", {}), "engine.map"),
        update_order=d.get("update_order", W_THEN_BETA),
        diag_hessian=bool(d.get("diag_hessian", False)),
        rectifier=bool(d.get("rectifier", False)),
        exact_init=d.get("exact_init", "auto"),
    )
    if not 0.0 <= spec.gamma <= 1.0:
        raise ConfigError("engine.gamma: must lie in [0, 1]")
    return spec


@dataclass(frozen=True)
class BaselineSpec:
    kind: str
    alpha: float | None = None
    eta: float = DEFAULT_ETA
    base: BaseConfig = field(default_factory=BaseConfig)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "eta": self.eta,
               "base": {k: getattr(self.base, k) for k in
                        ("kind", "rho", "lam", "kappa", "c", "bias_correction", "momentum_timing")}}
        if self.alpha is not None:
            out["alpha"] = self.alpha
        return out


def _parse_baseline(d: dict) -> BaselineSpec:
    _take(d, "baseline", {"kind": True, "alpha": False, "eta": False, "base": False})
    kind = d["kind"]
    if kind not in BASELINE_KINDS:
        raise ConfigError(f"baseline.kind: unknown baseline {kind!r}")
    base = _parse_base(d.get("base", {"kind": "sgd"}), "baseline.base")
    alpha = d.get("alpha")
    if kind == FIXED_STEP:
        if alpha is None or float(alpha) <= 0:
            raise ConfigError("baseline.alpha: fixed_step needs alpha > 0")
        alpha = float(alpha)
    return BaselineSpec(kind=kind, alpha=alpha, eta=float(d.get("eta", DEFAULT_ETA)), base=base)


def _parse_stream(d: dict) -> StreamConfig:
    _take(d, "stream", {"kind": True, "dimension": True, "noise": False,
                        "switch_period": False, "seed": False, "hidden": False,
                        "classes": False, "batch_size": False})
    try:
        return StreamConfig(**d)
    except (TypeError, ConfigError) as e:
        raise ConfigError(f"stream: {e}") from e


@dataclass(frozen=True)
class ExperimentConfig:
    stream: StreamConfig
    steps: int
    seed: int
    alpha0: float
    engine: EngineSpec | None = None
    baseline: BaselineSpec | None = None
    sweep: dict = field(default_factory=dict)
    out: str | None = None

    def to_dict(self) -> dict:
        out = {
            "stream": {k: getattr(self.stream, k) for k in
                       ("kind", "dimension", "noise", "switch_period", "seed",
                        "hidden", "classes", "batch_size")},
            "steps": self.steps, "seed": self.seed, "alpha0": self.alpha0,
        }
        if self.engine is not None:
            out["engine"] = self.engine.to_dict()
        if self.baseline is not None:
            out["baseline"] = self.baseline.to_dict()
        if self.sweep:
            out["sweep"] = {k: list(v) for k, v in self.sweep.items()}
        if self.out is not None:
            out["out"] = self.out
        return out


def parse_config(data: dict) -> ExperimentConfig:
    _take(data, "config", {"engine": False, "baseline": False, "stream": True,
                           "steps": True, "seed": False, "alpha0": False,
                           "sweep": False, "out": False})
    if ("engine" in data) == ("baseline" in data):
        raise ConfigError("config: exactly one of 'engine' or 'baseline' is required")
    steps = data["steps"]
    if not isinstance(steps, int) or steps < 1:
        raise ConfigError("steps: must be an integer >= 1")
    alpha0 = float(data.get("alpha0", 1e-3))
    if alpha0 <= 0:
        raise ConfigError("alpha0: must be > 0")
    sweep = data.get("sweep", {})
    _take(sweep, "sweep", {"alpha0": False, "eta": False, "gamma": False})
    for k, v in sweep.items():
        if not isinstance(v, list) or not v:
            raise ConfigError(f"sweep.{k}: must be a non-empty list")
    return ExperimentConfig(
        stream=_parse_stream(data["stream"]),
        steps=steps,
        seed=int(data.get("seed", 0)),
        alpha0=alpha0,
        engine=_parse_engine(data["engine"]) if "engine" in data else None,
        baseline=_parse_baseline(data["baseline"]) if "baseline" in data else None,
        sweep={k: [float(x) for x in v] for k, v in sweep.items()},
        out=data.get("out"),
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as e:
        raise ConfigError(f"{path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: parse error at line {e.lineno} column {e.colno}: {e.msg}") from e
    return parse_config(data)


def dump_config(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)
