"""Pipeline configuration: one flat JSON object, validated before any compute.

The cost weight defaults were tuned on held-out synthetic stacks, and the
lambda_n interval was chosen to run from over- to under-segmentation on them.
They are starting points, not calibrated values for real EM data.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .assignment_model import CostParams
from .image_model import SegmentationParams
from .segmentation import equidistant_lambdas
from .synthetic_data import SyntheticSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    # segmentation energy
    lambda_d: float = 1.0
    lambda_s: float = 0.5
    sigma: float = 0.15
    lambda_n_max: float = 3.0
    lambda_n_min: float = -2.5
    lambda_n_count: int = 34
    lambda_n_values: tuple[float, ...] | None = None
    # component trees
    tau: float = 0.5
    # assignment costs
    theta_l: float = 1.0
    theta_p: float = 0.5
    theta_s: float = 0.02
    theta_bp: float = 0.5
    theta_bs: float = 0.002
    theta_e: float = 0.03
    d_max: float = 10.0
    free_boundary: bool = False
    # data
    image_dir: str | None = None
    prob_dir: str | None = None
    gt_dir: str | None = None
    out_dir: str | None = None
    dark_is_foreground: bool = True
    synthetic: SyntheticSpec | None = None
    # execution
    threads: int = 1
    seed: int = 0
    node_budget: int = 10000

    def __post_init__(self):
        # ints given for float fields would otherwise serialize differently
        for f in fields(self):
            v = getattr(self, f.name)
            if type(f.default) is float and isinstance(v, int) and not isinstance(v, bool):
                object.__setattr__(self, f.name, float(v))
        if self.lambda_n_values is not None:
            object.__setattr__(self, "lambda_n_values", tuple(float(v) for v in self.lambda_n_values))
        try:
            self.segmentation_params()
            self.cost_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not self.tau > 0:
            raise ConfigError("tau must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.node_budget < 1:
            raise ConfigError("node_budget must be >= 1")

    def lambdas(self) -> tuple[float, ...]:
        if self.lambda_n_values is not None:
            if not self.lambda_n_values:
                raise ConfigError("lambda_n_values is empty")
            return self.lambda_n_values
        try:
            return equidistant_lambdas(self.lambda_n_max, self.lambda_n_min, self.lambda_n_count)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def segmentation_params(self) -> SegmentationParams:
        return SegmentationParams(self.lambda_d, self.lambda_s, self.sigma, self.lambdas())

    def cost_params(self) -> CostParams:
        return CostParams(self.theta_l, self.theta_p, self.theta_s, self.theta_bp, self.theta_bs,
                          self.theta_e, self.d_max, self.free_boundary)

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.lambda_n_values is not None:
            d["lambda_n_values"] = list(self.lambda_n_values)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(raw) - set(known))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        kw = {}
        for key, val in raw.items():
            if key == "synthetic":
                kw[key] = None if val is None else _synthetic(val)
            elif key == "lambda_n_values":
                if val is not None and not (isinstance(val, list) and all(_is_number(v) for v in val)):
                    raise ConfigError("lambda_n_values must be a list of numbers")
                kw[key] = val
            else:
                kw[key] = _coerce(key, val, known[key].default)
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def with_(self, **changes) -> "PipelineConfig":
        return replace(self, **changes)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _coerce(key, val, default):
    if isinstance(default, bool):
        if not isinstance(val, bool):
            raise ConfigError(f"{key} must be true or false")
        return val
    if isinstance(default, int):
        if not isinstance(val, int) or isinstance(val, bool):
            raise ConfigError(f"{key} must be an integer")
        return val
    if isinstance(default, float):
        if not _is_number(val):
            raise ConfigError(f"{key} must be a finite number")
        return float(val)
    if val is not None and not isinstance(val, str):
        raise ConfigError(f"{key} must be a string or null")
    return val


def _synthetic(raw) -> SyntheticSpec:
    if not isinstance(raw, dict):
        raise ConfigError("synthetic must be an object")
    known = {f.name: f for f in fields(SyntheticSpec)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"unknown synthetic keys: {', '.join(unknown)}")
    kw = {k: _coerce(f"synthetic.{k}", v, known[k].default) for k, v in raw.items()}
    try:
        return SyntheticSpec(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
