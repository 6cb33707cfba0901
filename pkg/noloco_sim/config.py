"""Experiment configuration: section dataclasses, validation and JSON/YAML persistence."""

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from pydantic import ConfigDict, TypeAdapter, ValidationError

from .errors import ConfigError
from .routing.plan import RoutingMode

logger = logging.getLogger(__name__)

_STRICT = ConfigDict(extra="forbid")


class Workload(str, Enum):
  """Training workload."""
  QUADRATIC = "quadratic"
  MLP = "mlp"


class InnerMethod(str, Enum):
  """Inner (fast-weight) optimizer."""
  SGD = "sgd"
  ADAM = "adam"


class ScheduleKind(str, Enum):
  """Inner learning-rate schedule."""
  CONSTANT = "constant"
  COSINE = "cosine"


class OuterMethod(str, Enum):
  """Outer (slow-weight) synchronization method."""
  NOLOCO = "noloco"
  DILOCO = "diloco"
  SYNC_DP = "sync-dp"
  NONE = "none"


# Outer hyper-parameters that differ between methods
METHOD_DEFAULTS: Dict[OuterMethod, Dict[str, float]] = {
  OuterMethod.NOLOCO: {"alpha": 0.5, "outer_interval": 50},
  OuterMethod.DILOCO: {"alpha": 0.3, "outer_interval": 100},
  OuterMethod.SYNC_DP: {"alpha": 0.0, "outer_interval": 1},
  OuterMethod.NONE: {"alpha": 0.0, "outer_interval": 1},
}


@dataclass
class InnerConfig:
  """Inner optimizer settings."""
  __pydantic_config__ = _STRICT

  method: InnerMethod = InnerMethod.SGD
  lr: float = 0.05
  clip_norm: Optional[float] = 1.0
  schedule: ScheduleKind = ScheduleKind.COSINE
  warmup_steps: int = 100
  floor_fraction: float = 0.1
  adam_beta1: float = 0.9
  adam_beta2: float = 0.999
  adam_eps: float = 1e-8
  reset_adam: bool = False


@dataclass
class OuterConfig:
  """Outer optimizer settings.

  ``alpha`` and ``outer_interval`` default per method; ``gamma`` defaults to the
  midpoint of the stability interval.
  """
  __pydantic_config__ = _STRICT

  method: OuterMethod = OuterMethod.NOLOCO
  alpha: Optional[float] = None
  beta: float = 0.7
  gamma: Optional[float] = None
  group_size: int = 2
  outer_interval: Optional[int] = None
  allow_unstable_gamma: bool = False

  def resolved(self) -> "OuterConfig":
    """Copy with every optional field filled in."""
    defaults = METHOD_DEFAULTS[self.method]
    alpha = defaults["alpha"] if self.alpha is None else self.alpha
    interval = int(defaults["outer_interval"]) if self.outer_interval is None else self.outer_interval
    gamma = self.gamma
    if gamma is None:
      if self.method == OuterMethod.NOLOCO and self.group_size >= 2:
        from .optimizers.outer import default_gamma
        gamma = default_gamma(alpha, self.group_size)
      else:
        gamma = 0.0
    return replace(self, alpha=alpha, gamma=gamma, outer_interval=interval)


@dataclass
class MLPConfig:
  """Staged MLP and teacher-data settings."""
  __pydantic_config__ = _STRICT

  in_dim: int = 8
  hidden: List[int] = field(default_factory=lambda: [32, 32, 32, 32])
  out_dim: int = 4
  teacher_hidden: List[int] = field(default_factory=lambda: [16])
  n_samples: int = 4096
  val_size: int = 256
  noise_std: float = 0.1
  init_scale: float = 1.0


@dataclass
class QuadraticConfig:
  """Random quadratic problem settings."""
  __pydantic_config__ = _STRICT

  dim: int = 8
  eig_min: float = 0.1
  eig_max: float = 1.0
  noise: float = 1.0
  init_scale: float = 1.0
  val_size: int = 256


@dataclass
class LatencyConfig:
  """Simulated wall clock for the ``sim_time`` metric."""
  __pydantic_config__ = _STRICT

  enabled: bool = False
  mu: float = 1.0
  sigma2: float = 0.5


@dataclass
class ExperimentConfig:
  """Main configuration container."""
  __pydantic_config__ = _STRICT

  workload: Workload = Workload.MLP
  stages: int = 2
  replicas: int = 4
  inner: InnerConfig = field(default_factory=InnerConfig)
  outer: OuterConfig = field(default_factory=OuterConfig)
  routing: RoutingMode = RoutingMode.RANDOM
  routing_period: int = 1
  steps: int = 2500
  seed: int = 0
  metrics_every: int = 10
  batch_size: int = 16
  mlp: MLPConfig = field(default_factory=MLPConfig)
  quadratic: QuadraticConfig = field(default_factory=QuadraticConfig)
  latency: LatencyConfig = field(default_factory=LatencyConfig)
  output: Optional[str] = None

  def to_dict(self) -> Dict[str, Any]:
    """Plain JSON-compatible dictionary."""
    return _plain(asdict(self))

  @classmethod
  def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
    """Parse and validate a configuration document."""
    try:
      config = _ADAPTER.validate_python(data or {})
    except ValidationError as e:
      first = e.errors()[0]
      path = ".".join(str(part) for part in first["loc"])
      raise ConfigError(first["msg"], field=path or None) from e
    validate_config(config)
    return config


_ADAPTER = TypeAdapter(ExperimentConfig)


def _plain(value: Any) -> Any:
  if isinstance(value, Enum):
    return value.value
  if isinstance(value, dict):
    return {k: _plain(v) for k, v in value.items()}
  if isinstance(value, (list, tuple)):
    return [_plain(v) for v in value]
  return value


def _require(condition: bool, field_path: str, message: str) -> None:
  if not condition:
    raise ConfigError(message, field=field_path)


def validate_config(config: ExperimentConfig) -> None:
  """Cross-field checks the type layer cannot express."""
  _require(config.stages >= 1, "stages", "must be at least 1")
  _require(config.replicas >= 1, "replicas", "must be at least 1")
  _require(config.steps >= 1, "steps", "must be at least 1")
  _require(config.metrics_every >= 1, "metrics_every", "must be at least 1")
  _require(
    config.metrics_every <= config.steps,
    "metrics_every",
    f"must not exceed steps ({config.steps})",
  )
  _require(config.batch_size >= 1, "batch_size", "must be at least 1")
  _require(config.routing_period >= 1, "routing_period", "must be at least 1")

  inner = config.inner
  _require(inner.lr > 0, "inner.lr", "must be positive")
  _require(inner.clip_norm is None or inner.clip_norm > 0, "inner.clip_norm", "must be positive")
  _require(inner.warmup_steps >= 0, "inner.warmup_steps", "must be non-negative")
  _require(0 < inner.floor_fraction <= 1, "inner.floor_fraction", "must lie in (0, 1]")
  _require(0 <= inner.adam_beta1 < 1, "inner.adam_beta1", "must lie in [0, 1)")
  _require(0 <= inner.adam_beta2 < 1, "inner.adam_beta2", "must lie in [0, 1)")

  raw_alpha = config.outer.alpha
  _require(raw_alpha is None or 0 <= raw_alpha < 1, "outer.alpha", "must lie in [0, 1)")
  outer = config.outer.resolved()
  _require(outer.beta > 0, "outer.beta", "must be positive")
  _require(outer.outer_interval >= 1, "outer.outer_interval", "must be at least 1")

  if outer.method in (OuterMethod.NOLOCO, OuterMethod.DILOCO):
    _require(
      config.steps >= outer.outer_interval,
      "steps",
      f"must be at least outer_interval ({outer.outer_interval})",
    )

  if outer.method == OuterMethod.NOLOCO:
    _require(outer.group_size >= 2, "outer.group_size", "must be at least 2")
    _require(
      config.replicas % outer.group_size == 0,
      "outer.group_size",
      f"must divide replicas ({config.replicas})",
    )
    if not outer.allow_unstable_gamma:
      from .optimizers.outer import gamma_bounds
      lo, hi = gamma_bounds(outer.alpha, outer.group_size)
      _require(
        lo < outer.gamma < hi,
        "outer.gamma",
        f"{outer.gamma} is outside the stability interval ({lo:.4f}, {hi:.4f})",
      )

  if config.workload == Workload.QUADRATIC:
    _require(config.stages == 1, "stages", "the quadratic workload has a single stage")
    _require(1 <= config.quadratic.dim, "quadratic.dim", "must be at least 1")
    _require(
      0 < config.quadratic.eig_min <= config.quadratic.eig_max,
      "quadratic.eig_min",
      "need 0 < eig_min <= eig_max",
    )
    _require(config.quadratic.noise >= 0, "quadratic.noise", "must be non-negative")
  else:
    hidden = len(config.mlp.hidden)
    _require(
      config.stages == 1 or hidden >= config.stages,
      "stages",
      f"cannot split {hidden} hidden layers into {config.stages} stages",
    )
    shard = config.mlp.n_samples // config.replicas
    _require(
      config.batch_size <= shard,
      "batch_size",
      f"exceeds the per-replica shard size ({shard})",
    )
    _require(config.mlp.noise_std >= 0, "mlp.noise_std", "must be non-negative")

  _require(config.latency.sigma2 >= 0, "latency.sigma2", "must be non-negative")


def load_config(config_path: Optional[Path] = None) -> ExperimentConfig:
  """Load configuration from a JSON or YAML file.

  JSON is read through the YAML parser; a missing file yields defaults.
  """
  if config_path is None or not Path(config_path).exists():
    if config_path is not None:
      logger.warning("Config file %s not found, using defaults", config_path)
    return ExperimentConfig()

  with open(config_path, "r") as f:
    try:
      data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
      raise ConfigError(f"cannot parse {config_path}: {e}") from e

  if not isinstance(data, dict):
    raise ConfigError(f"{config_path} must contain a mapping at the top level")
  return ExperimentConfig.from_dict(data)


def dump_config(config: ExperimentConfig, fmt: str = "json") -> str:
  """Serialize to JSON (default) or YAML text."""
  data = config.to_dict()
  if fmt == "json":
    return json.dumps(data, indent=2) + "\n"
  return yaml.dump(data, default_flow_style=False, sort_keys=False)


def save_config(config: ExperimentConfig, config_path: Path) -> None:
  """Save configuration; ``.json`` paths get JSON, everything else YAML."""
  from .harness.io import atomic_write_text

  config_path = Path(config_path)
  fmt = "json" if config_path.suffix.lower() == ".json" else "yaml"
  atomic_write_text(config_path, dump_config(config, fmt))
