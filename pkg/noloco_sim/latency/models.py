"""Log-normal latency models and the simulated fleet."""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from ..errors import InvalidParameterError
from ..numerics.rng import RngStream, sample_lognormal


@dataclass(frozen=True)
class LatencyModel:
  """Durations exp(g) with g ~ N(mu, sigma2)."""
  mu: float = 1.0
  sigma2: float = 0.5

  def __post_init__(self):
    if not math.isfinite(self.mu):
      raise InvalidParameterError(f"mu must be finite, got {self.mu}")
    if not (self.sigma2 >= 0 and math.isfinite(self.sigma2)):
      raise InvalidParameterError(f"sigma2 must be non-negative, got {self.sigma2}")

  @property
  def sigma(self) -> float:
    return math.sqrt(self.sigma2)

  @property
  def t_c(self) -> float:
    """Mean duration exp(mu + sigma2 / 2)."""
    return math.exp(self.mu + 0.5 * self.sigma2)

  def sample(
    self,
    rng: RngStream,
    size: Optional[Union[int, Tuple[int, ...]]] = None,
  ) -> Union[float, np.ndarray]:
    return sample_lognormal(self.mu, self.sigma2, rng, size)


@dataclass(frozen=True)
class FleetSpec:
  """A data-parallel fleet of N workers running T outer steps of m inner steps each.

  ``message`` times one transfer; it is only used when ``include_transfer`` is set.
  """
  world_size: int
  inner_steps: int = 100
  outer_steps: int = 500
  step_latency: LatencyModel = field(default_factory=LatencyModel)
  message: Optional[LatencyModel] = None
  include_transfer: bool = False

  def __post_init__(self):
    if self.world_size < 2:
      raise InvalidParameterError(f"world size must be at least 2, got {self.world_size}")
    if self.world_size % 2 != 0:
      raise InvalidParameterError(f"pairwise averaging needs an even world size, got {self.world_size}")
    if self.inner_steps < 1:
      raise InvalidParameterError(f"inner steps must be at least 1, got {self.inner_steps}")
    if self.outer_steps < 1:
      raise InvalidParameterError(f"outer steps must be at least 1, got {self.outer_steps}")

  @property
  def message_latency(self) -> LatencyModel:
    return self.message if self.message is not None else self.step_latency


@dataclass
class WallclockResult:
  """Completion times of one simulated run.

  Attributes:
    method: "noloco" or "diloco"
    finish_times: Array (outer_steps, world_size); row t holds when each worker
      finished outer step t
  """
  method: str
  fleet: FleetSpec
  finish_times: np.ndarray

  @property
  def total_time(self) -> float:
    """When the last worker finished."""
    return float(self.finish_times[-1].max())

  def to_dict(self) -> Dict[str, Any]:
    return {
      "method": self.method,
      "world_size": self.fleet.world_size,
      "inner_steps": self.fleet.inner_steps,
      "outer_steps": self.fleet.outer_steps,
      "mu": self.fleet.step_latency.mu,
      "sigma2": self.fleet.step_latency.sigma2,
      "total_time": self.total_time,
    }


@dataclass
class WallclockComparison:
  """NoLoCo and DiLoCo runs over the same sampled durations."""
  noloco: WallclockResult
  diloco: WallclockResult

  @property
  def ratio(self) -> float:
    """DiLoCo total time over NoLoCo total time."""
    return self.diloco.total_time / self.noloco.total_time

  def to_dict(self) -> Dict[str, Any]:
    fleet = self.noloco.fleet
    return {
      "world_size": fleet.world_size,
      "inner_steps": fleet.inner_steps,
      "outer_steps": fleet.outer_steps,
      "mu": fleet.step_latency.mu,
      "sigma2": fleet.step_latency.sigma2,
      "noloco_time": self.noloco.total_time,
      "diloco_time": self.diloco.total_time,
      "ratio": self.ratio,
    }


@dataclass
class ReduceRatio:
  """Monte-Carlo tree-reduce over pairwise-averaging time."""
  world_size: int
  model: LatencyModel
  ratio: float
  stderr: float
  tree_mean: float
  pair_mean: float

  def to_dict(self) -> Dict[str, Any]:
    return {
      "world_size": self.world_size,
      "mu": self.model.mu,
      "sigma2": self.model.sigma2,
      "ratio": self.ratio,
      "stderr": self.stderr,
      "tree_mean": self.tree_mean,
      "pair_mean": self.pair_mean,
    }
