"""Per-worker optimizer state."""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ..errors import ShapeError
from ..numerics.rng import RngStream


@dataclass
class WorkerState:
  """One replica of one pipeline stage.

  Attributes:
    worker_id: Global worker index
    phi: Slow weights, changed only by outer steps
    theta: Fast weights, advanced by the inner optimizer
    delta: Outer momentum (starts at zero)
    rng: Private stream for this worker's data and noise
    adam_m, adam_v, adam_t: Adam moments and step count (None until first Adam step)
  """
  worker_id: int
  phi: np.ndarray
  theta: np.ndarray
  delta: np.ndarray
  rng: RngStream
  adam_m: Optional[np.ndarray] = None
  adam_v: Optional[np.ndarray] = None
  adam_t: int = 0

  def __post_init__(self):
    if not (self.phi.shape == self.theta.shape == self.delta.shape) or self.phi.ndim != 1:
      raise ShapeError(
        f"worker {self.worker_id}: phi {self.phi.shape}, theta {self.theta.shape} and "
        f"delta {self.delta.shape} must be equal-length vectors"
      )

  @classmethod
  def initial(cls, worker_id: int, params: np.ndarray, rng: RngStream) -> "WorkerState":
    """Slow and fast weights both start at ``params``; momentum at zero."""
    params = np.asarray(params, dtype=np.float64)
    return cls(
      worker_id=worker_id,
      phi=params.copy(),
      theta=params.copy(),
      delta=np.zeros_like(params),
      rng=rng,
    )

  @property
  def dim(self) -> int:
    return self.phi.shape[0]

  def copy(self) -> "WorkerState":
    return replace(
      self,
      phi=self.phi.copy(),
      theta=self.theta.copy(),
      delta=self.delta.copy(),
      adam_m=None if self.adam_m is None else self.adam_m.copy(),
      adam_v=None if self.adam_v is None else self.adam_v.copy(),
    )

  def reset_adam(self) -> "WorkerState":
    return replace(self, adam_m=None, adam_v=None, adam_t=0)
