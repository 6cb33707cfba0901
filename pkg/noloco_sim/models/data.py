"""Synthetic regression data from a fixed random teacher network."""

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from ..errors import InvalidParameterError
from ..numerics.rng import RngStream
from .mlp import StagedMLP, mlp_forward


@dataclass
class Batch:
  """Inputs (samples x features) and targets (samples x outputs)."""
  inputs: np.ndarray
  targets: np.ndarray

  def __post_init__(self):
    if self.inputs.shape[0] != self.targets.shape[0]:
      raise InvalidParameterError(
        f"sample counts differ: {self.inputs.shape[0]} inputs, {self.targets.shape[0]} targets"
      )

  def __len__(self) -> int:
    return self.inputs.shape[0]


@dataclass
class RegressionTask:
  """A finite pool of teacher-labelled samples plus a held-out validation batch.

  The training pool is permuted once and cut into contiguous, disjoint shards,
  one per data-parallel replica. Each replica walks its shard in a fresh
  order every epoch.
  """
  teacher: StagedMLP
  teacher_params: list
  inputs: np.ndarray
  targets: np.ndarray
  validation: Batch
  rng: RngStream = field(repr=False)
  _shards: dict = field(default_factory=dict, repr=False)

  @property
  def n_samples(self) -> int:
    return self.inputs.shape[0]

  def shard_indices(self, replica: int, num_replicas: int) -> np.ndarray:
    """Pool indices owned by ``replica``."""
    if not 0 <= replica < num_replicas:
      raise InvalidParameterError(f"replica {replica} outside [0, {num_replicas})")
    key = (replica, num_replicas)
    if key not in self._shards:
      order = self.rng.spawn(0).permutation(self.n_samples)
      self._shards[key] = np.array_split(order, num_replicas)[replica]
    return self._shards[key]

  def batch(self, replica: int, num_replicas: int, index: int, batch_size: int) -> Batch:
    """Minibatch number ``index`` of a replica's stream (random access, reproducible)."""
    shard = self.shard_indices(replica, num_replicas)
    if batch_size < 1 or batch_size > len(shard):
      raise InvalidParameterError(f"batch size {batch_size} does not fit shard of {len(shard)}")
    per_epoch = len(shard) // batch_size
    epoch, position = divmod(index, per_epoch)
    order = self.rng.spawn(1, replica, epoch).permutation(len(shard))
    chosen = shard[order[position * batch_size:(position + 1) * batch_size]]
    return Batch(self.inputs[chosen], self.targets[chosen])

  def batches(self, replica: int, num_replicas: int, batch_size: int) -> Iterator[Batch]:
    """Infinite minibatch stream for one replica."""
    index = 0
    while True:
      yield self.batch(replica, num_replicas, index, batch_size)
      index += 1


def make_regression_task(
  n_samples: int,
  in_dim: int,
  out_dim: int,
  noise_std: float,
  rng: RngStream,
  teacher_hidden: Sequence[int] = (16,),
  val_size: int = 256,
) -> RegressionTask:
  """Teacher-network regression data.

  Inputs are standard normal; targets are the teacher's outputs plus
  Gaussian noise of standard deviation ``noise_std``. The validation batch is
  drawn separately and never appears in any shard.
  """
  if min(n_samples, in_dim, out_dim, val_size) < 1:
    raise InvalidParameterError("sample counts and dimensions must be positive")
  if noise_std < 0:
    raise InvalidParameterError(f"noise_std must be non-negative, got {noise_std}")

  teacher = StagedMLP.build(in_dim, teacher_hidden, out_dim)
  teacher_params = teacher.init_params(rng.spawn(2), scale=1.5)

  def _labelled(count: int, stream: RngStream):
    x = stream.spawn(0).normal((count, in_dim))
    y = mlp_forward(teacher, teacher_params, x)
    if noise_std > 0:
      y = y + noise_std * stream.spawn(1).normal(y.shape)
    return x, y

  x, y = _labelled(n_samples, rng.spawn(3))
  val_x, val_y = _labelled(val_size, rng.spawn(4))
  return RegressionTask(
    teacher=teacher,
    teacher_params=teacher_params,
    inputs=x,
    targets=y,
    validation=Batch(val_x, val_y),
    rng=rng,
  )
