"""Random gossip groups for the outer step."""

import logging
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from ..errors import ConfigError
from ..numerics.rng import RngStream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroupAssignment:
  """Partition of one stage's workers into groups of size n.

  Members of each group are listed in ascending worker id, which is the
  order every group reduction runs in.
  """
  outer_step: int
  groups: Tuple[Tuple[int, ...], ...]

  def group_of(self, worker_id: int) -> Tuple[int, ...]:
    for group in self.groups:
      if worker_id in group:
        return group
    raise KeyError(worker_id)


def sample_groups(
  worker_ids: Sequence[int],
  n: int,
  outer_step: int,
  rng: RngStream,
) -> GroupAssignment:
  """Uniform random partition: permute the workers, then cut into blocks of n."""
  count = len(worker_ids)
  if n < 1 or count % n != 0:
    raise ConfigError(f"group size {n} does not divide {count} replicas", field="outer.group_size")
  order = rng.spawn(outer_step).permutation(count)
  shuffled = [worker_ids[i] for i in order]
  groups = tuple(tuple(sorted(shuffled[i:i + n])) for i in range(0, count, n))
  return GroupAssignment(outer_step=outer_step, groups=groups)


class GroupSchedule:
  """Samples the assignment for outer step t+1 while step t is still running.

  Knowing the next partner early lets a worker send its slow weights as soon
  as an outer step completes, overlapping the exchange with the next inner
  phase.
  """

  def __init__(self, worker_ids: Sequence[int], n: int, rng: RngStream):
    self.worker_ids = list(worker_ids)
    self.n = n
    self.rng = rng
    self._ahead: Dict[int, GroupAssignment] = {}

  def prefetch(self, outer_step: int) -> GroupAssignment:
    if outer_step not in self._ahead:
      self._ahead[outer_step] = sample_groups(self.worker_ids, self.n, outer_step, self.rng)
    return self._ahead[outer_step]

  def take(self, outer_step: int) -> GroupAssignment:
    """Assignment for ``outer_step``; the following step is sampled ahead."""
    assignment = self.prefetch(outer_step)
    self._ahead.pop(outer_step, None)
    upcoming = self.prefetch(outer_step + 1)
    logger.debug("outer step %d groups %s, next %s", outer_step, assignment.groups, upcoming.groups)
    return assignment


def sample_group_indices(
  runs: int,
  replicas: int,
  n: int,
  generator: np.random.Generator,
) -> np.ndarray:
  """Independent random partitions for an ensemble of runs.

  Returns:
    Integer array (runs, replicas // n, n); members sorted within each group.
  """
  if n < 1 or replicas % n != 0:
    raise ConfigError(f"group size {n} does not divide {replicas} replicas", field="outer.group_size")
  order = np.argsort(generator.random((runs, replicas)), axis=1)
  return np.sort(order.reshape(runs, replicas // n, n), axis=2)
