"""Pipeline topology: S stages, each replicated R times."""

from dataclasses import dataclass
from typing import List, Tuple

from ..errors import InvalidParameterError


@dataclass(frozen=True)
class PipelineTopology:
  """Worker ids are assigned stage-major: worker = stage * R + replica."""
  num_stages: int
  replicas_per_stage: int

  def __post_init__(self):
    if self.num_stages < 1 or self.replicas_per_stage < 1:
      raise InvalidParameterError(
        f"need at least one stage and one replica, got S={self.num_stages}, "
        f"R={self.replicas_per_stage}"
      )

  @property
  def world_size(self) -> int:
    return self.num_stages * self.replicas_per_stage

  def worker_id(self, stage: int, replica: int) -> int:
    if not (0 <= stage < self.num_stages and 0 <= replica < self.replicas_per_stage):
      raise InvalidParameterError(f"(stage {stage}, replica {replica}) is not in the topology")
    return stage * self.replicas_per_stage + replica

  def locate(self, worker_id: int) -> Tuple[int, int]:
    """Inverse of ``worker_id``: (stage, replica)."""
    if not 0 <= worker_id < self.world_size:
      raise InvalidParameterError(f"worker {worker_id} outside [0, {self.world_size})")
    return divmod(worker_id, self.replicas_per_stage)

  def stage_workers(self, stage: int) -> List[int]:
    return [self.worker_id(stage, r) for r in range(self.replicas_per_stage)]
