"""Per-step permutation routing between replicas of adjacent stages."""

from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

import numpy as np

from ..errors import RoutingError
from ..numerics.rng import RngStream
from .topology import PipelineTopology


class RoutingMode(str, Enum):
  """How stage boundaries are wired each step."""
  RANDOM = "random"
  FIXED = "fixed"


@dataclass(frozen=True, eq=False)
class RoutePlan:
  """One permutation of replica indices per stage boundary."""
  step: int
  permutations: Tuple[np.ndarray, ...]

  @property
  def num_stages(self) -> int:
    return len(self.permutations) + 1


@dataclass(frozen=True)
class PathRecord:
  """The (stage, replica) pairs a microbatch visited on its forward pass."""
  microbatch: int
  visits: Tuple[Tuple[int, int], ...]

  def replica_at(self, stage: int) -> int:
    for visited_stage, replica in self.visits:
      if visited_stage == stage:
        return replica
    raise RoutingError(f"microbatch {self.microbatch} never visited stage {stage}")


def sample_route_plan(
  topology: PipelineTopology,
  step: int,
  rng: RngStream,
  mode: RoutingMode = RoutingMode.RANDOM,
) -> RoutePlan:
  """Draw the plan for ``step``; the same (seed, step) always gives the same plan."""
  replicas = topology.replicas_per_stage
  boundaries = topology.num_stages - 1
  if RoutingMode(mode) == RoutingMode.FIXED or replicas == 1:
    perms = tuple(np.arange(replicas) for _ in range(boundaries))
  else:
    stream = rng.spawn(step)
    perms = tuple(stream.permutation(replicas) for _ in range(boundaries))
  return RoutePlan(step=step, permutations=perms)


def route_forward(plan: RoutePlan, stage: int, replica: int) -> int:
  """Replica of stage+1 that receives the output of (stage, replica)."""
  if stage >= plan.num_stages - 1:
    raise RoutingError(f"stage {stage} is the last stage; there is no next stage")
  if stage < 0:
    raise RoutingError(f"invalid stage {stage}")
  return int(plan.permutations[stage][replica])


def route_backward(record: PathRecord, stage: int) -> int:
  """Replica of stage-1 that fed (stage, ...) on the recorded forward path."""
  if stage <= 0:
    raise RoutingError("stage 0 has no upstream stage")
  record.replica_at(stage)
  return record.replica_at(stage - 1)


def trace_path(plan: RoutePlan, microbatch: int, start_replica: int) -> PathRecord:
  """Follow the plan from a first-stage replica to the last stage."""
  visits: List[Tuple[int, int]] = [(0, start_replica)]
  replica = start_replica
  for stage in range(plan.num_stages - 1):
    replica = route_forward(plan, stage, replica)
    visits.append((stage + 1, replica))
  return PathRecord(microbatch=microbatch, visits=tuple(visits))
