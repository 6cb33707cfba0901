"""Event simulation of blocking overhead: global barrier versus pairwise barrier."""

import logging
from enum import Enum
from typing import Iterable, List

import numpy as np

from ..errors import InvalidParameterError
from ..numerics.rng import RngStream, Stream
from .models import FleetSpec, LatencyModel, WallclockComparison, WallclockResult
from .reduce import sample_tree_times

logger = logging.getLogger(__name__)


class BarrierMethod(str, Enum):
  NOLOCO = "noloco"
  DILOCO = "diloco"


def random_pairing(n: int, rng: RngStream) -> np.ndarray:
  """Uniform perfect matching as an array of partners: partner[partner[i]] == i."""
  order = rng.permutation(n)
  partner = np.empty(n, dtype=np.int64)
  partner[order[0::2]] = order[1::2]
  partner[order[1::2]] = order[0::2]
  return partner


def wallclock_sim(fleet: FleetSpec, method: BarrierMethod, rng: RngStream) -> WallclockResult:
  """Finish time of every worker at every outer step.

  Each worker's inner phase lasts the sum of m iid log-normal step times. At
  the outer step DiLoCo waits for the slowest worker of the fleet, NoLoCo
  only for the worker's partner. Durations come from ``rng``'s latency
  stream and pairings from its pairing stream, so both methods see the same
  samples for a given ``rng``.
  """
  method = BarrierMethod(method)
  n = fleet.world_size
  durations = rng.spawn(Stream.LATENCY)
  pairings = rng.spawn(Stream.PAIRING)
  transfers = rng.spawn(Stream.LATENCY, 1)

  finish = np.zeros((fleet.outer_steps, n))
  now = np.zeros(n)
  for t in range(fleet.outer_steps):
    ready = now + fleet.step_latency.sample(durations.spawn(t), (n, fleet.inner_steps)).sum(axis=1)

    if method == BarrierMethod.DILOCO:
      now = np.full(n, ready.max())
      if fleet.include_transfer:
        now = now + sample_tree_times(n, fleet.message_latency, 1, transfers.spawn(t))[0]
    else:
      partner = random_pairing(n, pairings.spawn(t))
      now = np.maximum(ready, ready[partner])
      if fleet.include_transfer:
        sends = fleet.message_latency.sample(transfers.spawn(t), n)
        now = now + 2.0 * np.maximum(sends, sends[partner])
    finish[t] = now

  logger.debug("%s on %d workers: total %.3f", method.value, n, finish[-1].max())
  return WallclockResult(method=method.value, fleet=fleet, finish_times=finish)


def compare_wallclock(fleet: FleetSpec, rng: RngStream) -> WallclockComparison:
  """Both methods over identical inner-phase samples."""
  return WallclockComparison(
    noloco=wallclock_sim(fleet, BarrierMethod.NOLOCO, rng),
    diloco=wallclock_sim(fleet, BarrierMethod.DILOCO, rng),
  )


def ratio_by_world_size(
  world_sizes: Iterable[int],
  inner_steps: int,
  outer_steps: int,
  model: LatencyModel,
  rng: RngStream,
) -> List[WallclockComparison]:
  """DiLoCo / NoLoCo comparisons over a range of fleet sizes."""
  results = []
  for n in world_sizes:
    if n < 2:
      raise InvalidParameterError(f"world size must be at least 2, got {n}")
    fleet = FleetSpec(world_size=n, inner_steps=inner_steps, outer_steps=outer_steps, step_latency=model)
    results.append(compare_wallclock(fleet, rng.spawn(n)))
  return results
