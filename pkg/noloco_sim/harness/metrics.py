"""Training metrics and the statistics computed over them."""

from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from ..errors import InvalidParameterError, ShapeError, UndefinedCorrelationError, UndefinedPointError
from ..optimizers.state import WorkerState
from ..routing.topology import PipelineTopology

METRIC_FIELDS = ("step", "outer_step", "loss_per_replica", "val_loss", "replica_std", "lr", "sim_time")


@dataclass
class MetricsRecord:
  """One cadence tick of a training run.

  ``replica_std`` holds one value per pipeline stage.
  """
  step: int
  outer_step: int
  loss_per_replica: List[float]
  val_loss: float
  replica_std: List[float] = field(default_factory=list)
  lr: float = 0.0
  sim_time: float = 0.0

  def to_dict(self) -> Dict[str, Any]:
    return {name: getattr(self, name) for name in METRIC_FIELDS}

  @classmethod
  def from_dict(cls, data: Dict[str, Any]) -> "MetricsRecord":
    return cls(**{name: data[name] for name in METRIC_FIELDS})

  def csv_rows(self) -> Iterator[Tuple[int, float, str]]:
    """Long-format (step, value, series) rows."""
    for replica, loss in enumerate(self.loss_per_replica):
      yield self.step, loss, f"loss/replica{replica}"
    yield self.step, self.val_loss, "val_loss"
    for stage, std in enumerate(self.replica_std):
      yield self.step, std, f"replica_std/stage{stage}"
    yield self.step, self.lr, "lr"
    yield self.step, self.sim_time, "sim_time"


def replica_weight_std(
  states: Sequence[WorkerState],
  stage: Optional[int] = None,
  topology: Optional[PipelineTopology] = None,
) -> float:
  """L2 norm of the per-coordinate cross-replica standard deviation of phi.

  With ``stage`` and ``topology`` only that stage's workers are used;
  otherwise ``states`` must already be the replicas of one stage. The
  population convention (ddof = 0) is used.
  """
  if stage is not None:
    if topology is None:
      raise InvalidParameterError("selecting a stage needs the pipeline topology")
    wanted = set(topology.stage_workers(stage))
    states = [s for s in states if s.worker_id in wanted]
  if len(states) < 2:
    raise InvalidParameterError(f"need at least 2 replicas, got {len(states)}")
  phi = np.stack([s.phi for s in sorted(states, key=lambda s: s.worker_id)])
  return float(np.linalg.norm(np.std(phi, axis=0)))


def relative_convergence_diff(
  curve_a: Sequence[float],
  curve_b: Sequence[float],
  curve_ref: Sequence[float],
) -> np.ndarray:
  """(a_t - b_t) / ref_t; positive where b is ahead of a."""
  a = np.asarray(curve_a, dtype=np.float64)
  b = np.asarray(curve_b, dtype=np.float64)
  ref = np.asarray(curve_ref, dtype=np.float64)
  if not (a.shape == b.shape == ref.shape) or a.ndim != 1:
    raise ShapeError(f"curves are not aligned: {a.shape}, {b.shape}, {ref.shape}")
  zeros = np.flatnonzero(ref == 0)
  if zeros.size:
    raise UndefinedPointError("reference curve is zero", index=int(zeros[0]))
  return (a - b) / ref


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
  """Sample Pearson correlation coefficient."""
  x = np.asarray(x, dtype=np.float64)
  y = np.asarray(y, dtype=np.float64)
  if x.shape != y.shape or x.ndim != 1:
    raise ShapeError(f"series are not aligned: {x.shape} vs {y.shape}")
  if len(x) < 3:
    raise InvalidParameterError(f"need at least 3 points, got {len(x)}")
  if np.ptp(x) == 0 or np.ptp(y) == 0:
    raise UndefinedCorrelationError("correlation of a constant series is undefined")
  r, _ = stats.pearsonr(x, y)
  return float(r)


def normalize_by_max(series: Iterable[float]) -> List[float]:
  """Divide by the largest value; an all-zero series is returned unchanged."""
  values = np.asarray(list(series), dtype=np.float64)
  peak = values.max() if values.size else 0.0
  if peak <= 0:
    return values.tolist()
  return (values / peak).tolist()
