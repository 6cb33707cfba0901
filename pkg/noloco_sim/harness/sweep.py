"""Parameter sweeps: batch-size sensitivity and the routing ablation."""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..config import ExperimentConfig, OuterMethod
from ..routing.plan import RoutingMode
from .report import COMPARED_METHODS, method_config
from .trainer import run_experiment

logger = logging.getLogger(__name__)


class SweepParam(str, Enum):
  BATCH_SIZE = "batch_size"
  ROUTING = "routing"


@dataclass
class SweepRow:
  param: str
  value: Any
  method: str
  seed: int
  final_val_loss: float
  final_replica_std: Optional[float]

  def to_dict(self) -> Dict[str, Any]:
    return {
      "param": self.param,
      "value": self.value,
      "method": self.method,
      "seed": self.seed,
      "final_val_loss": self.final_val_loss,
      "final_replica_std": self.final_replica_std,
    }


def _final_std(stds: Sequence[float]) -> Optional[float]:
  return float(np.mean(stds)) if stds else None


def batch_size_sweep(
  config: ExperimentConfig,
  values: Sequence[int],
  methods: Sequence[OuterMethod] = COMPARED_METHODS,
) -> List[SweepRow]:
  """Final validation loss of every method at every global batch size."""
  rows = []
  for value in values:
    for method in methods:
      run_cfg = replace(method_config(config, method), batch_size=int(value))
      result = run_experiment(run_cfg)
      final = result.records[-1]
      rows.append(SweepRow(
        param=SweepParam.BATCH_SIZE.value,
        value=int(value),
        method=method.value,
        seed=config.seed,
        final_val_loss=final.val_loss,
        final_replica_std=_final_std(final.replica_std),
      ))
      logger.info("batch size %d, %s: val %.6f", value, method.value, final.val_loss)
  return rows


def routing_sweep(config: ExperimentConfig, seeds: Sequence[int]) -> List[SweepRow]:
  """Final replica std with outer synchronization disabled, per routing mode and seed."""
  outer = replace(config.outer, method=OuterMethod.NONE, alpha=None, gamma=None, outer_interval=None)
  rows = []
  for mode in (RoutingMode.RANDOM, RoutingMode.FIXED):
    for seed in seeds:
      run_cfg = replace(config, outer=outer, routing=mode, seed=int(seed), output=None)
      final = run_experiment(run_cfg).records[-1]
      rows.append(SweepRow(
        param=SweepParam.ROUTING.value,
        value=mode.value,
        method=OuterMethod.NONE.value,
        seed=int(seed),
        final_val_loss=final.val_loss,
        final_replica_std=_final_std(final.replica_std),
      ))
  return rows


def median_by_value(rows: Sequence[SweepRow]) -> Dict[str, float]:
  """Median final replica std per swept value."""
  grouped: Dict[str, List[float]] = {}
  for row in rows:
    if row.final_replica_std is not None:
      grouped.setdefault(str(row.value), []).append(row.final_replica_std)
  return {value: float(np.median(stds)) for value, stds in grouped.items()}
