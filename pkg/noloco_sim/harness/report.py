"""Side-by-side comparison of the outer methods on one configuration."""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional

from ..config import ExperimentConfig, OuterMethod
from ..errors import UndefinedCorrelationError, UndefinedPointError
from ..latency.models import LatencyModel
from ..latency.reduce import expected_pair_max, tree_allreduce_time
from .metrics import normalize_by_max, pearson, relative_convergence_diff
from .trainer import RunResult, run_experiment

logger = logging.getLogger(__name__)

COMPARED_METHODS = (OuterMethod.SYNC_DP, OuterMethod.DILOCO, OuterMethod.NOLOCO)


@dataclass
class ComparisonReport:
  """Validation curves per method and the statistics derived from them.

  ``relative_diff`` is (DiLoCo - NoLoCo) / sync-dp per recorded step, so
  positive values mean NoLoCo is ahead.
  """
  steps: List[int]
  val_curves: Dict[str, List[float]]
  relative_diff: Optional[List[float]]
  std_lr_pearson: Optional[float]
  normalized_std: List[float]
  latency: Dict[str, Any] = field(default_factory=dict)

  def to_dict(self) -> Dict[str, Any]:
    return {
      "steps": self.steps,
      "val_curves": self.val_curves,
      "relative_diff": self.relative_diff,
      "std_lr_pearson": self.std_lr_pearson,
      "normalized_std": self.normalized_std,
      "latency": self.latency,
    }


def method_config(config: ExperimentConfig, method: OuterMethod) -> ExperimentConfig:
  """``config`` running ``method``.

  The configured method keeps its outer settings; the others fall back to
  their own defaults with the same beta and group size.
  """
  if method == config.outer.method:
    return replace(config, output=None)
  outer = replace(config.outer, method=method, alpha=None, gamma=None, outer_interval=None)
  return replace(config, outer=outer, output=None)


def latency_summary(config: ExperimentConfig, results: Dict[str, RunResult]) -> Dict[str, Any]:
  """Expected per-sync communication times and each run's final simulated time."""
  lat = config.latency
  t_c = LatencyModel(lat.mu, lat.sigma2).t_c
  summary: Dict[str, Any] = {"mu": lat.mu, "sigma2": lat.sigma2}
  if config.replicas >= 2:
    tree = tree_allreduce_time(config.replicas, t_c)
    pair = 2.0 * expected_pair_max(lat.mu, lat.sigma2)
    summary.update({"tree_allreduce_time": tree, "pair_average_time": pair, "ratio": tree / pair})
  summary["sim_time"] = {
    name: (result.records[-1].sim_time if result.records else 0.0)
    for name, result in results.items()
  }
  return summary


def run_comparison(
  config: ExperimentConfig,
  on_method: Optional[Callable[[str], None]] = None,
) -> ComparisonReport:
  """Train sync-dp, DiLoCo and NoLoCo on identical shards and streams."""
  results: Dict[str, RunResult] = {}
  for method in COMPARED_METHODS:
    if on_method is not None:
      on_method(method.value)
    results[method.value] = run_experiment(method_config(config, method))

  curves = {name: result.val_curve for name, result in results.items()}
  noloco = results[OuterMethod.NOLOCO.value]

  relative: Optional[List[float]] = None
  try:
    relative = relative_convergence_diff(
      curves[OuterMethod.DILOCO.value],
      curves[OuterMethod.NOLOCO.value],
      curves[OuterMethod.SYNC_DP.value],
    ).tolist()
  except UndefinedPointError as e:
    logger.warning("relative convergence difference undefined: %s", e)

  std_curve = noloco.std_curve(0) if noloco.records and noloco.records[0].replica_std else []
  correlation: Optional[float] = None
  try:
    correlation = pearson(std_curve, noloco.lr_curve)
  except (UndefinedCorrelationError, ValueError) as e:
    logger.warning("replica std / lr correlation undefined: %s", e)

  return ComparisonReport(
    steps=noloco.steps,
    val_curves=curves,
    relative_diff=relative,
    std_lr_pearson=correlation,
    normalized_std=normalize_by_max(std_curve),
    latency=latency_summary(config, results),
  )
