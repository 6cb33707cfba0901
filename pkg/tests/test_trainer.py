"""Tests for the training loop, comparisons and sweeps."""

import numpy as np
import pytest

from noloco_sim.analytic import variance_asymptote
from noloco_sim.config import (
  ExperimentConfig,
  InnerConfig,
  LatencyConfig,
  MLPConfig,
  OuterConfig,
  OuterMethod,
  QuadraticConfig,
  ScheduleKind,
  Workload,
)
from noloco_sim.errors import ConfigError, NumericalError
from noloco_sim.harness.io import read_jsonl
from noloco_sim.harness.metrics import MetricsRecord
from noloco_sim.harness.report import COMPARED_METHODS, method_config, run_comparison
from noloco_sim.harness.sweep import batch_size_sweep, median_by_value, routing_sweep
from noloco_sim.harness.trainer import Trainer, analytic_config_for, run_experiment, write_metrics
from noloco_sim.routing import RoutingMode


def _mlp_config(**overrides) -> ExperimentConfig:
  base = dict(
    workload=Workload.MLP,
    stages=2,
    replicas=4,
    steps=40,
    metrics_every=10,
    batch_size=8,
    mlp=MLPConfig(in_dim=4, hidden=[8, 8], out_dim=2, teacher_hidden=[6], n_samples=256, val_size=32),
    outer=OuterConfig(method=OuterMethod.NOLOCO, outer_interval=10),
  )
  base.update(overrides)
  return ExperimentConfig(**base)


def _quadratic_config(**overrides) -> ExperimentConfig:
  base = dict(
    workload=Workload.QUADRATIC,
    stages=1,
    replicas=4,
    steps=100,
    metrics_every=10,
    batch_size=1,
    quadratic=QuadraticConfig(dim=4, eig_min=0.2, eig_max=1.0, val_size=64),
    inner=InnerConfig(lr=0.05, clip_norm=None, schedule=ScheduleKind.CONSTANT),
    outer=OuterConfig(method=OuterMethod.NOLOCO, outer_interval=10),
  )
  base.update(overrides)
  return ExperimentConfig(**base)


def test_run_is_byte_identical(tmp_path):
  """Test that equal configurations write identical metric files."""
  config = _mlp_config()
  first = run_experiment(config, output=tmp_path / "a" / "run.jsonl")
  run_experiment(config, output=tmp_path / "b" / "run.jsonl")
  assert (tmp_path / "a" / "run.jsonl").read_bytes() == (tmp_path / "b" / "run.jsonl").read_bytes()
  assert (tmp_path / "a" / "run.csv").read_bytes() == (tmp_path / "b" / "run.csv").read_bytes()
  assert first.metrics_path == tmp_path / "a" / "run.jsonl"


def test_records_cadence_and_fields(tmp_path):
  """Test the metric cadence and that records survive the JSON-lines file."""
  result = run_experiment(_mlp_config(), output=tmp_path / "run.jsonl")
  assert result.steps == [10, 20, 30, 40]
  assert [r.outer_step for r in result.records] == [1, 2, 3, 4]
  assert all(len(r.loss_per_replica) == 4 and len(r.replica_std) == 2 for r in result.records)
  assert [r.sim_time for r in result.records] == [10.0, 20.0, 30.0, 40.0]

  loaded = [MetricsRecord.from_dict(d) for d in read_jsonl(tmp_path / "run.jsonl")]
  assert loaded == result.records


def test_seed_changes_run():
  """Test that the seed reaches the data and initialization."""
  a = run_experiment(_mlp_config(seed=1))
  b = run_experiment(_mlp_config(seed=2))
  assert a.val_curve != b.val_curve


def test_fixed_routing_matches_independent_runs():
  """Test that fixed routing without synchronization decouples the replicas."""
  config = _mlp_config(routing=RoutingMode.FIXED, outer=OuterConfig(method=OuterMethod.NONE))
  joint = Trainer(config).run()
  for replica in range(config.replicas):
    alone = Trainer(config, active_replicas=[replica]).run()
    for stage in range(config.stages):
      wid = joint.topology.worker_id(stage, replica)
      np.testing.assert_array_equal(alone.states[wid].theta, joint.states[wid].theta)
    assert [r.loss_per_replica[0] for r in alone.records] == [
      r.loss_per_replica[replica] for r in joint.records
    ]


def test_replica_subset_needs_fixed_routing():
  """Test the subset restriction."""
  with pytest.raises(ConfigError):
    Trainer(_mlp_config(), active_replicas=[0])
  fixed = _mlp_config(routing=RoutingMode.FIXED, outer=OuterConfig(method=OuterMethod.NONE))
  with pytest.raises(ConfigError):
    Trainer(fixed, active_replicas=[7])


def test_sync_dp_keeps_replicas_identical():
  """Test that synchronous data parallelism never spreads the replicas."""
  result = run_experiment(_mlp_config(outer=OuterConfig(method=OuterMethod.SYNC_DP)))
  assert all(std == 0.0 for r in result.records for std in r.replica_std)
  assert result.records[-1].outer_step == 40


def test_diloco_keeps_replicas_identical_after_sync():
  """Test that DiLoCo leaves one shared set of slow weights."""
  result = run_experiment(_mlp_config(outer=OuterConfig(method=OuterMethod.DILOCO, outer_interval=10)))
  assert all(std == 0.0 for r in result.records for std in r.replica_std)


def test_noloco_spreads_replicas():
  """Test that gossip averaging leaves a non-zero replica spread."""
  result = run_experiment(_mlp_config())
  assert all(std > 0.0 for std in result.final_replica_std)


def test_latency_clock():
  """Test that the simulated clock advances and respects the cadence."""
  result = run_experiment(_mlp_config(latency=LatencyConfig(enabled=True, mu=0.0, sigma2=0.5)))
  times = [r.sim_time for r in result.records]
  assert all(b > a for a, b in zip(times, times[1:]))
  assert times[0] > 0.0


def test_divergence_reports_last_good_step():
  """Test that a diverging run names the last finite step."""
  config = _quadratic_config(
    inner=InnerConfig(lr=50.0, clip_norm=None, schedule=ScheduleKind.CONSTANT),
    outer=OuterConfig(method=OuterMethod.NONE),
    steps=1000,
  )
  with pytest.raises(NumericalError) as exc:
    run_experiment(config)
  assert exc.value.last_good_step is not None
  assert exc.value.step == exc.value.last_good_step + 1


def test_quadratic_dispersion_below_analytic_band():
  """Test the measured replica spread against the analytic slow-weight variance."""
  config = _quadratic_config(steps=2000)
  result = run_experiment(config)
  tail = [r.replica_std[0] ** 2 for r in result.records[-50:]]
  band = variance_asymptote(analytic_config_for(config))
  assert 0.0 < float(np.mean(tail)) <= 2.0 * band


def test_analytic_config_for():
  """Test the mapping from an experiment to the analytic inputs."""
  config = _quadratic_config()
  cfg = analytic_config_for(config)
  assert cfg.omega == 0.05
  assert cfg.m == 10
  assert cfg.n == 2
  assert cfg.horizon == 10
  assert cfg.gamma == pytest.approx(1.0)
  assert cfg.problem.d == 4
  with pytest.raises(ConfigError):
    analytic_config_for(_mlp_config())
  with pytest.raises(ConfigError):
    analytic_config_for(_quadratic_config(outer=OuterConfig(method=OuterMethod.DILOCO)))


def test_method_config_resets_other_methods():
  """Test that compared methods get their own defaults."""
  config = _mlp_config(outer=OuterConfig(method=OuterMethod.NOLOCO, alpha=0.4, gamma=0.9))
  assert method_config(config, OuterMethod.NOLOCO).outer.alpha == 0.4
  diloco = method_config(config, OuterMethod.DILOCO).outer.resolved()
  assert diloco.alpha == 0.3
  assert diloco.outer_interval == 100


def test_comparison_report():
  """Test the three-way comparison on a small quadratic run."""
  config = _quadratic_config(
    inner=InnerConfig(lr=0.05, warmup_steps=20),
    outer=OuterConfig(method=OuterMethod.NOLOCO, outer_interval=10),
  )
  seen = []
  report = run_comparison(config, on_method=seen.append)
  assert seen == [m.value for m in COMPARED_METHODS]
  assert set(report.val_curves) == {"sync-dp", "diloco", "noloco"}
  assert report.steps == list(range(10, 101, 10))
  assert len(report.relative_diff) == 10
  assert -1.0 <= report.std_lr_pearson <= 1.0
  assert max(report.normalized_std) == 1.0
  assert report.latency["ratio"] == pytest.approx(
    report.latency["tree_allreduce_time"] / report.latency["pair_average_time"]
  )
  assert set(report.to_dict()) >= {"val_curves", "relative_diff", "latency"}


def test_batch_size_sweep():
  """Test one row per method and batch size."""
  config = _quadratic_config(outer=OuterConfig(method=OuterMethod.NOLOCO, outer_interval=10))
  rows = batch_size_sweep(config, [1, 4], methods=[OuterMethod.NOLOCO, OuterMethod.SYNC_DP])
  assert [(r.value, r.method) for r in rows] == [
    (1, "noloco"), (1, "sync-dp"), (4, "noloco"), (4, "sync-dp"),
  ]
  assert rows[1].final_replica_std == 0.0
  assert rows[0].to_dict()["param"] == "batch_size"


@pytest.mark.slow
def test_random_routing_lowers_replica_spread():
  """Test the routing ablation: random routing keeps unsynchronized replicas closer."""
  config = _mlp_config(
    steps=300,
    metrics_every=50,
    mlp=MLPConfig(in_dim=4, hidden=[16, 16, 16, 16], out_dim=2, teacher_hidden=[8], n_samples=1024),
  )
  rows = routing_sweep(config, seeds=range(10))
  assert len(rows) == 20
  medians = median_by_value(rows)
  assert medians["random"] < medians["fixed"]


def test_write_metrics_sets_path(tmp_path):
  """Test persisting an in-memory result."""
  result = Trainer(_mlp_config(steps=20)).run()
  path = write_metrics(result, tmp_path / "m.jsonl")
  assert result.metrics_path == path
  assert len(read_jsonl(path)) == 2
