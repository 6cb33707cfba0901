"""Tests for metric statistics and the output files."""

import numpy as np
import pytest

from noloco_sim.errors import InvalidParameterError, ShapeError, UndefinedCorrelationError, UndefinedPointError
from noloco_sim.harness.io import (
  read_json,
  read_jsonl,
  sidecar_csv_path,
  write_csv,
  write_json,
  write_jsonl,
)
from noloco_sim.harness.metrics import (
  MetricsRecord,
  normalize_by_max,
  pearson,
  relative_convergence_diff,
  replica_weight_std,
)
from noloco_sim.numerics import RngStream
from noloco_sim.optimizers import WorkerState
from noloco_sim.routing import PipelineTopology


def _state(worker_id, phi):
  return WorkerState.initial(worker_id, np.asarray(phi, dtype=np.float64), RngStream(0))


def test_relative_convergence_diff():
  """Test the relative gap and its antisymmetry."""
  diff = relative_convergence_diff([1.1, 2.0], [1.0, 2.5], [1.0, 5.0])
  np.testing.assert_allclose(diff, [0.1, -0.1])
  np.testing.assert_allclose(
    relative_convergence_diff([1.0, 2.5], [1.1, 2.0], [1.0, 5.0]), -diff
  )


def test_relative_convergence_diff_errors():
  """Test alignment and zero-reference errors."""
  with pytest.raises(ShapeError):
    relative_convergence_diff([1.0, 2.0], [1.0], [1.0, 1.0])
  with pytest.raises(UndefinedPointError) as exc:
    relative_convergence_diff([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [1.0, 0.0, 1.0])
  assert exc.value.index == 1


def test_pearson():
  """Test the correlation coefficient on small series."""
  assert pearson([1, 2, 3, 4], [2, 4, 6, 8]) == pytest.approx(1.0)
  assert pearson([1, 2, 3, 4], [8, 6, 4, 2]) == pytest.approx(-1.0)
  assert pearson([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5)


def test_pearson_errors():
  """Test undefined and malformed inputs."""
  with pytest.raises(UndefinedCorrelationError):
    pearson([1, 1, 1], [1, 2, 3])
  with pytest.raises(InvalidParameterError):
    pearson([1, 2], [2, 1])
  with pytest.raises(ShapeError):
    pearson([1, 2, 3], [1, 2])


def test_replica_weight_std():
  """Test the cross-replica spread of slow weights."""
  states = [_state(0, [0.0, 0.0]), _state(1, [2.0, 0.0])]
  assert replica_weight_std(states) == pytest.approx(1.0)
  shifted = [_state(0, [5.0, -3.0]), _state(1, [7.0, -3.0])]
  assert replica_weight_std(shifted) == pytest.approx(1.0)
  with pytest.raises(InvalidParameterError):
    replica_weight_std(states[:1])


def test_replica_weight_std_by_stage():
  """Test stage selection through the topology."""
  topo = PipelineTopology(2, 2)
  states = [_state(0, [0.0]), _state(1, [0.0]), _state(2, [1.0]), _state(3, [3.0])]
  assert replica_weight_std(states, stage=0, topology=topo) == 0.0
  assert replica_weight_std(states, stage=1, topology=topo) == pytest.approx(1.0)
  with pytest.raises(InvalidParameterError):
    replica_weight_std(states, stage=1)


def test_normalize_by_max():
  """Test scaling to a unit peak."""
  assert normalize_by_max([1.0, 4.0, 2.0]) == [0.25, 1.0, 0.5]
  assert normalize_by_max([0.0, 0.0]) == [0.0, 0.0]


def test_metrics_record_rows():
  """Test the record dictionary and its long-format CSV rows."""
  record = MetricsRecord(
    step=10, outer_step=2, loss_per_replica=[0.5, 0.7], val_loss=0.6,
    replica_std=[0.1, 0.2], lr=0.01, sim_time=10.0,
  )
  assert MetricsRecord.from_dict(record.to_dict()) == record
  assert list(record.to_dict()) == [
    "step", "outer_step", "loss_per_replica", "val_loss", "replica_std", "lr", "sim_time",
  ]
  series = [name for _, _, name in record.csv_rows()]
  assert series == [
    "loss/replica0", "loss/replica1", "val_loss",
    "replica_std/stage0", "replica_std/stage1", "lr", "sim_time",
  ]


def test_write_json_atomic(tmp_path):
  """Test JSON output leaves no temporary files behind."""
  path = write_json(tmp_path / "out" / "result.json", {"ratio": 1.5})
  assert read_json(path) == {"ratio": 1.5}
  assert [p.name for p in path.parent.iterdir()] == ["result.json"]


def test_jsonl_and_csv(tmp_path):
  """Test the metrics stream and its CSV sidecar."""
  path = write_jsonl(tmp_path / "run.jsonl", [{"step": 1, "lr": 0.1}, {"step": 2, "lr": 0.05}])
  assert read_jsonl(path) == [{"step": 1, "lr": 0.1}, {"step": 2, "lr": 0.05}]
  assert path.read_text().splitlines()[0] == '{"step": 1, "lr": 0.1}'

  csv_path = sidecar_csv_path(path)
  assert csv_path.name == "run.csv"
  write_csv(csv_path, ["step", "value", "series"], [(1, 0.1, "lr")])
  assert csv_path.read_text() == "step,value,series\n1,0.1,lr\n"
