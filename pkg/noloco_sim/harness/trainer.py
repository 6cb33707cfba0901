"""The simulated training loop.

Each inner step shards a minibatch to every first-stage replica, routes it
through the pipeline along the step's RoutePlan, back-propagates along the
recorded path and advances every worker's fast weights. Every
``outer_interval`` steps the configured outer method synchronizes the slow
weights. All reductions run in worker-id order, so a run is a pure function
of its configuration.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..config import (
  ExperimentConfig,
  InnerMethod,
  OuterMethod,
  ScheduleKind,
  Workload,
  validate_config,
)
from ..errors import ConfigError, NumericalError, RoutingError
from ..models.data import RegressionTask, make_regression_task
from ..models.mlp import StagedMLP, mlp_backward_stage, mlp_forward, mlp_forward_stage, mse_loss
from ..models.quadratic import QuadraticProblem, quadratic_grad, quadratic_loss
from ..numerics.rng import RngStream, Stream
from ..optimizers.groups import GroupSchedule
from ..optimizers.inner import inner_step
from ..optimizers.outer import diloco_outer_step, noloco_outer_step, sync_dp_step
from ..optimizers.schedule import learning_rate
from ..optimizers.state import WorkerState
from ..routing.plan import RoutingMode, route_backward, sample_route_plan, trace_path
from ..routing.topology import PipelineTopology
from .io import sidecar_csv_path, write_csv, write_jsonl
from .metrics import MetricsRecord, replica_weight_std

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[int], None]


@dataclass
class RunResult:
  """Metrics and final worker states of one run."""
  config: ExperimentConfig
  topology: PipelineTopology
  records: List[MetricsRecord]
  states: Dict[int, WorkerState] = field(repr=False)
  metrics_path: Optional[Path] = None

  @property
  def steps(self) -> List[int]:
    return [r.step for r in self.records]

  @property
  def val_curve(self) -> List[float]:
    return [r.val_loss for r in self.records]

  def std_curve(self, stage: int = 0) -> List[float]:
    return [r.replica_std[stage] for r in self.records]

  @property
  def lr_curve(self) -> List[float]:
    return [r.lr for r in self.records]

  @property
  def final_replica_std(self) -> List[float]:
    return list(self.records[-1].replica_std) if self.records else []


class Trainer:
  """One configured run.

  ``active_replicas`` restricts the run to a subset of the data-parallel
  replicas; each then trains as an independent pipeline. Only the fixed
  routing without outer synchronization allows this.
  """

  def __init__(self, config: ExperimentConfig, active_replicas: Optional[Sequence[int]] = None):
    validate_config(config)
    self.config = config
    self.outer = config.outer.resolved()
    self.topology = PipelineTopology(config.stages, config.replicas)
    self.rng = RngStream(config.seed)

    if active_replicas is None:
      self.active = list(range(config.replicas))
    else:
      self.active = sorted(set(int(r) for r in active_replicas))
      if config.routing != RoutingMode.FIXED or self.outer.method != OuterMethod.NONE:
        raise ConfigError("a replica subset needs fixed routing and no outer method", field="routing")
      if not self.active or not all(0 <= r < config.replicas for r in self.active):
        raise ConfigError(f"replicas {self.active} outside [0, {config.replicas})", field="replicas")

    self.task: Optional[RegressionTask] = None
    self.model: Optional[StagedMLP] = None
    self.problem: Optional[QuadraticProblem] = None
    if config.workload == Workload.QUADRATIC:
      self._build_quadratic()
    else:
      self._build_mlp()

    self.schedules: Dict[int, GroupSchedule] = {}
    if self.outer.method == OuterMethod.NOLOCO:
      for stage in range(config.stages):
        self.schedules[stage] = GroupSchedule(
          self.topology.stage_workers(stage),
          self.outer.group_size,
          self.rng.spawn(Stream.GROUPS, stage),
        )

    self.route_rng = self.rng.spawn(Stream.ROUTING)
    self.clock = np.zeros(self.topology.world_size)
    self.outer_step = 0
    self.last_good_step: Optional[int] = None

  def _worker_ids(self) -> List[int]:
    return [
      self.topology.worker_id(stage, replica)
      for stage in range(self.config.stages)
      for replica in self.active
    ]

  def _init_states(self, stage_params: Sequence[np.ndarray]) -> None:
    self.states: Dict[int, WorkerState] = {}
    for wid in self._worker_ids():
      stage, _ = self.topology.locate(wid)
      self.states[wid] = WorkerState.initial(
        wid, stage_params[stage], self.rng.spawn(Stream.WORKER, wid)
      )

  def _build_quadratic(self) -> None:
    q = self.config.quadratic
    self.problem = QuadraticProblem.random(
      q.dim, q.eig_min, q.eig_max, self.rng.spawn(Stream.PROBLEM), noise_scale=q.noise
    )
    # Minibatch averaging divides the gradient-noise covariance
    self.batch_problem = self.problem.scaled_noise(1.0 / self.config.batch_size)
    self.val_targets = self.problem.sample_targets(self.rng.spawn(Stream.VALIDATION), (q.val_size,))
    init = q.init_scale * self.rng.spawn(Stream.INIT).normal(q.dim)
    self._init_states([init])

  def _build_mlp(self) -> None:
    m = self.config.mlp
    self.task = make_regression_task(
      m.n_samples,
      m.in_dim,
      m.out_dim,
      m.noise_std,
      self.rng.spawn(Stream.DATA),
      teacher_hidden=m.teacher_hidden,
      val_size=m.val_size,
    )
    self.model = StagedMLP.build(m.in_dim, m.hidden, m.out_dim, self.config.stages)
    self._init_states(self.model.init_params(self.rng.spawn(Stream.INIT), m.init_scale))

  def stage_states(self, stage: int) -> List[WorkerState]:
    return [self.states[wid] for wid in self.topology.stage_workers(stage) if wid in self.states]

  def _gradients_quadratic(self, step: int) -> Dict[int, np.ndarray]:
    grads: Dict[int, np.ndarray] = {}
    self._losses: List[float] = []
    for wid in self._worker_ids():
      state = self.states[wid]
      c = self.batch_problem.sample_targets(state.rng.spawn(step))
      self._losses.append(quadratic_loss(state.theta, c, self.problem))
      grads[wid] = quadratic_grad(state.theta, c, self.batch_problem)
    return grads

  def _gradients_mlp(self, step: int) -> Dict[int, np.ndarray]:
    cfg = self.config
    plan = sample_route_plan(
      self.topology, step // cfg.routing_period, self.route_rng, cfg.routing
    )
    grads: Dict[int, np.ndarray] = {}
    self._losses = []
    for replica in self.active:
      batch = self.task.batch(replica, cfg.replicas, step, cfg.batch_size)
      record = trace_path(plan, microbatch=replica, start_replica=replica)

      caches = []
      x = batch.inputs
      for stage, layout in enumerate(self.model.stages):
        wid = self.topology.worker_id(stage, record.replica_at(stage))
        x, cache = mlp_forward_stage(layout, self.states[wid].theta, x)
        caches.append((wid, cache))

      loss, grad = mse_loss(x, batch.targets)
      self._losses.append(loss)
      holder = record.replica_at(cfg.stages - 1)
      for stage in range(cfg.stages - 1, -1, -1):
        wid = self.topology.worker_id(stage, holder)
        cache_wid, cache = caches[stage]
        if cache_wid != wid:
          raise RoutingError(f"backward reached worker {wid}, forward ran on {cache_wid}")
        layout = self.model.stages[stage]
        grad, param_grad = mlp_backward_stage(layout, self.states[wid].theta, cache, grad)
        grads[wid] = grads[wid] + param_grad if wid in grads else param_grad
        if stage > 0:
          holder = route_backward(record, stage)
    return grads

  def _validation_loss(self) -> float:
    if self.config.workload == Workload.QUADRATIC:
      losses = []
      for wid in self._worker_ids():
        r = self.states[wid].theta - self.val_targets
        losses.append(float(np.mean(0.5 * np.einsum("ij,jk,ik->i", r, self.problem.a, r))))
      return float(np.mean(losses))

    val = self.task.validation
    losses = []
    for replica in self.active:
      params = [
        self.states[self.topology.worker_id(stage, replica)].theta
        for stage in range(self.config.stages)
      ]
      loss, _ = mse_loss(mlp_forward(self.model, params, val.inputs), val.targets)
      losses.append(loss)
    return float(np.mean(losses))

  def _advance_clock(self, step: int) -> None:
    if not self.config.latency.enabled:
      return
    lat = self.config.latency
    noise = self.rng.spawn(Stream.LATENCY, step).normal(self.topology.world_size)
    self.clock = self.clock + np.exp(lat.mu + np.sqrt(lat.sigma2) * noise)

  def _barrier(self, worker_ids: Sequence[int]) -> None:
    ids = list(worker_ids)
    self.clock[ids] = self.clock[ids].max()

  def _sim_time(self, step: int) -> float:
    if self.config.latency.enabled:
      return float(self.clock.max())
    return float(step + 1)

  def _inner_phase(self, step: int, grads: Dict[int, np.ndarray]) -> None:
    cfg = self.config
    try:
      if self.outer.method == OuterMethod.SYNC_DP:
        for stage in range(cfg.stages):
          members = self.stage_states(stage)
          updated = sync_dp_step(
            members, [grads[s.worker_id] for s in members], cfg.inner, step, cfg.steps
          )
          for state in updated:
            self.states[state.worker_id] = state
          self._barrier([s.worker_id for s in members])
        self.outer_step += 1
        return

      for wid in self._worker_ids():
        state = inner_step(self.states[wid], grads[wid], cfg.inner, step, cfg.steps)
        if self.outer.method == OuterMethod.NONE:
          state = replace(state, phi=state.theta)
        self.states[wid] = state
    except NumericalError as e:
      raise NumericalError(
        "non-finite gradient", worker_id=e.worker_id, step=step, last_good_step=self.last_good_step
      ) from e

  def _outer_phase(self, step: int) -> None:
    method = self.outer.method
    if method not in (OuterMethod.NOLOCO, OuterMethod.DILOCO):
      return
    if (step + 1) % self.outer.outer_interval != 0:
      return

    reset = self.config.inner.reset_adam
    for stage in range(self.config.stages):
      if method == OuterMethod.NOLOCO:
        assignment = self.schedules[stage].take(self.outer_step)
        for group in assignment.groups:
          for state in noloco_outer_step([self.states[w] for w in group], self.outer, reset):
            self.states[state.worker_id] = state
          self._barrier(group)
      else:
        members = self.stage_states(stage)
        for state in diloco_outer_step(members, self.outer, reset):
          self.states[state.worker_id] = state
        self._barrier([s.worker_id for s in members])
    self.outer_step += 1

    for wid, state in self.states.items():
      if not np.all(np.isfinite(state.phi)):
        raise NumericalError(
          "non-finite slow weights", worker_id=wid, step=step, last_good_step=self.last_good_step
        )

  def _record(self, step: int) -> MetricsRecord:
    cfg = self.config
    stds = []
    if len(self.active) >= 2:
      stds = [replica_weight_std(self.stage_states(stage)) for stage in range(cfg.stages)]
    return MetricsRecord(
      step=step + 1,
      outer_step=self.outer_step,
      loss_per_replica=list(self._losses),
      val_loss=self._validation_loss(),
      replica_std=stds,
      lr=learning_rate(cfg.inner, step, cfg.steps),
      sim_time=self._sim_time(step),
    )

  def run(self, progress: Optional[ProgressCallback] = None) -> RunResult:
    cfg = self.config
    logger.info(
      "training %s with %s: %d stages x %d replicas, %d steps",
      cfg.workload.value,
      self.outer.method.value,
      cfg.stages,
      cfg.replicas,
      cfg.steps,
    )
    records: List[MetricsRecord] = []
    for step in range(cfg.steps):
      if cfg.workload == Workload.QUADRATIC:
        grads = self._gradients_quadratic(step)
      else:
        grads = self._gradients_mlp(step)
      if not np.all(np.isfinite(self._losses)):
        raise NumericalError("non-finite training loss", step=step, last_good_step=self.last_good_step)

      self._advance_clock(step)
      self._inner_phase(step, grads)
      self._outer_phase(step)

      if (step + 1) % cfg.metrics_every == 0:
        record = self._record(step)
        records.append(record)
        logger.debug("step %d val %.6f std %s", record.step, record.val_loss, record.replica_std)
      self.last_good_step = step
      if progress is not None:
        progress(step + 1)

    return RunResult(config=cfg, topology=self.topology, records=records, states=self.states)


def write_metrics(result: RunResult, path: Path) -> Path:
  """JSON-lines metrics plus the long-format CSV beside it."""
  path = Path(path)
  write_jsonl(path, (r.to_dict() for r in result.records))
  write_csv(
    sidecar_csv_path(path),
    ["step", "value", "series"],
    (row for r in result.records for row in r.csv_rows()),
  )
  result.metrics_path = path
  return path


def run_experiment(
  config: ExperimentConfig,
  output: Optional[Path] = None,
  progress: Optional[ProgressCallback] = None,
) -> RunResult:
  """Train and, when an output path is configured, persist the metrics."""
  result = Trainer(config).run(progress)
  target = output if output is not None else config.output
  if target is not None:
    write_metrics(result, Path(target))
    logger.info("metrics written to %s", target)
  return result


def analytic_config_for(config: ExperimentConfig, horizon: Optional[int] = None):
  """Analytic inputs matching a quadratic NoLoCo experiment.

  The recursions assume constant-rate SGD without clipping; other inner
  settings are reported and the constant base rate is used.
  """
  from ..analytic.predict import AnalyticConfig

  if config.workload != Workload.QUADRATIC:
    raise ConfigError("analysis needs the quadratic workload", field="workload")
  outer = config.outer.resolved()
  if outer.method != OuterMethod.NOLOCO:
    raise ConfigError("analysis covers the NoLoCo outer method", field="outer.method")
  inner = config.inner
  if inner.method != InnerMethod.SGD or inner.schedule != ScheduleKind.CONSTANT or inner.clip_norm:
    logger.warning("analysis assumes constant-rate SGD without clipping; using lr=%g", inner.lr)

  q = config.quadratic
  problem = QuadraticProblem.random(
    q.dim, q.eig_min, q.eig_max, RngStream(config.seed).spawn(Stream.PROBLEM), noise_scale=q.noise
  ).scaled_noise(1.0 / config.batch_size)
  return AnalyticConfig(
    problem=problem,
    omega=inner.lr,
    m=outer.outer_interval,
    alpha=outer.alpha,
    beta=outer.beta,
    gamma=outer.gamma,
    n=outer.group_size,
    horizon=horizon if horizon is not None else config.steps // outer.outer_interval,
  )
