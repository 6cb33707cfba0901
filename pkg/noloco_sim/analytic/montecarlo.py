"""Vectorized Monte-Carlo ensembles of the quadratic workload.

Every array carries a leading ensemble axis of independent runs, so hundreds
of seeded runs advance together in a single numpy expression. The update
rules are the ones the trainer uses, applied to stacked arrays.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from ..errors import InvalidParameterError
from ..models.quadratic import QuadraticProblem, quadratic_grad
from ..numerics.rng import RngStream, Stream
from ..optimizers.groups import sample_group_indices
from ..optimizers.inner import sgd_update
from ..optimizers.outer import diloco_update, noloco_update

logger = logging.getLogger(__name__)


class EnsembleMethod(str, Enum):
  NOLOCO = "noloco"
  DILOCO = "diloco"


@dataclass
class EnsembleConfig:
  """One ensemble: ``runs`` independent seeded copies of an R-replica stage."""
  problem: QuadraticProblem
  omega: float
  m: int
  alpha: float
  beta: float
  gamma: float = 0.0
  n: int = 2
  replicas: int = 2
  runs: int = 256
  outer_steps: int = 100
  method: EnsembleMethod = EnsembleMethod.NOLOCO
  seed: int = 0

  def __post_init__(self):
    self.method = EnsembleMethod(self.method)
    if self.omega <= 0 or self.m < 1 or self.runs < 1 or self.outer_steps < 0:
      raise InvalidParameterError("omega, m and runs must be positive, outer_steps non-negative")
    if self.method == EnsembleMethod.NOLOCO and (self.n < 2 or self.replicas % self.n != 0):
      raise InvalidParameterError(
        f"group size {self.n} must be at least 2 and divide {self.replicas} replicas"
      )


@dataclass
class EnsembleTrace:
  """Slow weights at the recorded outer steps.

  Attributes:
    steps: Recorded outer-step indices (0 is the initial point)
    phi: Array (len(steps), runs, replicas, d)
    groups: Group indices (len(steps), runs, R / n, n) sampled for the outer step
      that follows each recorded step; None for DiLoCo
  """
  steps: np.ndarray
  phi: np.ndarray
  groups: Optional[np.ndarray] = None

  def at(self, step: int) -> np.ndarray:
    matches = np.flatnonzero(self.steps == step)
    if matches.size == 0:
      raise KeyError(step)
    return self.phi[matches[0]]


def _gather(x: np.ndarray, flat_index: np.ndarray) -> np.ndarray:
  index = np.broadcast_to(flat_index[..., None], flat_index.shape + x.shape[-1:])
  return np.take_along_axis(x, index, axis=1)


def _scatter(x: np.ndarray, flat_index: np.ndarray) -> np.ndarray:
  out = np.empty_like(x)
  index = np.broadcast_to(flat_index[..., None], flat_index.shape + x.shape[-1:])
  np.put_along_axis(out, index, x, axis=1)
  return out


def inner_phase(
  problem: QuadraticProblem,
  theta: np.ndarray,
  omega: float,
  m: int,
  rng: RngStream,
) -> np.ndarray:
  """m constant-rate SGD steps on fresh noise; ``theta`` has shape (..., d)."""
  for _ in range(m):
    c = problem.sample_targets(rng, theta.shape[:-1])
    theta = sgd_update(theta, quadratic_grad(theta, c, problem), omega)
  return theta


def simulate_ensemble(
  cfg: EnsembleConfig,
  phi0: Optional[np.ndarray] = None,
  record: Optional[Sequence[int]] = None,
) -> EnsembleTrace:
  """Run the ensemble and keep phi at the outer steps listed in ``record``.

  ``record`` defaults to every outer step 0..outer_steps. All replicas start
  from ``phi0`` (default zero) with zero momentum.
  """
  d = cfg.problem.d
  runs, replicas = cfg.runs, cfg.replicas
  start = np.zeros(d) if phi0 is None else np.asarray(phi0, dtype=np.float64)
  if start.shape != (d,):
    raise InvalidParameterError(f"phi0 must have shape ({d},), got {start.shape}")

  wanted = set(range(cfg.outer_steps + 1) if record is None else record)
  root = RngStream(cfg.seed).spawn(Stream.ENSEMBLE)
  noise_rng = root.spawn(0)
  group_gen = root.spawn(1).generator

  phi = np.broadcast_to(start, (runs, replicas, d)).copy()
  shared = cfg.method == EnsembleMethod.DILOCO
  delta = np.zeros((runs, d)) if shared else np.zeros((runs, replicas, d))

  steps, snapshots, group_log = [], [], []
  groups = None
  if not shared:
    groups = sample_group_indices(runs, replicas, cfg.n, group_gen)

  for t in range(cfg.outer_steps + 1):
    if t in wanted:
      steps.append(t)
      snapshots.append(phi.copy())
      if groups is not None:
        group_log.append(groups.copy())
    if t == cfg.outer_steps:
      break

    theta = inner_phase(cfg.problem, phi, cfg.omega, cfg.m, noise_rng)
    outer_grad = theta - phi

    if shared:
      new_phi, delta = diloco_update(phi[:, 0], delta, outer_grad, cfg.alpha, cfg.beta)
      phi = np.broadcast_to(new_phi[:, None, :], phi.shape).copy()
      continue

    flat = groups.reshape(runs, replicas)
    grouped_shape = (runs, replicas // cfg.n, cfg.n, d)
    new_phi, new_delta = noloco_update(
      _gather(phi, flat).reshape(grouped_shape),
      _gather(delta, flat).reshape(grouped_shape),
      _gather(outer_grad, flat).reshape(grouped_shape),
      cfg.alpha,
      cfg.beta,
      cfg.gamma,
    )
    phi = _scatter(new_phi.reshape(runs, replicas, d), flat)
    delta = _scatter(new_delta.reshape(runs, replicas, d), flat)
    groups = sample_group_indices(runs, replicas, cfg.n, group_gen)

  logger.debug("ensemble of %d runs finished %d outer steps", runs, cfg.outer_steps)
  return EnsembleTrace(
    steps=np.asarray(steps),
    phi=np.stack(snapshots),
    groups=np.stack(group_log) if group_log else None,
  )


def slow_weight_variance(phi: np.ndarray) -> np.ndarray:
  """Variance of phi across runs, averaged over replicas, summed over coordinates.

  ``phi`` has shape (..., runs, replicas, d); the result drops the last three axes.
  """
  spread = np.var(phi, axis=-3, ddof=1)
  return spread.mean(axis=-2).sum(axis=-1)


def replica_dispersion(phi: np.ndarray) -> np.ndarray:
  """Within-run population variance across replicas (trace), averaged over runs."""
  return np.var(phi, axis=-2).sum(axis=-1).mean(axis=-1)


def group_mean_deviation(trace: EnsembleTrace, replica: int = 0) -> np.ndarray:
  """phi of ``replica`` minus the mean of the group it joins at the next outer step.

  Returns:
    Array (len(steps), runs, d)
  """
  if trace.groups is None:
    raise InvalidParameterError("deviation from the group mean needs a NoLoCo trace")
  out = []
  for phi, groups in zip(trace.phi, trace.groups):
    runs = phi.shape[0]
    # Locate the group holding ``replica`` in every run
    hit = (groups == replica).any(axis=-1)
    members = groups[np.arange(runs), hit.argmax(axis=-1)]
    group_phi = np.take_along_axis(phi, members[..., None], axis=1)
    out.append(phi[:, replica] - group_phi.mean(axis=1))
  return np.stack(out)


def outer_gradient_covariance(
  problem: QuadraticProblem,
  omega: float,
  m: int,
  runs: int,
  seed: int = 0,
  phi: Optional[np.ndarray] = None,
) -> np.ndarray:
  """Sample covariance (d x d) of Delta after one inner phase from fixed slow weights."""
  start = np.zeros(problem.d) if phi is None else np.asarray(phi, dtype=np.float64)
  rng = RngStream(seed).spawn(Stream.ENSEMBLE, 2)
  theta = np.broadcast_to(start, (runs, problem.d)).copy()
  outer_grad = inner_phase(problem, theta, omega, m, rng) - start
  return np.cov(outer_grad, rowvar=False).reshape(problem.d, problem.d)
