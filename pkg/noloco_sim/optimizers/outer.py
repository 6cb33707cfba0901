"""Outer optimizers: NoLoCo gossip momentum, DiLoCo and synchronous data parallel.

Update rule shared by the momentum methods (Delta = theta - phi):

  delta_i <- alpha * delta_i + beta * mean_g(Delta) - gamma * (phi_i - mean_g(phi))
  phi_i   <- phi_i + delta_i
  theta_i <- phi_i

where mean_g runs over the worker's group. DiLoCo is the case of one group
holding every replica, for which the gamma term vanishes.
"""

import math
from dataclasses import replace
from typing import List, Sequence, Tuple

import numpy as np

from ..config import InnerConfig, OuterConfig
from ..errors import InvalidParameterError, ShapeError
from .inner import inner_step
from .state import WorkerState


def anchored_mean(x: np.ndarray, axis: int = 0) -> np.ndarray:
  """Mean computed as x[0] + mean(x - x[0]) along ``axis`` (keepdims).

  Returns x[0] bit-for-bit when all slices are equal, which keeps NoLoCo's
  gamma term exactly zero for identical replicas.
  """
  first = np.take(x, [0], axis=axis)
  return first + np.mean(x - first, axis=axis, keepdims=True)


def outer_gradient(state: WorkerState) -> np.ndarray:
  """Delta = theta - phi."""
  return state.theta - state.phi


def noloco_update(
  phi: np.ndarray,
  delta: np.ndarray,
  outer_grad: np.ndarray,
  alpha: float,
  beta: float,
  gamma: float,
  axis: int = -2,
) -> Tuple[np.ndarray, np.ndarray]:
  """Group update on stacked arrays; ``axis`` indexes group members."""
  mean_grad = anchored_mean(outer_grad, axis=axis)
  mean_phi = anchored_mean(phi, axis=axis)
  delta = alpha * delta + beta * mean_grad - gamma * (phi - mean_phi)
  return phi + delta, delta


def diloco_update(
  phi: np.ndarray,
  delta: np.ndarray,
  outer_grads: np.ndarray,
  alpha: float,
  beta: float,
  axis: int = -2,
) -> Tuple[np.ndarray, np.ndarray]:
  """Shared-state update: ``phi`` and ``delta`` carry no member axis."""
  mean_grad = np.squeeze(anchored_mean(outer_grads, axis=axis), axis=axis)
  delta = alpha * delta + beta * mean_grad
  return phi + delta, delta


def _stack(states: Sequence[WorkerState], attr: str) -> np.ndarray:
  dims = {s.dim for s in states}
  if len(dims) != 1:
    raise ShapeError(f"group members have different parameter sizes {sorted(dims)}")
  return np.stack([getattr(s, attr) for s in states])


def noloco_outer_step(
  group: Sequence[WorkerState],
  cfg: OuterConfig,
  reset_adam: bool = False,
) -> List[WorkerState]:
  """Apply the gossip momentum update to one group; members in worker-id order."""
  members = sorted(group, key=lambda s: s.worker_id)
  phi = _stack(members, "phi")
  theta = _stack(members, "theta")
  delta = _stack(members, "delta")

  new_phi, new_delta = noloco_update(phi, delta, theta - phi, cfg.alpha, cfg.beta, cfg.gamma)
  updated = []
  for i, state in enumerate(members):
    s = replace(state, phi=new_phi[i], delta=new_delta[i], theta=new_phi[i].copy())
    updated.append(s.reset_adam() if reset_adam else s)
  return updated


def diloco_outer_step(
  states: Sequence[WorkerState],
  cfg: OuterConfig,
  reset_adam: bool = False,
) -> List[WorkerState]:
  """All-reduce Nesterov step; every replica mirrors the same phi and delta."""
  members = sorted(states, key=lambda s: s.worker_id)
  phi = _stack(members, "phi")
  theta = _stack(members, "theta")

  new_phi, new_delta = diloco_update(phi[0], members[0].delta, theta - phi, cfg.alpha, cfg.beta)
  updated = []
  for state in members:
    s = replace(state, phi=new_phi.copy(), delta=new_delta.copy(), theta=new_phi.copy())
    updated.append(s.reset_adam() if reset_adam else s)
  return updated


def sync_dp_step(
  states: Sequence[WorkerState],
  grads: Sequence[np.ndarray],
  cfg: InnerConfig,
  global_step: int,
  total_steps: int,
) -> List[WorkerState]:
  """Average gradients, take one inner step on the shared weights, mirror to all."""
  if len(states) != len(grads):
    raise ShapeError(f"{len(states)} replicas but {len(grads)} gradients")
  members = sorted(zip(states, grads), key=lambda pair: pair[0].worker_id)
  stacked = np.stack([np.asarray(g, dtype=np.float64) for _, g in members])
  if stacked.shape[1:] != members[0][0].theta.shape:
    raise ShapeError(f"gradient shape {stacked.shape[1:]} != parameter shape {members[0][0].theta.shape}")
  mean_grad = anchored_mean(stacked, axis=0)[0]

  leader = inner_step(members[0][0], mean_grad, cfg, global_step, total_steps)
  updated = []
  for state, _ in members:
    updated.append(
      replace(
        state,
        theta=leader.theta.copy(),
        phi=leader.theta.copy(),
        adam_m=None if leader.adam_m is None else leader.adam_m.copy(),
        adam_v=None if leader.adam_v is None else leader.adam_v.copy(),
        adam_t=leader.adam_t,
      )
    )
  return updated


def gamma_bounds(alpha: float, n: int) -> Tuple[float, float]:
  """Open interval of gamma that keeps the cross-replica variance bounded."""
  if n < 2:
    raise InvalidParameterError(f"group size must be at least 2, got {n}")
  if not 0 <= alpha < 1:
    raise InvalidParameterError(f"alpha must lie in [0, 1), got {alpha}")
  ratio = n / (2.0 * (n - 1))
  return math.sqrt(ratio) * alpha, math.sqrt(ratio * (2.0 + alpha * alpha))


def default_gamma(alpha: float, n: int) -> float:
  """Midpoint of ``gamma_bounds``."""
  lo, hi = gamma_bounds(alpha, n)
  return 0.5 * (lo + hi)
