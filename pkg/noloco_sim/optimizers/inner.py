"""Inner optimizers: SGD and Adam with global-norm clipping."""

from dataclasses import replace
from typing import Optional, Tuple

import numpy as np

from ..config import InnerConfig, InnerMethod, ScheduleKind
from ..errors import InvalidParameterError, NumericalError
from .schedule import learning_rate
from .state import WorkerState


def clip_by_norm(grad: np.ndarray, clip_norm: Optional[float]) -> np.ndarray:
  """Rescale ``grad`` to L2 norm ``clip_norm`` when it is larger."""
  if clip_norm is None:
    return grad
  norm = float(np.linalg.norm(grad))
  if norm > clip_norm:
    return grad * (clip_norm / norm)
  return grad


def sgd_update(theta: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
  """theta - lr * grad; broadcasts over leading ensemble axes."""
  return theta - lr * grad


def adam_update(
  theta: np.ndarray,
  grad: np.ndarray,
  m: np.ndarray,
  v: np.ndarray,
  t: int,
  lr: float,
  beta1: float,
  beta2: float,
  eps: float,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
  """One bias-corrected Adam step; ``t`` is the 1-based step count."""
  m = beta1 * m + (1.0 - beta1) * grad
  v = beta2 * v + (1.0 - beta2) * grad * grad
  m_hat = m / (1.0 - beta1**t)
  v_hat = v / (1.0 - beta2**t)
  return theta - lr * m_hat / (np.sqrt(v_hat) + eps), m, v


def inner_step(
  state: WorkerState,
  grad: np.ndarray,
  cfg: InnerConfig,
  global_step: int,
  total_steps: Optional[int] = None,
) -> WorkerState:
  """Advance the fast weights by one inner step.

  ``total_steps`` is required by the cosine schedule; the constant
  schedule ignores it.

  Raises:
    NumericalError: when ``grad`` has a non-finite entry
    InvalidParameterError: when the cosine schedule gets no ``total_steps``
  """
  if total_steps is None and cfg.schedule == ScheduleKind.COSINE:
    raise InvalidParameterError("the cosine schedule needs total_steps")

  grad = np.asarray(grad, dtype=np.float64)
  if not np.all(np.isfinite(grad)):
    raise NumericalError("non-finite gradient", worker_id=state.worker_id, step=global_step)

  grad = clip_by_norm(grad, cfg.clip_norm)
  lr = learning_rate(cfg, global_step, total_steps if total_steps is not None else global_step)

  if cfg.method == InnerMethod.SGD:
    return replace(state, theta=sgd_update(state.theta, grad, lr))

  m = np.zeros_like(state.theta) if state.adam_m is None else state.adam_m
  v = np.zeros_like(state.theta) if state.adam_v is None else state.adam_v
  t = state.adam_t + 1
  theta, m, v = adam_update(
    state.theta, grad, m, v, t, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
  )
  return replace(state, theta=theta, adam_m=m, adam_v=v, adam_t=t)
