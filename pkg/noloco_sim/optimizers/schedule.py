"""Inner learning-rate schedules."""

import math

from ..config import InnerConfig, ScheduleKind


def learning_rate(cfg: InnerConfig, step: int, total_steps: int) -> float:
  """Learning rate at ``step`` (0-based).

  The cosine schedule ramps linearly from 0 to ``cfg.lr`` over
  ``warmup_steps`` and then follows a half cosine down to
  ``floor_fraction * cfg.lr`` at ``total_steps``.
  """
  if cfg.schedule == ScheduleKind.CONSTANT:
    return cfg.lr

  if step < cfg.warmup_steps:
    return cfg.lr * step / cfg.warmup_steps

  decay_steps = max(total_steps - cfg.warmup_steps, 1)
  progress = min((step - cfg.warmup_steps) / decay_steps, 1.0)
  floor = cfg.floor_fraction * cfg.lr
  return floor + (cfg.lr - floor) * 0.5 * (1.0 + math.cos(math.pi * progress))
