"""Inner optimizers and the outer synchronization methods."""

from .groups import GroupAssignment, GroupSchedule, sample_group_indices, sample_groups
from .inner import adam_update, clip_by_norm, inner_step, sgd_update
from .outer import (
  anchored_mean,
  default_gamma,
  diloco_outer_step,
  diloco_update,
  gamma_bounds,
  noloco_outer_step,
  noloco_update,
  outer_gradient,
  sync_dp_step,
)
from .schedule import learning_rate
from .state import WorkerState
