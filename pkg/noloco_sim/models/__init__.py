"""Desk-scale workloads: the stochastic quadratic and a staged MLP."""

from .data import Batch, RegressionTask, make_regression_task
from .mlp import (
  Activation,
  BlockSpec,
  StageActivations,
  StagedMLP,
  StageLayout,
  mlp_backward_stage,
  mlp_forward,
  mlp_forward_stage,
  mse_loss,
)
from .quadratic import QuadraticProblem, quadratic_grad, quadratic_loss
