"""Moment recursions for NoLoCo on the quadratic and their Monte-Carlo counterparts."""

from .montecarlo import (
  EnsembleConfig,
  EnsembleMethod,
  EnsembleTrace,
  group_mean_deviation,
  outer_gradient_covariance,
  replica_dispersion,
  simulate_ensemble,
  slow_weight_variance,
)
from .predict import (
  AnalyticConfig,
  AnalyticPrediction,
  expected_phi_sequence,
  predict,
  variance_asymptote,
  variance_sequence,
)
from .recursions import (
  MAX_ANALYTIC_DIM,
  Forcing,
  eigen_D,
  forcing_matrix,
  matrix_B,
  matrix_D,
  matrix_U,
  root_moduli,
  variance_coefficients,
  variance_operator,
)
