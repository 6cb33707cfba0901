"""Bundled analytic prediction for one quadratic configuration."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..errors import InvalidParameterError
from ..models.quadratic import QuadraticProblem
from ..optimizers.outer import gamma_bounds
from .recursions import (
  MAX_ANALYTIC_DIM,
  Forcing,
  eigen_D,
  expected_phi_recursion,
  root_moduli,
  trace_of_vec,
  variance_coefficients,
  variance_fixed_point,
  variance_recursion,
)

logger = logging.getLogger(__name__)


@dataclass
class AnalyticConfig:
  """Inputs of the moment recursions.

  Attributes:
    problem: Quadratic workload (d <= 16)
    omega: Constant inner SGD learning rate
    m: Inner steps per outer step
    alpha, beta, gamma: Outer momentum, outer learning rate, group pull
    n: Group size
    horizon: Number of outer steps T
    forcing: Constant term of the outer-gradient variance
  """
  problem: QuadraticProblem
  omega: float
  m: int
  alpha: float = 0.5
  beta: float = 0.7
  gamma: Optional[float] = None
  n: int = 2
  horizon: int = 200
  forcing: Forcing = Forcing.SUMMED

  def __post_init__(self):
    if self.omega <= 0:
      raise InvalidParameterError(f"omega must be positive, got {self.omega}")
    if self.m < 1:
      raise InvalidParameterError(f"m must be at least 1, got {self.m}")
    if not 0 <= self.alpha < 1:
      raise InvalidParameterError(f"alpha must lie in [0, 1), got {self.alpha}")
    if self.beta <= 0:
      raise InvalidParameterError(f"beta must be positive, got {self.beta}")
    if self.n < 2:
      raise InvalidParameterError(f"group size must be at least 2, got {self.n}")
    if self.horizon < 0:
      raise InvalidParameterError(f"horizon must be non-negative, got {self.horizon}")
    if self.problem.d > MAX_ANALYTIC_DIM:
      raise InvalidParameterError(
        f"analytic recursions support d <= {MAX_ANALYTIC_DIM}, got {self.problem.d}"
      )
    if self.gamma is None:
      lo, hi = gamma_bounds(self.alpha, self.n)
      self.gamma = 0.5 * (lo + hi)
    self.forcing = Forcing(self.forcing)

  @property
  def gamma_interval(self) -> Tuple[float, float]:
    return gamma_bounds(self.alpha, self.n)


@dataclass
class AnalyticPrediction:
  """Expectation and variance trajectories plus their stability indicators."""
  expected_phi: np.ndarray
  variance_trace: np.ndarray
  eigen_d: List[float]
  root_moduli: List[Tuple[float, float]]
  gamma_interval: Tuple[float, float]
  d_v: float
  asymptote: Optional[float]
  converges: bool
  forcing: Forcing = Forcing.SUMMED
  meta: Dict[str, Any] = field(default_factory=dict)

  def to_dict(self) -> Dict[str, Any]:
    """JSON-compatible representation."""
    return {
      "expected_phi": self.expected_phi.tolist(),
      "variance_trace": self.variance_trace.tolist(),
      "eigen_d": list(self.eigen_d),
      "root_moduli": [list(pair) for pair in self.root_moduli],
      "gamma_interval": list(self.gamma_interval),
      "d_v": self.d_v,
      "asymptote": self.asymptote,
      "converges": self.converges,
      "forcing": self.forcing.value,
      **self.meta,
    }


def expected_phi_sequence(cfg: AnalyticConfig, phi0: np.ndarray) -> np.ndarray:
  """E(phi_t) for t = 0..T; shape (T + 1, d)."""
  phi0 = np.asarray(phi0, dtype=np.float64)
  if phi0.shape != (cfg.problem.d,):
    raise InvalidParameterError(f"phi0 must have shape ({cfg.problem.d},), got {phi0.shape}")
  return expected_phi_recursion(cfg.problem, cfg.omega, cfg.m, cfg.alpha, cfg.beta, phi0, cfg.horizon)


def variance_sequence(cfg: AnalyticConfig) -> np.ndarray:
  """Trace of V(phi_t) for t = 0..T.

  Outside the stability interval the sequence simply grows; ``predict``
  reports that through ``converges``.
  """
  u = variance_recursion(
    cfg.problem, cfg.omega, cfg.m, cfg.alpha, cfg.beta, cfg.gamma, cfg.n, cfg.horizon, cfg.forcing
  )
  return trace_of_vec(u, cfg.problem.d)


def variance_asymptote(cfg: AnalyticConfig) -> float:
  """Trace of the steady-state slow-weight covariance."""
  fixed = variance_fixed_point(
    cfg.problem, cfg.omega, cfg.m, cfg.alpha, cfg.beta, cfg.gamma, cfg.n, cfg.forcing
  )
  return float(np.trace(fixed))


def predict(cfg: AnalyticConfig, phi0: Optional[np.ndarray] = None) -> AnalyticPrediction:
  """Evaluate every analytic quantity for ``cfg``.

  ``phi0`` defaults to the all-ones vector.
  """
  d = cfg.problem.d
  if phi0 is None:
    phi0 = np.ones(d)

  eigen = [
    eigen_D(cfg.alpha, cfg.beta, cfg.omega, cfg.m, float(lam)) for lam in cfg.problem.eigenvalues
  ]
  moduli = [root_moduli(cfg.alpha, value) for value in eigen]
  d_v, _ = variance_coefficients(
    cfg.problem, cfg.omega, cfg.m, cfg.alpha, cfg.beta, cfg.gamma, cfg.n
  )
  converges = all(r < 1.0 for pair in moduli for r in pair) and abs(d_v) < 1.0

  asymptote: Optional[float] = None
  if converges:
    asymptote = variance_asymptote(cfg)
  else:
    logger.info("configuration does not converge (|d_V| = %.4f)", abs(d_v))

  return AnalyticPrediction(
    expected_phi=expected_phi_sequence(cfg, phi0),
    variance_trace=variance_sequence(cfg),
    eigen_d=eigen,
    root_moduli=moduli,
    gamma_interval=cfg.gamma_interval,
    d_v=d_v,
    asymptote=asymptote,
    converges=converges,
    forcing=cfg.forcing,
    meta={
      "d": d,
      "omega": cfg.omega,
      "m": cfg.m,
      "alpha": cfg.alpha,
      "beta": cfg.beta,
      "gamma": cfg.gamma,
      "n": cfg.n,
      "horizon": cfg.horizon,
    },
  )
