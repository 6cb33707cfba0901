"""Closed-form moment recursions for NoLoCo on the stochastic quadratic.

Notation: B = I - omega A, U = omega^2 A Sigma A, F(X) = X - B X B. Covariance
matrices are handled in column-stacked (vec) form, so the map X -> B X B
becomes the Kronecker operator B (x) B.
"""

import math
from enum import Enum
from typing import Tuple

import numpy as np

from ..errors import InvalidParameterError
from ..models.quadratic import QuadraticProblem
from ..numerics.linalg import kron

MAX_ANALYTIC_DIM = 16


class Forcing(str, Enum):
  """Constant term of the outer-gradient variance."""
  SUMMED = "summed"
  EXACT = "exact"


def _check_dim(problem: QuadraticProblem) -> None:
  if problem.d > MAX_ANALYTIC_DIM:
    raise InvalidParameterError(
      f"analytic recursions support d <= {MAX_ANALYTIC_DIM}, got {problem.d}"
    )


def vec(matrix: np.ndarray) -> np.ndarray:
  """Column-stacking vectorization."""
  return np.asarray(matrix).reshape(-1, order="F")


def unvec(vector: np.ndarray, d: int) -> np.ndarray:
  return np.asarray(vector).reshape(d, d, order="F")


def matrix_B(problem: QuadraticProblem, omega: float) -> np.ndarray:
  """I - omega A."""
  return np.eye(problem.d) - omega * problem.a


def matrix_U(problem: QuadraticProblem, omega: float) -> np.ndarray:
  """omega^2 A Sigma A, the per-step gradient noise covariance."""
  return omega * omega * problem.a @ problem.sigma @ problem.a


def matrix_D(problem: QuadraticProblem, omega: float, m: int, alpha: float, beta: float) -> np.ndarray:
  """(1 + alpha) I + beta (B^m - I)."""
  d = problem.d
  b_m = np.linalg.matrix_power(matrix_B(problem, omega), m)
  return (1.0 + alpha) * np.eye(d) + beta * (b_m - np.eye(d))


def eigen_D(alpha: float, beta: float, omega: float, m: int, lambda_i: float) -> float:
  """Eigenvalue of D along the eigendirection of A with eigenvalue ``lambda_i``."""
  if lambda_i <= 0:
    raise InvalidParameterError(f"eigenvalue of A must be positive, got {lambda_i}")
  return 1.0 + alpha - (1.0 - (1.0 - omega * lambda_i) ** m) * beta


def root_moduli(alpha: float, d_eigen: float) -> Tuple[float, float]:
  """Moduli of the roots of r^2 - D r + alpha = 0 (larger first).

  A negative discriminant means a complex-conjugate pair whose modulus is
  exactly sqrt(alpha).
  """
  if not 0 <= alpha < 1:
    raise InvalidParameterError(f"alpha must lie in [0, 1), got {alpha}")
  disc = d_eigen * d_eigen - 4.0 * alpha
  if disc < 0:
    modulus = math.sqrt(alpha)
    return modulus, modulus
  root = math.sqrt(disc)
  r1 = abs(0.5 * (d_eigen + root))
  r2 = abs(0.5 * (d_eigen - root))
  return max(r1, r2), min(r1, r2)


def inverse_F(problem: QuadraticProblem, omega: float, x: np.ndarray) -> np.ndarray:
  """Solve X - B X B = x for X."""
  d = problem.d
  b = matrix_B(problem, omega)
  operator = np.eye(d * d) - kron(b, b)
  return unvec(np.linalg.solve(operator, vec(x)), d)


def forcing_matrix(
  problem: QuadraticProblem,
  omega: float,
  m: int,
  forcing: Forcing = Forcing.SUMMED,
) -> np.ndarray:
  """The constant matrix R' of the outer-gradient variance.

  ``SUMMED`` adds the per-step gradient variances of the inner phase,
  omega^2 A (sum_k F^-1(U - B^k U B^k)) A + m U. ``EXACT`` is the covariance of
  the accumulated inner noise for fixed slow weights, F^-1(U - B^m U B^m).
  """
  _check_dim(problem)
  b = matrix_B(problem, omega)
  u = matrix_U(problem, omega)

  if Forcing(forcing) == Forcing.EXACT:
    b_m = np.linalg.matrix_power(b, m)
    return inverse_F(problem, omega, u - b_m @ u @ b_m)

  accumulated = np.zeros_like(u)
  b_k = np.eye(problem.d)
  for _ in range(m):
    accumulated += u - b_k @ u @ b_k
    b_k = b_k @ b
  propagated = inverse_F(problem, omega, accumulated)
  return omega * omega * problem.a @ propagated @ problem.a + m * u


def variance_operator(problem: QuadraticProblem, omega: float, m: int) -> np.ndarray:
  """B_V = omega^2 (A (x) A) (I - B (x) B)^-1 (I - B^m (x) B^m)."""
  _check_dim(problem)
  d = problem.d
  b = matrix_B(problem, omega)
  b_m = np.linalg.matrix_power(b, m)
  identity = np.eye(d * d)
  propagated = np.linalg.solve(identity - kron(b, b), identity - kron(b_m, b_m))
  return omega * omega * kron(problem.a, problem.a) @ propagated


def variance_coefficients(
  problem: QuadraticProblem,
  omega: float,
  m: int,
  alpha: float,
  beta: float,
  gamma: float,
  n: int,
) -> Tuple[float, np.ndarray]:
  """(d_V, E_V) of U_{t+1} = d_V U_t + E_V U_{t-1} + R''."""
  pull = 2.0 * gamma * gamma * (n - 1) / n
  d_v = 1.0 + alpha * alpha - pull
  c_v = (beta * beta / n) * variance_operator(problem, omega, m)
  c_v = c_v + 2.0 * gamma * gamma * ((n - 1) / n) ** 2 * np.eye(problem.d ** 2)
  e_v = c_v - alpha * alpha * (1.0 - pull) * np.eye(problem.d ** 2)
  return d_v, e_v


def forcing_vector(
  problem: QuadraticProblem,
  omega: float,
  m: int,
  beta: float,
  n: int,
  forcing: Forcing = Forcing.SUMMED,
) -> np.ndarray:
  """R'' = (beta^2 / n) vec(R')."""
  return (beta * beta / n) * vec(forcing_matrix(problem, omega, m, forcing))


def expected_phi_recursion(
  problem: QuadraticProblem,
  omega: float,
  m: int,
  alpha: float,
  beta: float,
  phi0: np.ndarray,
  horizon: int,
) -> np.ndarray:
  """E(phi_t) for t = 0..horizon as a (horizon + 1, d) array.

  E(phi_0) = phi0, E(phi_1) = (I + beta (B^m - I)) phi0, then
  E(phi_{t+1}) = D E(phi_t) - alpha E(phi_{t-1}).
  """
  phi0 = np.asarray(phi0, dtype=np.float64)
  d = problem.d
  b_m = np.linalg.matrix_power(matrix_B(problem, omega), m)
  first = np.eye(d) + beta * (b_m - np.eye(d))
  big_d = matrix_D(problem, omega, m, alpha, beta)

  out = np.zeros((horizon + 1, d))
  out[0] = phi0
  if horizon >= 1:
    out[1] = first @ phi0
  with np.errstate(over="ignore", invalid="ignore"):
    for t in range(1, horizon):
      out[t + 1] = big_d @ out[t] - alpha * out[t - 1]
  return out


def variance_recursion(
  problem: QuadraticProblem,
  omega: float,
  m: int,
  alpha: float,
  beta: float,
  gamma: float,
  n: int,
  horizon: int,
  forcing: Forcing = Forcing.SUMMED,
) -> np.ndarray:
  """vec(V(phi_t)) for t = 0..horizon as a (horizon + 1, d^2) array, from V(phi_0) = 0."""
  _check_dim(problem)
  d_v, e_v = variance_coefficients(problem, omega, m, alpha, beta, gamma, n)
  r2 = forcing_vector(problem, omega, m, beta, n, forcing)

  out = np.zeros((horizon + 1, problem.d ** 2))
  prev = np.zeros(problem.d ** 2)
  with np.errstate(over="ignore", invalid="ignore"):
    for t in range(horizon):
      out[t + 1] = d_v * out[t] + e_v @ prev + r2
      prev = out[t]
  return out


def variance_fixed_point(
  problem: QuadraticProblem,
  omega: float,
  m: int,
  alpha: float,
  beta: float,
  gamma: float,
  n: int,
  forcing: Forcing = Forcing.SUMMED,
) -> np.ndarray:
  """Steady state of the variance recursion: (I - d_V I - E_V)^-1 R''."""
  d_v, e_v = variance_coefficients(problem, omega, m, alpha, beta, gamma, n)
  r2 = forcing_vector(problem, omega, m, beta, n, forcing)
  operator = (1.0 - d_v) * np.eye(problem.d ** 2) - e_v
  return unvec(np.linalg.solve(operator, r2), problem.d)


def trace_of_vec(u: np.ndarray, d: int) -> np.ndarray:
  """Trace of each vec'd covariance along the last axis."""
  diagonal = [i * d + i for i in range(d)]
  return np.asarray(u)[..., diagonal].sum(axis=-1)
