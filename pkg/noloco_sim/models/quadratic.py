"""Stochastic quadratic workload: L(theta) = 1/2 (theta - c)^T A (theta - c), c ~ N(0, Sigma)."""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ..errors import InvalidParameterError, ShapeError
from ..numerics.linalg import make_spd_matrix, psd_factor, sample_gaussian_vector
from ..numerics.rng import RngStream


@dataclass(frozen=True, eq=False)
class QuadraticProblem:
  """The quadratic loss with symmetric PD curvature ``a`` and noise covariance ``sigma``."""
  a: np.ndarray
  sigma: np.ndarray
  noise_factor: np.ndarray = field(init=False, repr=False, compare=False)

  def __post_init__(self):
    a = np.asarray(self.a, dtype=np.float64)
    sigma = np.asarray(self.sigma, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
      raise ShapeError(f"A must be square, got shape {a.shape}")
    if sigma.shape != a.shape:
      raise ShapeError(f"Sigma shape {sigma.shape} does not match A shape {a.shape}")
    if not np.allclose(a, a.T, rtol=1e-12, atol=1e-12):
      raise InvalidParameterError("A must be symmetric")
    if np.linalg.eigvalsh(a)[0] <= 0:
      raise InvalidParameterError("A must be positive definite")

    object.__setattr__(self, "a", a)
    object.__setattr__(self, "sigma", sigma)
    # Validates Sigma as PSD as a side effect
    object.__setattr__(self, "noise_factor", psd_factor(sigma))

  @property
  def d(self) -> int:
    return self.a.shape[0]

  @property
  def eigenvalues(self) -> np.ndarray:
    """Eigenvalues of A in ascending order."""
    return np.linalg.eigvalsh(self.a)

  def scaled_noise(self, factor: float) -> "QuadraticProblem":
    """Same curvature with Sigma multiplied by ``factor`` (minibatch averaging)."""
    return QuadraticProblem(a=self.a, sigma=self.sigma * factor)

  def sample_targets(self, rng: RngStream, shape: Tuple[int, ...] = ()) -> np.ndarray:
    """Draw noise vectors c with leading ``shape``."""
    size = shape if shape else None
    return sample_gaussian_vector(self.sigma, rng, size=size, factor=self.noise_factor)

  def expected_loss(self, theta: np.ndarray) -> float:
    """E_c L(theta) = 1/2 theta^T A theta + 1/2 tr(A Sigma)."""
    theta = np.asarray(theta, dtype=np.float64)
    return float(0.5 * theta @ self.a @ theta + 0.5 * np.trace(self.a @ self.sigma))

  @classmethod
  def random(
    cls,
    d: int,
    eig_min: float,
    eig_max: float,
    rng: RngStream,
    noise_scale: float = 1.0,
    noise_eigs: Optional[Tuple[float, float]] = None,
  ) -> "QuadraticProblem":
    """Random instance; Sigma is ``noise_scale * I`` unless ``noise_eigs`` is given."""
    a = make_spd_matrix(d, eig_min, eig_max, rng.spawn(0))
    if noise_eigs is None:
      sigma = noise_scale * np.eye(d)
    else:
      sigma = noise_scale * make_spd_matrix(d, noise_eigs[0], noise_eigs[1], rng.spawn(1))
    return cls(a=a, sigma=sigma)

  @classmethod
  def isotropic(cls, d: int, curvature: float = 1.0, noise: float = 1.0) -> "QuadraticProblem":
    return cls(a=curvature * np.eye(d), sigma=noise * np.eye(d))


def _check_pair(theta: np.ndarray, c: np.ndarray, problem: QuadraticProblem):
  theta = np.asarray(theta, dtype=np.float64)
  c = np.asarray(c, dtype=np.float64)
  if theta.shape[-1:] != (problem.d,) or c.shape[-1:] != (problem.d,):
    raise ShapeError(
      f"expected trailing dimension {problem.d}, got theta {theta.shape} and c {c.shape}"
    )
  return theta, c


def quadratic_loss(theta: np.ndarray, c: np.ndarray, problem: QuadraticProblem) -> float:
  """1/2 (theta - c)^T A (theta - c)."""
  theta, c = _check_pair(theta, c, problem)
  if theta.ndim != 1 or c.ndim != 1:
    raise ShapeError("quadratic_loss takes single vectors")
  r = theta - c
  return float(max(0.5 * r @ problem.a @ r, 0.0))


def quadratic_grad(theta: np.ndarray, c: np.ndarray, problem: QuadraticProblem) -> np.ndarray:
  """A (theta - c); broadcasts over leading axes."""
  theta, c = _check_pair(theta, c, problem)
  # A is symmetric, so the row-vector form equals A (theta - c)
  return (theta - c) @ problem.a
