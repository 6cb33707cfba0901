"""Dense linear algebra helpers."""

from typing import Optional, Tuple, Union

import numpy as np
from scipy.linalg import lapack

from ..errors import DecompositionError, InvalidParameterError, ShapeError
from .rng import RngStream

PSD_TOLERANCE = 1e-10


def _check_square(matrix: np.ndarray, name: str) -> np.ndarray:
  matrix = np.asarray(matrix, dtype=np.float64)
  if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.size == 0:
    raise ShapeError(f"{name} must be a non-empty square matrix, got shape {matrix.shape}")
  if not np.all(np.isfinite(matrix)):
    raise InvalidParameterError(f"{name} has non-finite entries")
  return matrix


def random_orthogonal(d: int, rng: RngStream) -> np.ndarray:
  """Haar-distributed orthogonal matrix (QR of a Gaussian, R diagonal made positive)."""
  gaussian = rng.normal((d, d))
  q, r = np.linalg.qr(gaussian)
  signs = np.sign(np.diag(r))
  signs[signs == 0] = 1.0
  return q * signs


def make_spd_matrix(d: int, eig_min: float, eig_max: float, rng: RngStream) -> np.ndarray:
  """Random symmetric positive definite matrix Q diag(lambda) Q^T.

  Eigenvalues are drawn uniformly from [eig_min, eig_max].
  """
  if d < 1:
    raise InvalidParameterError(f"dimension must be at least 1, got {d}")
  if eig_min <= 0:
    raise InvalidParameterError(f"eig_min must be positive, got {eig_min}")
  if eig_max < eig_min:
    raise InvalidParameterError(f"eig_max ({eig_max}) must be >= eig_min ({eig_min})")

  q = random_orthogonal(d, rng)
  eigenvalues = rng.uniform(eig_min, eig_max, d)
  matrix = (q * eigenvalues) @ q.T
  return 0.5 * (matrix + matrix.T)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
  """Kronecker product: out[i*rb + k, j*cb + l] = a[i, j] * b[k, l]."""
  a = np.atleast_2d(np.asarray(a, dtype=np.float64))
  b = np.atleast_2d(np.asarray(b, dtype=np.float64))
  if a.size == 0 or b.size == 0:
    raise ShapeError("kron operands must be non-empty")
  return np.kron(a, b)


def psd_factor(sigma: np.ndarray) -> np.ndarray:
  """Factor L with L L^T = sigma for a symmetric PSD matrix.

  Uses LAPACK's pivoted Cholesky so rank-deficient covariances work.
  """
  sigma = _check_square(sigma, "sigma")
  scale = max(float(np.max(np.abs(sigma))), 1.0)
  if not np.allclose(sigma, sigma.T, rtol=0.0, atol=PSD_TOLERANCE * scale):
    raise DecompositionError("covariance is not symmetric")
  if not np.any(sigma):
    return np.zeros_like(sigma)

  eig_low = float(np.linalg.eigvalsh(sigma)[0])
  if eig_low < -PSD_TOLERANCE * scale:
    raise DecompositionError(f"covariance is not positive semi-definite (eigenvalue {eig_low:.3e})")

  c, piv, rank, info = lapack.dpstrf(sigma, tol=-1.0, lower=1)
  if info < 0:
    raise DecompositionError(f"pivoted Cholesky rejected argument {-info}")

  lower = np.tril(c)
  lower[:, rank:] = 0.0
  factor = np.empty_like(lower)
  factor[piv - 1, :] = lower

  residual = np.max(np.abs(factor @ factor.T - sigma))
  if residual > 1e-8 * scale:
    raise DecompositionError(f"covariance factorization residual {residual:.3e}")
  return factor


def sample_gaussian_vector(
  sigma: np.ndarray,
  rng: RngStream,
  size: Optional[Union[int, Tuple[int, ...]]] = None,
  factor: Optional[np.ndarray] = None,
) -> np.ndarray:
  """Draw from N(0, sigma).

  Args:
    sigma: Symmetric PSD covariance (d x d)
    rng: Stream to draw the standard normals from
    size: Leading batch shape; None returns a single vector of length d
    factor: Precomputed ``psd_factor(sigma)`` to skip the decomposition
  """
  if factor is None:
    factor = psd_factor(sigma)
  d = factor.shape[0]
  if size is None:
    shape: Tuple[int, ...] = (d,)
  elif isinstance(size, int):
    shape = (size, d)
  else:
    shape = tuple(size) + (d,)
  return rng.normal(shape) @ factor.T
