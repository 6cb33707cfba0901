"""Tests for random streams, special functions and linear algebra."""

import numpy as np
import pytest

from noloco_sim.errors import DecompositionError, InvalidParameterError, ShapeError
from noloco_sim.numerics import (
  RngStream,
  Stream,
  erf,
  kron,
  make_spd_matrix,
  psd_factor,
  sample_gaussian_vector,
  sample_lognormal,
)


def test_stream_reproducible():
  """Test that equal (seed, key) give equal samples regardless of order."""
  a = RngStream(3).spawn(Stream.DATA, 1)
  _ = RngStream(3).spawn(Stream.DATA, 0).normal(10)
  b = RngStream(3).spawn(Stream.DATA, 1)
  np.testing.assert_array_equal(a.normal(5), b.normal(5))


def test_sibling_streams_differ():
  """Test that child streams are independent of their siblings."""
  root = RngStream(0)
  assert not np.array_equal(root.spawn(1).normal(4), root.spawn(2).normal(4))
  assert root.spawn(1, 2).stream_id == (1, 2)


def test_negative_seed():
  """Test seed validation."""
  with pytest.raises(InvalidParameterError):
    RngStream(-1)


def test_lognormal_scalar_and_array():
  """Test lognormal sampling shapes and the sigma2 = 0 case."""
  rng = RngStream(0)
  assert isinstance(sample_lognormal(0.0, 1.0, rng), float)
  assert sample_lognormal(1.0, 0.5, rng, (3, 2)).shape == (3, 2)
  assert sample_lognormal(1.0, 0.0, rng) == pytest.approx(np.e)
  with pytest.raises(InvalidParameterError):
    sample_lognormal(0.0, -1.0, rng)


def test_erf_values():
  """Test erf at known points."""
  assert erf(0.0) == 0.0
  assert erf(0.5) == pytest.approx(0.5204998778, abs=1e-10)
  assert erf(10.0) == pytest.approx(1.0)
  with pytest.raises(InvalidParameterError):
    erf(float("nan"))


def test_spd_matrix_spectrum():
  """Test that generated matrices are symmetric with eigenvalues in range."""
  a = make_spd_matrix(6, 0.1, 1.0, RngStream(1))
  np.testing.assert_allclose(a, a.T, atol=1e-15)
  eigs = np.linalg.eigvalsh(a)
  assert eigs.min() >= 0.1 - 1e-12
  assert eigs.max() <= 1.0 + 1e-12


def test_spd_matrix_invalid():
  """Test argument validation for SPD construction."""
  with pytest.raises(InvalidParameterError):
    make_spd_matrix(3, 0.0, 1.0, RngStream(0))
  with pytest.raises(InvalidParameterError):
    make_spd_matrix(3, 1.0, 0.5, RngStream(0))


def test_kron_index_identity():
  """Test the Kronecker index convention."""
  a = np.arange(4.0).reshape(2, 2)
  b = np.arange(9.0).reshape(3, 3) + 1
  k = kron(a, b)
  assert k.shape == (6, 6)
  assert k[1 * 3 + 2, 0 * 3 + 1] == a[1, 0] * b[2, 1]
  with pytest.raises(ShapeError):
    kron(np.zeros((0, 0)), b)


def test_kron_vec_identity():
  """Test vec(B X B^T) = (B kron B) vec(X) in column-major vec."""
  rng = np.random.default_rng(0)
  b = rng.standard_normal((3, 3))
  x = rng.standard_normal((3, 3))
  lhs = (b @ x @ b.T).reshape(-1, order="F")
  rhs = kron(b, b) @ x.reshape(-1, order="F")
  np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_psd_factor_full_rank():
  """Test the factor of a positive definite matrix."""
  sigma = make_spd_matrix(5, 0.5, 2.0, RngStream(2))
  factor = psd_factor(sigma)
  np.testing.assert_allclose(factor @ factor.T, sigma, atol=1e-12)


def test_psd_factor_rank_deficient():
  """Test a singular covariance."""
  v = np.array([1.0, 2.0, -1.0])
  sigma = np.outer(v, v)
  factor = psd_factor(sigma)
  np.testing.assert_allclose(factor @ factor.T, sigma, atol=1e-12)


def test_psd_factor_zero_matrix():
  """Test that a zero covariance yields a zero factor."""
  np.testing.assert_array_equal(psd_factor(np.zeros((3, 3))), np.zeros((3, 3)))


def test_psd_factor_rejects_indefinite():
  """Test rejection of non-PSD and non-symmetric input."""
  with pytest.raises(DecompositionError):
    psd_factor(np.diag([1.0, -1.0]))
  with pytest.raises(DecompositionError):
    psd_factor(np.array([[1.0, 0.5], [0.0, 1.0]]))
  with pytest.raises(ShapeError):
    psd_factor(np.zeros((2, 3)))


def test_gaussian_vector_covariance():
  """Test that samples have the requested covariance."""
  sigma = np.array([[2.0, 0.6], [0.6, 1.0]])
  samples = sample_gaussian_vector(sigma, RngStream(4), size=200_000)
  assert samples.shape == (200_000, 2)
  np.testing.assert_allclose(np.cov(samples, rowvar=False), sigma, atol=0.03)
  assert sample_gaussian_vector(sigma, RngStream(4)).shape == (2,)
