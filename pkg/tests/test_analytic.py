"""Tests for the closed-form moment recursions."""

import math

import numpy as np
import pytest

from noloco_sim.analytic import (
  AnalyticConfig,
  Forcing,
  eigen_D,
  expected_phi_sequence,
  forcing_matrix,
  matrix_B,
  matrix_D,
  predict,
  root_moduli,
  variance_asymptote,
  variance_coefficients,
  variance_operator,
  variance_sequence,
)
from noloco_sim.errors import InvalidParameterError
from noloco_sim.models import QuadraticProblem
from noloco_sim.numerics import RngStream


def _scalar(noise: float = 1.0) -> QuadraticProblem:
  return QuadraticProblem(a=np.eye(1), sigma=noise * np.eye(1))


def test_matrix_B():
  """Test B = I - omega A and its spectrum."""
  np.testing.assert_allclose(matrix_B(QuadraticProblem.isotropic(3), 0.1), 0.9 * np.eye(3))
  problem = QuadraticProblem.random(5, 0.1, 1.0, RngStream(0))
  np.testing.assert_allclose(
    np.linalg.eigvalsh(matrix_B(problem, 0.3)),
    np.sort(1.0 - 0.3 * problem.eigenvalues),
    atol=1e-12,
  )


def test_eigen_D_values():
  """Test the eigenvalue of D at documented points."""
  assert eigen_D(0.5, 0.7, 0.1, 10, 1.0) == pytest.approx(1.5 - 0.7 * (1 - 0.9**10))
  assert eigen_D(0.5, 0.7, 0.1, 10, 1.0) == pytest.approx(1.04408, abs=1e-5)
  assert eigen_D(0.5, 0.7, 0.0, 10, 1.0) == 1.5
  assert eigen_D(0.5, 0.7, 0.5, 2000, 1.0) == pytest.approx(0.8)
  with pytest.raises(InvalidParameterError):
    eigen_D(0.5, 0.7, 0.1, 10, 0.0)


def test_eigen_D_matches_matrix():
  """Test eigen_D against the spectrum of the assembled D."""
  problem = QuadraticProblem.random(6, 0.1, 1.0, RngStream(3))
  d = matrix_D(problem, 0.2, 7, 0.4, 0.6)
  expected = sorted(eigen_D(0.4, 0.6, 0.2, 7, lam) for lam in problem.eigenvalues)
  np.testing.assert_allclose(np.linalg.eigvalsh(d), expected, atol=1e-10)


def test_root_moduli():
  """Test the real and complex regimes."""
  assert root_moduli(0.0, 0.8) == pytest.approx((0.8, 0.0))
  r1, r2 = root_moduli(0.5, 1.04408)
  assert r1 == r2 == pytest.approx(math.sqrt(0.5))
  r1, r2 = root_moduli(0.25, 1.2)
  assert r1 == pytest.approx((1.2 + math.sqrt(0.44)) / 2)
  assert r2 == pytest.approx((1.2 - math.sqrt(0.44)) / 2)
  with pytest.raises(InvalidParameterError):
    root_moduli(1.0, 1.0)


def test_expected_phi_zero_start():
  """Test that the optimum is a fixed point."""
  cfg = AnalyticConfig(QuadraticProblem.isotropic(3), omega=0.1, m=5, horizon=20)
  np.testing.assert_array_equal(expected_phi_sequence(cfg, np.zeros(3)), np.zeros((21, 3)))


def test_expected_phi_alpha_zero_is_geometric():
  """Test the single-term recursion at alpha = 0."""
  problem = QuadraticProblem.random(3, 0.2, 1.0, RngStream(1))
  cfg = AnalyticConfig(problem, omega=0.1, m=4, alpha=0.0, beta=0.7, gamma=0.5, horizon=10)
  phi0 = np.array([1.0, -1.0, 0.5])
  b_m = np.linalg.matrix_power(matrix_B(problem, 0.1), 4)
  step = np.eye(3) + 0.7 * (b_m - np.eye(3))
  seq = expected_phi_sequence(cfg, phi0)
  for t in range(11):
    np.testing.assert_allclose(seq[t], np.linalg.matrix_power(step, t) @ phi0, atol=1e-12)


def test_expected_phi_decays_iff_roots_inside():
  """Test the link between root moduli and decay over a parameter grid."""
  problem = QuadraticProblem.random(2, 0.3, 1.0, RngStream(2))
  for alpha, beta, omega, m in [
    (0.5, 0.7, 0.1, 10),
    (0.3, 0.7, 0.05, 50),
    (0.9, 0.2, 0.1, 3),
    (0.5, 1.9, 0.9, 40),
    (0.0, 2.5, 0.5, 30),
  ]:
    cfg = AnalyticConfig(problem, omega=omega, m=m, alpha=alpha, beta=beta, horizon=400)
    moduli = [root_moduli(alpha, eigen_D(alpha, beta, omega, m, lam)) for lam in problem.eigenvalues]
    inside = all(r < 1 for pair in moduli for r in pair)
    final = np.linalg.norm(expected_phi_sequence(cfg, np.ones(2))[-1])
    assert (final < 1e-3) == inside, (alpha, beta, omega, m)


def test_scalar_worked_numbers():
  """Test the scalar variance terms against hand evaluation."""
  problem = _scalar()
  v_op = variance_operator(problem, 0.05, 10)
  assert v_op[0, 0] == pytest.approx(0.0025 * (1 - 0.95**20) / (1 - 0.95**2), rel=1e-12)
  assert v_op[0, 0] == pytest.approx(0.016449, abs=1e-6)

  summed = forcing_matrix(problem, 0.05, 10, Forcing.SUMMED)[0, 0]
  exact = forcing_matrix(problem, 0.05, 10, Forcing.EXACT)[0, 0]
  assert summed == pytest.approx(0.025219, abs=1e-5)
  assert exact == pytest.approx(0.0025 * (1 - 0.95**20) / (1 - 0.95**2), rel=1e-12)
  assert summed > exact

  d_v, e_v = variance_coefficients(problem, 0.05, 10, 0.5, 0.7, 1.0, 2)
  assert d_v == pytest.approx(0.25)
  assert e_v[0, 0] == pytest.approx(0.49 / 2 * 0.016449 + 0.5, abs=1e-5)


def test_summed_minus_exact_is_psd():
  """Test the ordering of the two forcing terms."""
  problem = QuadraticProblem.random(3, 0.2, 1.0, RngStream(4))
  gap = forcing_matrix(problem, 0.1, 8, Forcing.SUMMED) - forcing_matrix(problem, 0.1, 8, Forcing.EXACT)
  assert np.linalg.eigvalsh(0.5 * (gap + gap.T)).min() >= -1e-12


def test_variance_sequence_non_negative_and_converges():
  """Test the variance trace inside the stability interval."""
  cfg = AnalyticConfig(_scalar(), omega=0.05, m=10, alpha=0.5, beta=0.7, gamma=1.0, horizon=200)
  seq = variance_sequence(cfg)
  assert len(seq) == 201
  assert seq[0] == 0.0
  assert np.all(seq >= 0)
  assert seq[-1] == pytest.approx(variance_asymptote(cfg), rel=1e-6)
  assert variance_asymptote(cfg) == pytest.approx(0.02512, rel=2e-3)

  exact = AnalyticConfig(_scalar(), omega=0.05, m=10, gamma=1.0, forcing="exact")
  assert variance_asymptote(exact) == pytest.approx(0.01638, rel=2e-3)


def test_variance_scales_with_omega_squared():
  """Test that halving omega quarters the asymptote."""
  problem = QuadraticProblem.random(2, 0.5, 1.0, RngStream(5))
  big = variance_asymptote(AnalyticConfig(problem, omega=0.05, m=10))
  small = variance_asymptote(AnalyticConfig(problem, omega=0.025, m=10))
  assert big / small == pytest.approx(4.0, rel=0.05)


def test_variance_vanishes_without_noise():
  """Test the noiseless limit."""
  cfg = AnalyticConfig(_scalar(noise=0.0), omega=0.05, m=10, horizon=50)
  np.testing.assert_array_equal(variance_sequence(cfg), np.zeros(51))


def test_predict_flags():
  """Test the convergence flag in stable and unstable configurations."""
  stable = predict(AnalyticConfig(QuadraticProblem.isotropic(2), omega=0.1, m=50, alpha=0.5, beta=0.7))
  assert stable.converges
  assert stable.asymptote is not None
  assert stable.gamma_interval == (0.5, 1.5)
  assert len(stable.expected_phi) == len(stable.variance_trace) == 201

  no_pull = predict(AnalyticConfig(QuadraticProblem.isotropic(2), omega=0.1, m=50, gamma=0.0))
  assert no_pull.d_v == pytest.approx(1.25)
  assert not no_pull.converges
  assert no_pull.asymptote is None

  data = stable.to_dict()
  assert data["converges"] is True
  assert data["forcing"] == "summed"
  assert len(data["eigen_d"]) == 2


def test_predict_zero_start():
  """Test a zero start: mean stays zero, variance approaches its asymptote."""
  cfg = AnalyticConfig(_scalar(), omega=0.05, m=10, gamma=1.0, horizon=300)
  prediction = predict(cfg, np.zeros(1))
  assert np.all(prediction.expected_phi == 0)
  assert prediction.variance_trace[-1] == pytest.approx(prediction.asymptote, rel=1e-6)


def test_config_validation():
  """Test AnalyticConfig argument checks."""
  with pytest.raises(InvalidParameterError):
    AnalyticConfig(_scalar(), omega=0.0, m=10)
  with pytest.raises(InvalidParameterError):
    AnalyticConfig(_scalar(), omega=0.1, m=10, n=1)
  with pytest.raises(InvalidParameterError):
    AnalyticConfig(QuadraticProblem.isotropic(17), omega=0.1, m=10)
  assert AnalyticConfig(_scalar(), omega=0.1, m=10).gamma == pytest.approx(1.0)
