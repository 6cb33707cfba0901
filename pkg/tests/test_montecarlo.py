"""Monte-Carlo checks of the analytic recursions on the quadratic workload."""

from dataclasses import replace

import numpy as np
import pytest

from noloco_sim.analytic import (
  AnalyticConfig,
  EnsembleConfig,
  Forcing,
  expected_phi_sequence,
  forcing_matrix,
  group_mean_deviation,
  outer_gradient_covariance,
  replica_dispersion,
  simulate_ensemble,
  slow_weight_variance,
  variance_asymptote,
)
from noloco_sim.errors import InvalidParameterError
from noloco_sim.models import QuadraticProblem
from noloco_sim.numerics import RngStream


def _scalar() -> QuadraticProblem:
  return QuadraticProblem.isotropic(1)


def test_trace_layout():
  """Test recorded steps, shapes and the group log."""
  cfg = EnsembleConfig(_scalar(), omega=0.05, m=3, alpha=0.5, beta=0.7, gamma=1.0,
                       replicas=4, runs=6, outer_steps=5)
  trace = simulate_ensemble(cfg, record=[0, 2, 5])
  assert trace.steps.tolist() == [0, 2, 5]
  assert trace.phi.shape == (3, 6, 4, 1)
  assert trace.groups.shape == (3, 6, 2, 2)
  np.testing.assert_array_equal(trace.at(0), np.zeros((6, 4, 1)))
  with pytest.raises(KeyError):
    trace.at(1)


def test_ensemble_reproducible():
  """Test that the seed fixes the whole ensemble."""
  cfg = EnsembleConfig(_scalar(), omega=0.05, m=3, alpha=0.5, beta=0.7, gamma=1.0,
                       replicas=4, runs=8, outer_steps=4, seed=7)
  np.testing.assert_array_equal(simulate_ensemble(cfg).phi, simulate_ensemble(cfg).phi)


def test_ensemble_validation():
  """Test group-size and phi0 checks."""
  with pytest.raises(InvalidParameterError):
    EnsembleConfig(_scalar(), omega=0.05, m=3, alpha=0.5, beta=0.7, n=3, replicas=4)
  cfg = EnsembleConfig(_scalar(), omega=0.05, m=3, alpha=0.5, beta=0.7, runs=2, outer_steps=1)
  with pytest.raises(InvalidParameterError):
    simulate_ensemble(cfg, phi0=np.zeros(2))


@pytest.mark.slow
def test_expectation_matches_recursion():
  """Test the sample mean of phi against E(phi_t) and its decay toward the optimum."""
  problem = QuadraticProblem.random(8, 0.2, 1.0, RngStream(21))
  phi0 = 5.0 * np.ones(8)
  steps = 200
  cfg = EnsembleConfig(problem, omega=0.05, m=25, alpha=0.5, beta=0.7, gamma=1.0,
                       replicas=2, runs=512, outer_steps=steps, seed=1)
  trace = simulate_ensemble(cfg, phi0=phi0, record=[0, 10, 50, steps])
  expected = expected_phi_sequence(
    AnalyticConfig(problem, omega=0.05, m=25, alpha=0.5, beta=0.7, gamma=1.0, horizon=steps), phi0
  )

  np.testing.assert_array_equal(trace.at(0)[:, 0, :].mean(axis=0), phi0)
  for t in (10, 50, steps):
    first = trace.at(t)[:, 0, :]
    err = first.mean(axis=0) - expected[t]
    se = first.std(axis=0, ddof=1) / np.sqrt(cfg.runs)
    assert np.all(np.abs(err) <= 3.0 * se), t

  final = trace.at(steps)[:, 0, :].mean(axis=0)
  assert np.linalg.norm(final) < 0.05 * np.linalg.norm(phi0)


@pytest.mark.slow
def test_variance_asymptote_band():
  """Test the steady-state slow-weight variance against both forcing terms."""
  problem = QuadraticProblem.isotropic(2)
  cfg = EnsembleConfig(problem, omega=0.05, m=10, alpha=0.5, beta=0.7, gamma=1.0,
                       replicas=2, runs=512, outer_steps=120, seed=2)
  trace = simulate_ensemble(cfg, record=range(90, 121))
  simulated = float(slow_weight_variance(trace.phi).mean())

  analytic = AnalyticConfig(problem, omega=0.05, m=10, alpha=0.5, beta=0.7, gamma=1.0)
  exact = variance_asymptote(replace(analytic, forcing=Forcing.EXACT))
  summed = variance_asymptote(analytic)
  assert simulated == pytest.approx(exact, rel=0.25)
  assert simulated < summed


@pytest.mark.slow
def test_dispersion_scales_with_learning_rate():
  """Test that halving the inner rate cuts the replica dispersion by about four."""
  def dispersion(omega):
    cfg = EnsembleConfig(_scalar(), omega=omega, m=10, alpha=0.5, beta=0.7, gamma=1.0,
                         replicas=8, runs=256, outer_steps=200, seed=3)
    trace = simulate_ensemble(cfg, record=range(100, 201))
    return float(replica_dispersion(trace.phi).mean())

  ratio = dispersion(0.01) / dispersion(0.005)
  assert 3.0 <= ratio <= 5.0


def test_gamma_outside_interval_diverges():
  """Test bounded dispersion at the midpoint and growth past the upper bound."""
  def sampled(gamma, steps):
    cfg = EnsembleConfig(_scalar(), omega=0.05, m=10, alpha=0.5, beta=0.7, gamma=gamma,
                         replicas=8, runs=64, outer_steps=steps, seed=4)
    trace = simulate_ensemble(cfg, record=range(0, steps + 1, 10))
    return replica_dispersion(trace.phi)

  stable = sampled(1.0, 500)
  assert np.all(np.isfinite(stable))
  assert stable[-10:].max() < 3.0 * stable[5:15].mean()

  unstable = sampled(1.5 * 1.5, 100)
  assert np.all(np.diff(unstable) > 0)


def test_group_mean_deviation_is_centered():
  """Test that a replica sits on average at the mean of its next group."""
  cfg = EnsembleConfig(_scalar(), omega=0.05, m=10, alpha=0.5, beta=0.7, gamma=1.0,
                       replicas=4, runs=1000, outer_steps=50, seed=5)
  trace = simulate_ensemble(cfg, phi0=np.ones(1), record=range(1, 51))
  deviation = group_mean_deviation(trace)[..., 0]
  assert deviation.shape == (50, 1000)
  for step, row in zip(trace.steps, deviation):
    se = row.std(ddof=1) / np.sqrt(row.size)
    assert abs(row.mean()) <= 3.0 * se, step


def test_group_mean_deviation_members():
  """Test the deviation against a direct computation for one run."""
  cfg = EnsembleConfig(_scalar(), omega=0.05, m=2, alpha=0.5, beta=0.7, gamma=1.0,
                       replicas=4, runs=3, outer_steps=3, seed=6)
  trace = simulate_ensemble(cfg)
  deviation = group_mean_deviation(trace, replica=2)
  phi, groups = trace.phi[2], trace.groups[2]
  for run in range(3):
    members = next(g for g in groups[run] if 2 in g)
    assert deviation[2, run, 0] == pytest.approx(phi[run, 2, 0] - phi[run, members, 0].mean())


def test_outer_gradient_covariance():
  """Test the sampled outer-gradient covariance against the accumulated inner noise."""
  problem = QuadraticProblem.random(2, 0.3, 1.0, RngStream(8), noise_eigs=(0.5, 1.5))
  sampled = outer_gradient_covariance(problem, 0.1, 10, runs=20_000, seed=9)
  exact = forcing_matrix(problem, 0.1, 10, Forcing.EXACT)
  summed = forcing_matrix(problem, 0.1, 10, Forcing.SUMMED)
  assert np.trace(sampled) == pytest.approx(np.trace(exact), rel=0.2)
  np.testing.assert_allclose(sampled, exact, atol=0.2 * np.trace(exact))
  assert np.trace(summed) >= np.trace(sampled)


def test_diloco_ensemble_keeps_replicas_equal():
  """Test that the shared outer state never splits replicas."""
  cfg = EnsembleConfig(_scalar(), omega=0.05, m=5, alpha=0.5, beta=0.7, replicas=4,
                       runs=16, outer_steps=10, method="diloco", seed=10)
  trace = simulate_ensemble(cfg, phi0=np.ones(1))
  assert trace.groups is None
  np.testing.assert_array_equal(replica_dispersion(trace.phi), np.zeros(11))
  with pytest.raises(InvalidParameterError):
    group_mean_deviation(trace)
