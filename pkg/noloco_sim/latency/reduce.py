"""Tree all-reduce versus pairwise averaging: closed forms and Monte-Carlo."""

import math

import numpy as np

from ..errors import InvalidParameterError
from ..numerics.rng import RngStream
from ..numerics.special import erf
from .models import LatencyModel, ReduceRatio


def _levels(n: int) -> int:
  if n < 2:
    raise InvalidParameterError(f"world size must be at least 2, got {n}")
  levels = int(round(math.log2(n)))
  if 2**levels != n:
    raise InvalidParameterError(f"tree reduce needs a power-of-two world size, got {n}")
  return levels


def tree_allreduce_time(n: int, t_c: float) -> float:
  """Reduce up then broadcast down a binary tree: 2 t_c log2(n)."""
  if n < 2:
    raise InvalidParameterError(f"world size must be at least 2, got {n}")
  return 2.0 * t_c * math.log2(n)


def expected_pair_max(mu: float, sigma2: float) -> float:
  """E max(X1, X2) for iid log-normal X: (1 + erf(sigma / 2)) exp(mu + sigma2 / 2)."""
  if sigma2 < 0:
    raise InvalidParameterError(f"sigma2 must be non-negative, got {sigma2}")
  return (1.0 + erf(0.5 * math.sqrt(sigma2))) * math.exp(mu + 0.5 * sigma2)


def sample_tree_times(n: int, model: LatencyModel, trials: int, rng: RngStream) -> np.ndarray:
  """Completion times of ``trials`` tree all-reduces over ``n`` workers.

  Every edge carries an iid sample per phase. A parent forwards once its
  slower child has arrived; the broadcast finishes when the last leaf has
  the result.
  """
  levels = _levels(n)
  up = rng.spawn(0)
  down = rng.spawn(1)

  arrival = np.zeros((trials, n))
  for _ in range(levels):
    edges = model.sample(up, arrival.shape)
    arrival = (arrival + edges).reshape(trials, -1, 2).max(axis=-1)

  reach = np.zeros((trials, 1))
  for _ in range(levels):
    reach = np.repeat(reach, 2, axis=1)
    reach = reach + model.sample(down, reach.shape)
  return arrival[:, 0] + reach.max(axis=1)


def sample_pair_times(model: LatencyModel, trials: int, rng: RngStream) -> np.ndarray:
  """Pairwise averaging: both partners send, each waits for the slower message; 2 max(e1, e2)."""
  edges = model.sample(rng, (trials, 2))
  return 2.0 * edges.max(axis=1)


def mc_reduce_ratio(n: int, model: LatencyModel, trials: int, rng: RngStream) -> ReduceRatio:
  """Mean tree all-reduce time divided by mean pairwise averaging time."""
  if trials < 1:
    raise InvalidParameterError(f"trials must be at least 1, got {trials}")
  tree = sample_tree_times(n, model, trials, rng.spawn(0))
  pair = sample_pair_times(model, trials, rng.spawn(1))
  tree_mean = float(tree.mean())
  pair_mean = float(pair.mean())
  ratio = tree_mean / pair_mean

  stderr = 0.0
  if trials > 1:
    rel_tree = tree.std(ddof=1) / tree_mean
    rel_pair = pair.std(ddof=1) / pair_mean
    stderr = float(ratio * math.sqrt((rel_tree**2 + rel_pair**2) / trials))
  return ReduceRatio(
    world_size=n,
    model=model,
    ratio=ratio,
    stderr=stderr,
    tree_mean=tree_mean,
    pair_mean=pair_mean,
  )
