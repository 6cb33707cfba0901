"""Reproducible random streams keyed by (seed, stream path)."""

from enum import IntEnum
from typing import Optional, Tuple, Union

import numpy as np

from ..errors import InvalidParameterError


class Stream(IntEnum):
  """Purpose tags for child streams.

  Values are part of the on-disk reproducibility contract: do not renumber.
  """
  PROBLEM = 1
  INIT = 2
  DATA = 3
  ROUTING = 4
  GROUPS = 5
  WORKER = 6
  VALIDATION = 7
  LATENCY = 8
  PAIRING = 9
  ENSEMBLE = 10


class RngStream:
  """A PCG64 generator derived from ``SeedSequence(seed, spawn_key=key)``.

  Two streams built from the same seed and key produce identical samples
  regardless of creation order. Child streams extend the key, so a worker's
  stream never overlaps with its siblings.
  """

  def __init__(self, seed: int, key: Tuple[int, ...] = ()):
    if seed < 0:
      raise InvalidParameterError(f"seed must be non-negative, got {seed}")
    self.seed = int(seed)
    self.key = tuple(int(k) for k in key)
    sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
    self.generator = np.random.Generator(np.random.PCG64(sequence))

  @property
  def stream_id(self) -> Tuple[int, ...]:
    return self.key

  def spawn(self, *key: Union[int, Stream]) -> "RngStream":
    """Derive an independent child stream."""
    return RngStream(self.seed, self.key + tuple(int(k) for k in key))

  def normal(self, size=None) -> np.ndarray:
    return self.generator.standard_normal(size)

  def uniform(self, low: float = 0.0, high: float = 1.0, size=None) -> np.ndarray:
    return self.generator.uniform(low, high, size)

  def permutation(self, n: int) -> np.ndarray:
    return self.generator.permutation(n)

  def __repr__(self) -> str:
    return f"RngStream(seed={self.seed}, key={self.key})"


def sample_lognormal(
  mu: float,
  sigma2: float,
  rng: RngStream,
  size: Optional[Union[int, Tuple[int, ...]]] = None,
) -> Union[float, np.ndarray]:
  """Draw exp(g) with g ~ N(mu, sigma2).

  Returns a float when ``size`` is None, otherwise an array.
  """
  if sigma2 < 0:
    raise InvalidParameterError(f"sigma2 must be non-negative, got {sigma2}")
  g = mu + np.sqrt(sigma2) * rng.normal(size)
  if size is None:
    return float(np.exp(g))
  return np.exp(g)
