"""Linear algebra, special functions and seeded random streams."""

from .linalg import kron, make_spd_matrix, psd_factor, sample_gaussian_vector
from .rng import RngStream, Stream, sample_lognormal
from .special import erf

__all__ = [
  "RngStream",
  "Stream",
  "erf",
  "kron",
  "make_spd_matrix",
  "psd_factor",
  "sample_gaussian_vector",
  "sample_lognormal",
]
