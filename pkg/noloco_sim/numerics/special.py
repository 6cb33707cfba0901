"""Special functions."""

import math

from scipy import special

from ..errors import InvalidParameterError


def erf(x: float) -> float:
  """Error function, accurate to double precision."""
  if not math.isfinite(x):
    raise InvalidParameterError(f"erf argument must be finite, got {x}")
  return float(special.erf(x))
