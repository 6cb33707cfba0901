"""Exception hierarchy and CLI exit-code mapping."""

from typing import Optional


class NolocoError(Exception):
  """Base class for every error raised by the simulator."""


class InvalidParameterError(NolocoError, ValueError):
  """A scalar parameter is outside its admissible range."""


class ShapeError(NolocoError, ValueError):
  """Array dimensions do not line up."""


class DecompositionError(NolocoError):
  """A matrix factorization failed (for example a non-PSD covariance)."""


class StateError(NolocoError):
  """An object was used out of order (missing or stale cache)."""


class RoutingError(NolocoError):
  """A route was requested past the end (or before the start) of the pipeline."""


class ConfigError(NolocoError):
  """Invalid experiment configuration.

  Attributes:
    field: Dotted path of the offending field, e.g. ``outer.group_size``
  """

  def __init__(self, message: str, field: Optional[str] = None):
    self.field = field
    super().__init__(f"{field}: {message}" if field else message)


class NumericalError(NolocoError):
  """A non-finite value appeared during training."""

  def __init__(
    self,
    message: str,
    worker_id: Optional[int] = None,
    step: Optional[int] = None,
    last_good_step: Optional[int] = None,
  ):
    self.worker_id = worker_id
    self.step = step
    self.last_good_step = last_good_step
    details = []
    if worker_id is not None:
      details.append(f"worker {worker_id}")
    if step is not None:
      details.append(f"step {step}")
    if last_good_step is not None:
      details.append(f"last good step {last_good_step}")
    suffix = f" ({', '.join(details)})" if details else ""
    super().__init__(f"{message}{suffix}")


class UndefinedPointError(NolocoError):
  """A sequence operation hit an undefined value at ``index``."""

  def __init__(self, message: str, index: int):
    self.index = index
    super().__init__(f"{message} at index {index}")


class UndefinedCorrelationError(NolocoError):
  """Correlation requested for a constant series."""


EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def exit_code_for(exc: BaseException) -> int:
  """Map an exception to the process exit code."""
  if isinstance(exc, ConfigError):
    return EXIT_CONFIG
  return EXIT_RUNTIME
