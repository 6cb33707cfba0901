"""Console styling and logging setup."""

import logging

from rich.console import Console
from rich.logging import RichHandler
from rich.theme import Theme

COLORS = {
  "primary": "#00D4FF",
  "secondary": "#9945FF",
  "muted": "#666688",
  "success": "#00FF88",
  "error": "#FF4444",
  "warning": "#FFB800",
}

# Series colors used when printing per-method tables
METHOD_STYLES = {
  "noloco": "primary",
  "diloco": "secondary",
  "sync-dp": "muted",
  "none": "muted",
}

RICH_THEME = Theme({
  "primary": f"bold {COLORS['primary']}",
  "secondary": f"{COLORS['secondary']}",
  "success": f"bold {COLORS['success']}",
  "error": f"bold {COLORS['error']}",
  "warning": f"bold {COLORS['warning']}",
  "muted": f"{COLORS['muted']}",
  "info": f"{COLORS['primary']}",
})

PACKAGE_LOGGER = "noloco_sim"


def make_console(stderr: bool = False, quiet: bool = False) -> Console:
  """Create a themed console."""
  return Console(theme=RICH_THEME, stderr=stderr, quiet=quiet)


def setup_logging(verbose: bool = False, quiet: bool = False) -> logging.Logger:
  """Attach a RichHandler to the package logger.

  Safe to call repeatedly; the handler is replaced, not duplicated.
  """
  logger = logging.getLogger(PACKAGE_LOGGER)
  for handler in list(logger.handlers):
    if isinstance(handler, RichHandler):
      logger.removeHandler(handler)

  if quiet:
    level = logging.WARNING
  elif verbose:
    level = logging.DEBUG
  else:
    level = logging.INFO

  handler = RichHandler(
    console=make_console(stderr=True),
    show_path=False,
    rich_tracebacks=True,
  )
  handler.setFormatter(logging.Formatter("%(message)s"))
  logger.addHandler(handler)
  logger.setLevel(level)
  logger.propagate = False
  return logger
