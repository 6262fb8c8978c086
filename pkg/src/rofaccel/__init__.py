"""Symbol-decision accelerator modeling for mm-wave radio-over-fiber links:
bit-exact CNN/BCNN inference under three hardware schedules, an FPGA
cost/latency model, a synthetic channel and a trainer."""

__version__ = "0.1.0"

from .errors import ConfigError, DomainError, FileFormatError, RofAccelError, ShapeError

__all__ = [
    "ConfigError",
    "DomainError",
    "FileFormatError",
    "RofAccelError",
    "ShapeError",
    "__version__",
]
