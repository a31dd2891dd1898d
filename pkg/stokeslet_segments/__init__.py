"""Regularized Stokeslet segments: exact line integrals, force solves and swimming filaments."""

from importlib.metadata import version, PackageNotFoundError

try:
    __version__ = version("stokeslet-segments")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

__all__ = ["__version__"]
