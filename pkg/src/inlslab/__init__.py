"""Numerical lab for the focusing inhomogeneous NLS with a potential in three dimensions."""
from importlib.metadata import PackageNotFoundError, version as _dist_version

try:
    __version__ = _dist_version("artifact")
except PackageNotFoundError:
    __version__ = "0.1.0"
