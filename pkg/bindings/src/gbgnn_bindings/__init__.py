"""Plug-and-play array boundary for using the granular-ball engine from
external GNN training stacks."""

__version__ = "0.1.0"

from .core import BoundaryError, py_augment, py_gbc_build, py_lcc

__all__ = [
    "__version__",
    "BoundaryError",
    "py_gbc_build",
    "py_augment",
    "py_lcc",
]
