"""Numerical accretivity checks for second-order operators with complex coefficients.

Submodules are imported on first use so that ``accretiv.cli`` can cap the
BLAS thread pools before numpy loads.
"""

import importlib

__version__ = "0.1.0"

__all__ = ["accretivity", "calculus", "catalog", "cli", "coefficients", "config", "expr",
           "fieldio", "forms", "grid", "hodge", "linalg", "one_dim", "schrodinger", "trace"]


def __getattr__(name):
    if name in __all__:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module 'accretiv' has no attribute {name!r}")
