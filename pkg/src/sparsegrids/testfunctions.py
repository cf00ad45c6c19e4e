"""Built-in test functions selectable by name on the command line."""

from __future__ import annotations

import numpy as np

__all__ = ["TEST_FUNCTIONS", "get_test_function"]


def expsum(y):
    return np.exp(np.sum(y))


def linear(y):
    y = np.asarray(y, dtype=float)
    return 1.0 + np.sum((np.arange(y.size) + 1.0) * y)


def runge(y):
    y = np.asarray(y, dtype=float)
    return 1.0 / (1.0 + 25.0 * np.sum(y**2))


TEST_FUNCTIONS = {"expsum": expsum, "linear": linear, "runge": runge}


def get_test_function(name: str):
    try:
        return TEST_FUNCTIONS[name]
    except KeyError:
        raise ValueError(
            f"unknown test function {name!r}; choose from {sorted(TEST_FUNCTIONS)}"
        ) from None
