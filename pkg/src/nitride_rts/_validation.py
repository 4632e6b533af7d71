"""Argument checks shared by the estimator and the command line."""

from __future__ import annotations

import numbers

import numpy as np

from .structure import Layer, LayerStack


def check_positive(value, name: str, strict: bool = True) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not np.isfinite(value) or (value <= 0 if strict else value < 0):
        bound = "positive" if strict else "non-negative"
        raise ValueError(f"{name} must be {bound}, got {value}")
    return value


def check_in_range(value, name: str, lo: float, hi: float, closed_lo: bool = True) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    ok_lo = value >= lo if closed_lo else value > lo
    if not (ok_lo and value <= hi):
        left = "[" if closed_lo else "("
        raise ValueError(f"{name} must lie in {left}{lo}, {hi}], got {value}")
    return value


def check_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be at least {minimum}, got {value}")
    return int(value)


def check_choice(value, name: str, choices) -> str:
    if value not in choices:
        raise ValueError(f"{name} must be one of {', '.join(map(str, choices))}, got {value!r}")
    return value


def check_layers(X) -> np.ndarray:
    """Validate an (n_layers, 2) array of [Al fraction, thickness nm]."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected an array of shape (n_layers, 2), got {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError("at least one layer is required")
    if not np.all(np.isfinite(arr)):
        raise ValueError("layer table contains non-finite values")
    if np.any((arr[:, 0] < 0) | (arr[:, 0] > 1)):
        raise ValueError("Al fractions must lie in [0, 1]")
    if np.any(arr[:, 1] <= 0):
        raise ValueError("thicknesses must be positive")
    return arr


def as_stack(X, table=None, cladding_x: float = 1.0) -> LayerStack:
    """Accept a LayerStack, a sequence of Layer objects or an (n_layers, 2) array."""
    if isinstance(X, LayerStack):
        return X
    if isinstance(X, (list, tuple)) and X and all(isinstance(v, Layer) for v in X):
        return LayerStack.build(X, table, cladding_x)
    arr = check_layers(X)
    return LayerStack.build([(float(x), float(d)) for x, d in arr], table, cladding_x)


def check_points(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim == 2 and z.shape[1] == 1:
        z = z[:, 0]
    if z.ndim != 1:
        raise ValueError(f"expected a 1-D array of positions, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("positions must be finite")
    return z
