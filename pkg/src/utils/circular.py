"""
Circular statistics on phases in radians.

Every phase in the package lives on [-pi, pi); wrap_phase is the single
place that enforces it.
"""

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_phase(x):
    """
    Wrap angles to [-pi, pi).

    Works on scalars and arrays; scalars come back as float.
    """
    arr = np.asarray(x, dtype=float)
    wrapped = np.mod(arr + np.pi, TWO_PI) - np.pi
    # fmod rounding can land exactly on +pi
    wrapped = np.where(wrapped >= np.pi, wrapped - TWO_PI, wrapped)
    wrapped = np.where(wrapped < -np.pi, -np.pi, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def wrap_diff(a, b):
    """Signed circular difference a - b in [-pi, pi)"""
    return wrap_phase(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))


def resultant(phases, weights=None, axis=None) -> complex:
    """Weighted mean of e^{j phase}"""
    z = np.exp(1j * np.asarray(phases, dtype=float))
    if weights is None:
        return np.mean(z, axis=axis)
    weights = np.asarray(weights, dtype=float)
    return np.sum(weights * z, axis=axis) / np.sum(weights, axis=axis)


def circular_mean(phases, weights=None, axis=None):
    """Direction of the mean resultant vector, wrapped"""
    return wrap_phase(np.angle(resultant(phases, weights, axis=axis)))
