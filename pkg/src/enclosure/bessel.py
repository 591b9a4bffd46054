"""Exponent-scaled modified spherical Bessel functions.

    ihat_n(z) = exp(-z) i_n(z),      khat_n(z) = exp(+z) k_n(z),

with k_0(z) = (pi/2) exp(-z)/z (the normalisation of scipy's spherical_kn).
i_n is built from ratios i_n/i_{n-1} obtained by a backward continued
fraction, k_n by the (stable) upward recurrence.  Derivatives follow from

    i_n' = i_{n-1} - (n+1)/z i_n,    k_n' = -k_{n-1} - (n+1)/z k_n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScaledBessel:
    """Arrays of shape (n_max + 1,) + z.shape."""

    z: np.ndarray
    i: np.ndarray
    k: np.ndarray
    di: np.ndarray
    dk: np.ndarray

    @property
    def n_max(self) -> int:
        return self.i.shape[0] - 1


def _check_z(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise ValueError("argument must be positive")
    return z


def i_ratios(n_max: int, z) -> np.ndarray:
    """r_n = i_n(z) / i_{n-1}(z) for n = 1..n_max (row n-1)."""
    z = _check_z(z)
    start = n_max + 30 + int(np.max(z) + 8.0 * np.sqrt(np.max(z)))
    r = np.zeros_like(z)
    out = np.empty((n_max,) + z.shape)
    for n in range(start, 0, -1):
        r = 1.0 / ((2 * n + 1) / z + r)
        if n <= n_max:
            out[n - 1] = r
    return out


def scaled_i(n_max: int, z) -> np.ndarray:
    z = _check_z(z)
    out = np.empty((n_max + 1,) + z.shape)
    out[0] = -np.expm1(-2.0 * z) / (2.0 * z)
    if n_max:
        ratios = i_ratios(n_max, z)
        for n in range(1, n_max + 1):
            out[n] = out[n - 1] * ratios[n - 1]
    return out


def scaled_k(n_max: int, z) -> np.ndarray:
    z = _check_z(z)
    out = np.empty((n_max + 2,) + z.shape)
    out[0] = 0.5 * np.pi / z
    out[1] = 0.5 * np.pi * (1.0 / z + 1.0 / (z * z))
    with np.errstate(over="ignore"):
        for n in range(1, n_max + 1):
            out[n + 1] = out[n - 1] + (2 * n + 1) / z * out[n]
    if not np.all(np.isfinite(out[: n_max + 1])):
        raise OverflowError(f"order {n_max} exceeds the recurrence budget for z = {np.min(z):.3g}")
    return out[: n_max + 1]


def scaled_bessel(n_max: int, z) -> ScaledBessel:
    """Scaled i_n, k_n and their scaled derivatives for n = 0..n_max."""
    z = _check_z(z)
    i = scaled_i(n_max + 1, z)
    k = scaled_k(n_max + 1, z)
    n = np.arange(n_max + 1).reshape((-1,) + (1,) * z.ndim)
    di = np.empty((n_max + 1,) + z.shape)
    dk = np.empty((n_max + 1,) + z.shape)
    di[0] = i[1]
    dk[0] = -k[1]
    di[1:] = i[:n_max] - (n[1:] + 1) / z * i[1 : n_max + 1]
    dk[1:] = -k[:n_max] - (n[1:] + 1) / z * k[1 : n_max + 1]
    return ScaledBessel(z, i[: n_max + 1], k[: n_max + 1], di, dk)


def log_derivative_i(n_max: int, z) -> np.ndarray:
    """i_n'(z)/i_n(z), free of underflow even where i_n itself is tiny."""
    z = _check_z(z)
    out = np.empty((n_max + 1,) + z.shape)
    r = i_ratios(n_max + 1, z)
    out[0] = r[0]  # i_0' / i_0 = i_1 / i_0
    for n in range(1, n_max + 1):
        out[n] = 1.0 / r[n - 1] - (n + 1) / z
    return out


def log_derivative_k(n_max: int, z) -> np.ndarray:
    """k_n'(z)/k_n(z)."""
    k = scaled_k(n_max + 1, z)
    z = np.asarray(z, float)
    out = np.empty((n_max + 1,) + z.shape)
    out[0] = -k[1] / k[0]
    for n in range(1, n_max + 1):
        out[n] = -k[n - 1] / k[n] - (n + 1) / z
    return out


def wronskian_residual(n_max: int, z) -> np.ndarray:
    """Relative deviation of i k' - i' k from -pi/(2 z^2) (scaled arithmetic)."""
    b = scaled_bessel(n_max, z)
    w = b.i * b.dk - b.di * b.k
    ref = -0.5 * np.pi / np.asarray(z, float) ** 2
    return np.abs(w / ref - 1.0)
