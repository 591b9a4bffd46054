"""Gauss-Legendre rules on intervals, graded panel sets and periodic rules."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """n-point rule on [a, b]."""
    if n < 1:
        raise ValueError("need at least one node")
    x, w = _leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def panel_breaks(length: float, scale: float, growth: float = 2.0) -> np.ndarray:
    """Breakpoints 0 = t0 < t1 < ... = length with widths scale, growth*scale, ...

    Used for integrands that decay like exp(-t/scale) away from t = 0.
    """
    if length <= 0:
        raise ValueError("length must be positive")
    scale = min(scale, length)
    breaks = [0.0]
    width = scale
    while breaks[-1] + width < length * (1 - 1e-12):
        breaks.append(breaks[-1] + width)
        width *= growth
    if length - breaks[-1] < 0.25 * (breaks[-1] - breaks[-2] if len(breaks) > 1 else length):
        breaks[-1] = length
    else:
        breaks.append(length)
    return np.asarray(breaks)


def composite_gauss(breaks: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre on every panel of ``breaks``."""
    nodes, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        x, w = gauss_legendre(n, a, b)
        nodes.append(x)
        weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


def graded_rule(length: float, scale: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule on [0, length] refined geometrically toward t = 0."""
    return composite_gauss(panel_breaks(length, scale), n)


def periodic_rule(n: int, offset: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoid rule on [0, 2*pi); spectrally accurate for smooth periodic integrands."""
    phi = offset + 2.0 * np.pi * np.arange(n) / n
    return phi, np.full(n, 2.0 * np.pi / n)


def pairwise_sum(values: np.ndarray) -> float:
    """Fixed-tree pairwise reduction, independent of chunking."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        return 0.0
    while v.size > 1:
        if v.size % 2:
            v = np.append(v, 0.0)
        v = v[0::2] + v[1::2]
    return float(v[0])


def ball_rule_toward(center, radius: float, target, kappa: float, n: int = 16,
                     n_phi: int = 16, refine: int = 0):
    """Nodes and weights on a ball for integrands peaked at the point nearest ``target``.

    Spherical coordinates about the ball centre with the polar axis pointing
    at ``target`` (outside the ball).  Panels in r are graded toward the
    surface on the length scale 1/kappa, panels in theta toward the axis on
    the boundary-layer angle sqrt(dist / (kappa a d)).  ``refine`` halves every
    panel that many times.  Returns (points (N, 3), weights (N,)).
    """
    c = np.asarray(center, float)
    t = np.asarray(target, float)
    axis = t - c
    d = float(np.linalg.norm(axis))
    if d <= radius:
        raise ValueError("target must lie outside the ball")
    ez = axis / d
    helper = np.array([1.0, 0.0, 0.0]) if abs(ez[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    ex = helper - (helper @ ez) * ez
    ex /= np.linalg.norm(ex)
    ey = np.cross(ez, ex)

    r_scale = 1.0 / max(kappa, 1e-300)
    t_scale = np.sqrt((d - radius) / (max(kappa, 1e-300) * radius * d))
    rb = radius - panel_breaks(radius, r_scale)[::-1]
    tb = panel_breaks(np.pi, min(t_scale, np.pi / 4))
    for _ in range(refine):
        rb = np.sort(np.concatenate([rb, 0.5 * (rb[1:] + rb[:-1])]))
        tb = np.sort(np.concatenate([tb, 0.5 * (tb[1:] + tb[:-1])]))
    r, wr = composite_gauss(rb, n)
    th, wt = composite_gauss(tb, n)
    ph, wp = periodic_rule(n_phi * 2**refine)

    R, TH, PH = np.meshgrid(r, th, ph, indexing="ij")
    W = (wr * r * r)[:, None, None] * (wt * np.sin(th))[None, :, None] * wp[None, None, :]
    st = np.sin(TH)
    pts = (c + (R * st * np.cos(PH))[..., None] * ex + (R * st * np.sin(PH))[..., None] * ey
           + (R * np.cos(TH))[..., None] * ez)
    return pts.reshape(-1, 3), W.ravel()
