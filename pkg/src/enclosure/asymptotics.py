"""Closed-form leading asymptotics of the indicator.

The top term is

    I_tau ~ (pi * gamma0 / tau^4) * exp(-2 tau l0 / sqrt(gamma0)) * T0,

with T0 a signed sum over stationary pairs of b * f(y0)^2 / (2 sqrt(A)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateError, SceneError
from .geometry import fd_hessian
from .logvalue import LogValue
from .scene import Scene
from .stationary import MERGE_TOL, StationaryPair

ZERO, PLUS_INF, MINUS_INF, INDETERMINATE = "zero", "plus_infinity", "minus_infinity", "indeterminate"


def reflection_coefficient(kind: str, lambda1: float = 0.0, gamma0: float = 1.0) -> float:
    """b = -1 for Dirichlet, (sqrt(g) - l1)/(sqrt(g) + l1) for Robin."""
    kind = kind.replace("-", "_")
    if kind == "dirichlet":
        return -1.0
    if kind not in ("neumann_plus", "neumann_minus"):
        raise SceneError(f"unknown cavity kind {kind!r}")
    if lambda1 < 0:
        raise SceneError("lambda1 must be non-negative")
    rg = math.sqrt(gamma0)
    if kind == "neumann_plus" and not lambda1 < rg:
        raise SceneError(f"neumann_plus needs lambda1 < sqrt(gamma0), got {lambda1}")
    if kind == "neumann_minus" and not lambda1 > rg:
        raise SceneError(f"neumann_minus needs lambda1 > sqrt(gamma0), got {lambda1}")
    return (rg - lambda1) / (rg + lambda1)


def _mean_gauss(M: np.ndarray) -> tuple[float, float]:
    return 0.5 * float(np.trace(M)), float(np.linalg.det(M))


def amplitude_from_matrices(G, H, l0: float) -> float:
    G = np.asarray(G, float)
    H = np.asarray(H, float)
    mD, gD = _mean_gauss(G)
    mB, gB = _mean_gauss(H)
    first = 1.0 + 2.0 * l0 * mB + l0 * l0 * gB
    second = l0 * l0 * gD * gB + 2.0 * l0 * (mB * gD + mD * gB) + float(np.linalg.det(G + H))
    return first * second


def amplitude_general(pair: StationaryPair) -> float:
    """Curvature amplitude of a pair; det(Hess L) = 4 A / l0^4."""
    A = amplitude_from_matrices(pair.G, pair.H, pair.l0_local)
    if not A > 0:
        raise DegenerateError(f"non-positive amplitude {A:.6g}: degenerate pair")
    return A


def amplitude_ball(k1: float, k2: float, l0: float, a: float) -> float:
    """prod_j (k_j + 1/(l0 + a)) for a ball probe of radius a."""
    s = 1.0 / (l0 + a)
    f1, f2 = k1 + s, k2 + s
    if not (f1 > 0 and f2 > 0):
        raise DegenerateError("shifted curvature is not positive: degenerate configuration")
    return f1 * f2


@dataclass
class PairContribution:
    pair: StationaryPair
    b: float
    f: float
    amplitude: float
    contribution: float
    amplitude_ball: Optional[float] = None

    def to_dict(self) -> dict:
        d = {"cavity_id": self.pair.cavity_id, "kind": self.pair.kind,
             "x0": self.pair.x0.tolist(), "y0": self.pair.y0.tolist(),
             "b": self.b, "f": self.f, "amplitude": self.amplitude,
             "contribution": self.contribution}
        if self.amplitude_ball is not None:
            d["amplitude_ball"] = self.amplitude_ball
        return d


@dataclass
class AsymptoticReport:
    pairs: list[PairContribution]
    T0: float
    l0: float
    gamma0: float
    form: str = "general"
    meta: dict = field(default_factory=dict)

    @property
    def threshold(self) -> float:
        """Critical T = 2 l0 / sqrt(gamma0)."""
        return 2.0 * self.l0 / math.sqrt(self.gamma0)

    def to_dict(self) -> dict:
        return {"T0": self.T0, "l0": self.l0, "gamma0": self.gamma0, "form": self.form,
                "threshold_T": self.threshold,
                "pairs": [c.to_dict() for c in self.pairs]}


def T0(scene: Scene, pairs: list[StationaryPair], form: str = "auto") -> AsymptoticReport:
    """Per-pair contributions and their (compensated) sum.

    ``form="ball"`` uses the ball-probe expression with the cavity's principal
    curvatures, ``"general"`` the curvature-matrix expression; ``"auto"``
    picks the ball form when the probe is a ball.
    """
    if not pairs:
        raise ValueError("no stationary pairs")
    if form == "auto":
        form = "ball" if scene.probe_is_ball else "general"
    if form == "ball" and not scene.probe_is_ball:
        raise ValueError("ball form needs a ball probe")
    l0 = min(p.l0_local for p in pairs)
    tol = MERGE_TOL * scene.scale
    out = []
    for p in pairs:
        if p.l0_local > l0 + tol:
            raise ValueError(f"pair on {p.cavity_id} at {p.l0_local} exceeds l0 = {l0}")
        cav = scene.cavity(p.cavity_id)
        lam1 = float(cav.lambda1(p.x0)) if cav.is_robin else 0.0
        b = reflection_coefficient(cav.kind, lam1, scene.gamma0)
        f = float(scene.source(p.y0))
        A = amplitude_general(p)
        p.amplitude = A
        Ab = None
        if form == "ball":
            a = scene.probe.radius
            k1, k2 = cav.surface.principal_curvatures(p.x0)
            Ab = amplitude_ball(k1, k2, p.l0_local, a)
            c = a * a / (2.0 * (p.l0_local + a) ** 2) * b * f * f / math.sqrt(Ab)
        else:
            c = b * f * f / (2.0 * math.sqrt(A))
        out.append(PairContribution(p, b, f, A, c, Ab))
    out.sort(key=lambda c: (c.pair.cavity_id, tuple(np.round(c.pair.x0, 9))))
    total = math.fsum(c.contribution for c in out)
    return AsymptoticReport(out, total, l0, scene.gamma0, form)


def leading_indicator(report: AsymptoticReport, tau: float) -> LogValue:
    """(pi g / tau^4) exp(-2 tau l0 / sqrt(g)) T0 as a LogValue."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    if report.T0 == 0.0:
        return LogValue.zero()
    lm = (math.log(math.pi * report.gamma0) - 4.0 * math.log(tau)
          - 2.0 * tau * report.l0 / math.sqrt(report.gamma0) + math.log(abs(report.T0)))
    return LogValue(1 if report.T0 > 0 else -1, lm)


def classify_limit(report: AsymptoticReport, T: float) -> str:
    """Limit of exp(tau T) I_tau as tau -> infinity."""
    thr = report.threshold
    if T < thr:
        return ZERO
    if T == thr or report.T0 == 0.0:
        return INDETERMINATE
    return PLUS_INF if report.T0 > 0 else MINUS_INF


@dataclass(frozen=True)
class LaplaceResult:
    value: LogValue
    det_hess: float
    n: int
    error_model: dict


def laplace_asymptotic(h: Callable, phi: Callable, x0, tau: float,
                       hess: Optional[np.ndarray] = None, beta0: float = 1.0,
                       fd_step: float = 1e-3) -> LaplaceResult:
    """Leading term exp(-tau h(x0)) (2 pi/tau)^(n/2) phi(x0) / sqrt(det Hess h(x0)).

    The Hessian is differentiated numerically unless given.  The relative
    error of the leading term is O(tau^(-beta0/2)) for Hoelder exponent beta0.
    """
    x0 = np.atleast_1d(np.asarray(x0, float))
    n = x0.size
    if hess is None:
        hess = fd_hessian(lambda d: float(h(x0 + d)), n, fd_step)
    hess = 0.5 * (np.asarray(hess, float) + np.asarray(hess, float).T)
    ev = np.linalg.eigvalsh(hess)
    if ev[0] < 1e-10 * max(float(np.trace(hess)), 0.0) or ev[0] <= 0:
        raise DegenerateError(f"Hessian is not positive definite (min eig {ev[0]:.3g})")
    det = float(np.prod(ev))
    mant = float(phi(x0))
    val = LogValue.from_parts(mant, 0.5 * n * math.log(2 * math.pi / tau) - 0.5 * math.log(det)
                              - tau * float(h(x0)))
    return LaplaceResult(val, det, n, {"model": "O(tau^(-beta0/2))", "beta0": beta0,
                                       "rate": -beta0 / 2})


def asymptotic_series(report: AsymptoticReport, taus) -> list[LogValue]:
    return [leading_indicator(report, float(t)) for t in taus]
