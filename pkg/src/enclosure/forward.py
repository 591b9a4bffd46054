"""Exact single-sphere solution of (gamma0 Lap - tau^2) w + f = 0 outside a cavity.

Axisymmetric reduction about the line through the cavity centre C and the
probe centre.  With kappa = tau/sqrt(gamma0), the free field on the cavity
sphere |x - C| = R has Legendre coefficients v_n(R), the scattered field is
sum_n c_n k_n(kappa r) P_n(cos theta), and per mode

    w_s(R)_n = -rho_n v_n(R),
    rho_n = (gamma0 kappa i_n'/i_n - lam) / (gamma0 kappa k_n'/k_n - lam)

(rho_n = 1 for Dirichlet, lam = lambda1 tau + lambda0).  Every quantity is
carried multiplied by exp(kappa l0) per leg, l0 = d - a - R, so J comes out
as J * exp(2 kappa l0) and only meets the exponential inside a LogValue.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import legendre as npleg

from .bessel import log_derivative_i, log_derivative_k, scaled_i, scaled_k
from .errors import ConvergenceError, SceneError
from .geometry import Sphere
from .logvalue import LogValue, log_sum
from .quadrature import ball_rule_toward, gauss_legendre
from .reconstruct import LogSeries
from .scene import Cavity, Scene

log = logging.getLogger(__name__)

TAIL_TOL = 1e-8
CROSSCHECK_TOL = 1e-4
MAX_MODES = 6000


@dataclass(frozen=True)
class Layout:
    """Single-cavity geometry on the symmetry axis."""

    gamma0: float
    C: np.ndarray       # cavity centre
    R: float
    cB: np.ndarray      # probe centre
    a: float
    axis: np.ndarray    # unit vector from C toward cB
    d: float

    @property
    def l0(self) -> float:
        return self.d - self.a - self.R


def layout(scene: Scene, cavity: Optional[Cavity] = None) -> Layout:
    if cavity is None:
        if len(scene.cavities) != 1:
            raise SceneError("exact solver handles one cavity at a time")
        cavity = scene.cavities[0]
    if not isinstance(cavity.surface, Sphere) or not scene.probe_is_ball:
        raise SceneError("exact solver needs a spherical cavity and a ball probe")
    C = cavity.surface.center
    cB = scene.probe.center
    d = float(np.linalg.norm(cB - C))
    lay = Layout(scene.gamma0, C, cavity.surface.radius, cB, scene.probe.radius,
                 (cB - C) / d, d)
    if lay.l0 <= 0:
        raise SceneError("probe ball must lie strictly outside the cavity sphere")
    return lay


@dataclass
class IncidentTrace:
    """Shifted Legendre coefficients of v and d_r v on the cavity sphere."""

    tau: float
    kappa: float
    v: np.ndarray
    dv: np.ndarray
    n_max: int
    tail: float
    method: str


@dataclass
class SpectralSolution:
    tau: float
    kappa: float
    gamma0: float
    R: float
    center: np.ndarray
    n_max: int
    bc: str
    lam: float
    v: np.ndarray        # shifted v_n(R)
    rho: np.ndarray      # w_s(R)_n = -rho_n v_n
    c: np.ndarray        # shifted, k_n normalised at R: w_s = sum c_n khat_n(kr)/khat_n(kR) e^{-k(r-R)} P_n
    bc_residual: float
    tail: float
    tail_monotone: bool


@dataclass
class IndicatorSample:
    tau: float
    J: LogValue
    J_volume: LogValue
    mode_tail: float
    n_max: int = 0

    @property
    def mismatch(self) -> float:
        if self.J.sign == 0 and self.J_volume.sign == 0:
            return 0.0
        if self.J.sign != self.J_volume.sign:
            return math.inf
        return abs(math.expm1(self.J_volume.log_mag - self.J.log_mag))


def default_n_max(kappa: float, R: float) -> int:
    return int(math.ceil(kappa * R)) + 20


def _is_axisymmetric(scene: Scene, lay: Layout) -> bool:
    rng = np.random.default_rng(7)
    pts = lay.cB + scene.probe.radius * rng.uniform(-0.7, 0.7, (20, 3))
    ax = lay.axis
    ang = 1.234
    # Rodrigues rotation about the axis through the probe centre
    q = pts - lay.cB
    rot = (q * math.cos(ang) + np.cross(ax, q) * math.sin(ang)
           + np.outer(q @ ax, ax) * (1 - math.cos(ang)))
    f0 = scene.source(pts)
    f1 = scene.source(lay.cB + rot)
    return bool(np.allclose(f0, f1, rtol=1e-12, atol=1e-14 * np.abs(f0).max()))


def incident_direct(scene: Scene, tau: float, x, lay: Optional[Layout] = None,
                    n: int = 16, refine: int = 0) -> float:
    """exp(kappa l0) * v(x) by quadrature of the kernel over the probe ball."""
    lay = lay or layout(scene)
    kappa = tau / math.sqrt(lay.gamma0)
    pts, w = ball_rule_toward(lay.cB, lay.a, x, kappa, n=n, refine=refine)
    rho = np.linalg.norm(pts - np.asarray(x, float), axis=1)
    vals = scene.source(pts) * np.exp(-kappa * (rho - lay.l0)) / (4 * math.pi * lay.gamma0 * rho)
    return float(np.dot(w, vals))


def _trace_closed(scene: Scene, lay: Layout, kappa: float, n_max: int) -> np.ndarray:
    f = scene.source.constant_value
    n = np.arange(n_max + 1)
    i1a = scaled_i(1, kappa * lay.a)[1]
    kd = scaled_k(n_max, kappa * lay.d)
    iR = scaled_i(n_max, kappa * lay.R)
    return 2 * f * lay.a**2 / (math.pi * lay.gamma0) * i1a * (2 * n + 1) * kd * iR


def _trace_quadrature(scene: Scene, lay: Layout, tau: float, n_max: int,
                      n_nodes: Optional[int] = None) -> np.ndarray:
    m = n_nodes or 2 * n_max + 8
    mu, wmu = gauss_legendre(m, -1.0, 1.0)
    perp = np.cross(lay.axis, [1.0, 0.0, 0.0])
    if np.linalg.norm(perp) < 0.1:
        perp = np.cross(lay.axis, [0.0, 1.0, 0.0])
    perp /= np.linalg.norm(perp)
    vals = np.empty(m)
    for j, c in enumerate(mu):
        x = lay.C + lay.R * (c * lay.axis + math.sqrt(max(0.0, 1 - c * c)) * perp)
        vals[j] = incident_direct(scene, tau, x, lay)
    n = np.arange(n_max + 1)
    P = npleg.legvander(mu, n_max)  # (m, n_max+1)
    return (2 * n + 1) / 2.0 * (P.T @ (wmu * vals))


def incident_trace(scene: Scene, tau: float, n_max: Optional[int] = None,
                   method: str = "auto", n_nodes: Optional[int] = None,
                   cavity: Optional[Cavity] = None) -> IncidentTrace:
    """Legendre coefficients of exp(kappa l0) v on the cavity sphere.

    ``method="closed"`` uses the addition theorem for a constant source,
    ``"quadrature"`` projects direct ball quadratures at Gauss nodes (needs a
    source symmetric about the axis).  n_max is raised until the last
    coefficient is below 1e-8 of the largest.
    """
    lay = layout(scene, cavity)
    kappa = tau / math.sqrt(lay.gamma0)
    if method == "auto":
        method = "closed" if scene.source.is_constant else "quadrature"
    if method == "closed" and not scene.source.is_constant:
        raise SceneError("closed-form trace needs a constant source")
    if method == "quadrature" and not _is_axisymmetric(scene, lay):
        raise SceneError("source is not symmetric about the cavity-probe axis")
    nm = n_max or default_n_max(kappa, lay.R)
    while True:
        if method == "closed":
            v = _trace_closed(scene, lay, kappa, nm)
        else:
            v = _trace_quadrature(scene, lay, tau, nm, n_nodes)
        top = np.abs(v).max()
        tail = float(abs(v[-1]) / top) if top > 0 else 0.0
        if tail <= TAIL_TOL or nm >= MAX_MODES:
            break
        nm = min(2 * nm, MAX_MODES)
    if tail > TAIL_TOL:
        raise ConvergenceError(f"Legendre tail {tail:.2e} at n_max = {nm}")
    dv = kappa * log_derivative_i(nm, kappa * lay.R) * v
    return IncidentTrace(tau, kappa, v, dv, nm, tail, method)


def solve_modes(trace: IncidentTrace, bc: str, gamma0: float, R: float,
                lambda0: float = 0.0, lambda1: float = 0.0,
                center=None) -> SpectralSolution:
    """Per-mode coefficients of the scattered field for Dirichlet or Robin data."""
    kappa, tau, nm = trace.kappa, trace.tau, trace.n_max
    z = kappa * R
    lki = log_derivative_i(nm, z)
    lkk = log_derivative_k(nm, z)
    if bc == "dirichlet":
        lam = math.inf
        rho = np.ones(nm + 1)
        resid = np.abs(trace.v * (1 - rho))  # exact by construction
    elif bc == "robin":
        if lambda1 < 0:
            raise SceneError("lambda1 must be non-negative")
        lam = lambda1 * tau + lambda0
        den = gamma0 * kappa * lkk - lam
        # k_n' < 0 < k_n, so den < 0 whenever lam >= 0
        if not np.all(np.abs(den) > 1e-14 * gamma0 * kappa):
            raise ConvergenceError("Robin denominator vanished")
        rho = (gamma0 * kappa * lki - lam) / den
        ws = -rho * trace.v
        dws = kappa * lkk * ws
        lhs = gamma0 * (trace.dv + dws) - lam * (trace.v + ws)
        ref = np.abs(gamma0 * trace.dv) + np.abs(lam * trace.v) + np.abs(gamma0 * dws) + 1e-300
        resid = np.abs(lhs) / ref
    else:
        raise ValueError(f"unknown boundary condition {bc!r}")
    c = -rho * trace.v
    top = np.abs(c).max()
    last = np.abs(c[-5:])
    return SpectralSolution(
        tau=tau, kappa=kappa, gamma0=gamma0, R=R,
        center=np.zeros(3) if center is None else np.asarray(center, float),
        n_max=nm, bc=bc, lam=lam, v=trace.v, rho=rho, c=c,
        bc_residual=float(np.max(resid)), tail=float(abs(c[-1]) / top) if top > 0 else 0.0,
        tail_monotone=bool(np.all(np.diff(last) <= 0)))


def boundary_J(sol: SpectralSolution) -> float:
    """exp(2 kappa l0) * J from the boundary form (exact Legendre orthogonality)."""
    n = np.arange(sol.n_max + 1)
    z = sol.kappa * sol.R
    lki = log_derivative_i(sol.n_max, z)
    norm = 2 * math.pi * sol.R**2 * 2.0 / (2 * n + 1)
    if sol.bc == "dirichlet":
        lkk = log_derivative_k(sol.n_max, z)
        terms = -sol.gamma0 * norm * sol.kappa * sol.v**2 * (lki - lkk)
    else:
        terms = norm * sol.v**2 * (sol.gamma0 * sol.kappa * lki - sol.lam) * (1 - sol.rho)
    return math.fsum(terms)


def scattered_at(sol: SpectralSolution, lay: Layout, points) -> np.ndarray:
    """exp(2 kappa l0) * w_s at points of the probe ball (one shift from v, one from the decay)."""
    pts = np.atleast_2d(np.asarray(points, float))
    q = pts - lay.C
    r = np.linalg.norm(q, axis=1)
    mu = (q @ lay.axis) / r
    kap = sol.kappa
    kr = scaled_k(sol.n_max, kap * r)                      # (n, N)
    kR = scaled_k(sol.n_max, kap * lay.R)[:, None]
    P = npleg.legvander(mu, sol.n_max).T                   # (n, N)
    radial = kr / kR * np.exp(-kap * (r - lay.R - lay.l0))
    return np.sum(sol.c[:, None] * radial * P, axis=0)


def volume_J(scene: Scene, sol: SpectralSolution, lay: Layout, method: str = "auto",
             n: int = 16) -> float:
    """exp(2 kappa l0) * integral over the probe of f * w_s."""
    kap = sol.kappa
    if method == "auto":
        method = "mean_value" if scene.source.is_constant else "quadrature"
    if method == "mean_value":
        # ball mean-value identity for (Lap - kappa^2) u = 0
        f = scene.source.constant_value
        kd = scaled_k(sol.n_max, kap * lay.d)
        kR = scaled_k(sol.n_max, kap * lay.R)
        ws_c = math.fsum(sol.c * kd / kR)
        i1 = scaled_i(1, kap * lay.a)[1]
        return float(f * 4 * math.pi * lay.a**2 * i1 / kap * ws_c)
    pts, w = ball_rule_toward(lay.cB, lay.a, lay.C, kap, n=n)
    return float(np.dot(w, scene.source(pts) * scattered_at(sol, lay, pts)))


def solve_single(scene: Scene, tau: float, cavity: Optional[Cavity] = None,
                 n_max: Optional[int] = None, trace_method: str = "auto"):
    cav = cavity or scene.cavities[0]
    sub = scene if cavity is None else scene.with_cavities([cav])
    lay = layout(sub)
    trace = incident_trace(sub, tau, n_max, trace_method)
    if cav.kind == "dirichlet":
        sol = solve_modes(trace, "dirichlet", scene.gamma0, lay.R, center=lay.C)
    else:
        if not (cav.lambda0.is_constant and cav.lambda1.is_constant):
            raise SceneError("exact solver needs constant Robin coefficients")
        sol = solve_modes(trace, "robin", scene.gamma0, lay.R, cav.lambda0.constant_value,
                          cav.lambda1.constant_value, center=lay.C)
    return sub, lay, sol


def indicator_exact(scene: Scene, tau: float, n_max: Optional[int] = None,
                    cavity: Optional[Cavity] = None, volume_method: str = "auto",
                    check: bool = True) -> IndicatorSample:
    """J_tau of a single spherical cavity, by boundary form and by volume form."""
    sub, lay, sol = solve_single(scene, tau, cavity, n_max)
    shift = -2.0 * sol.kappa * lay.l0
    jb = LogValue.from_parts(boundary_J(sol), shift)
    jv = LogValue.from_parts(volume_J(sub, sol, lay, volume_method), shift)
    sample = IndicatorSample(tau, jb, jv, sol.tail, sol.n_max)
    if check and sample.mismatch > CROSSCHECK_TOL:
        raise ConvergenceError(f"boundary/volume mismatch {sample.mismatch:.2e} at tau = {tau}")
    return sample


def indicator_superposed(scene: Scene, tau: float, **kw) -> IndicatorSample:
    """Sum of single-cavity J's; ignores multiple scattering between cavities."""
    parts = [indicator_exact(scene, tau, cavity=c, **kw) for c in scene.cavities]
    return IndicatorSample(tau, log_sum(p.J for p in parts), log_sum(p.J_volume for p in parts),
                           max(p.mode_tail for p in parts), max(p.n_max for p in parts))


def indicator_series(scene: Scene, taus: Sequence[float], truncation_T: Optional[float] = None,
                     **kw) -> LogSeries:
    """J over a tau grid; optionally adds the synthetic tau^-1 exp(-tau T) term."""
    taus = [float(t) for t in taus]
    approx = len(scene.cavities) > 1
    samples = [(indicator_superposed if approx else indicator_exact)(scene, t, **kw)
               for t in taus]
    vals = []
    for s in samples:
        v = s.J
        if truncation_T is not None:
            v = v + LogValue(1, -math.log(s.tau) - s.tau * truncation_T)
        vals.append(v)
    meta = {"approximate_superposition": approx,
            "max_mismatch": max((s.mismatch for s in samples), default=0.0),
            "n_max": [s.n_max for s in samples], "truncation_T": truncation_T}
    return LogSeries.from_values(taus, vals, scene.gamma0, "forward", meta)
