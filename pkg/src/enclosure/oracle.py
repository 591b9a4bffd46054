"""Brute-force quadrature of the top-order kernel integral

    K = int_{dD} int_B int_B f(y) f(y~) exp(-kappa L) eta(x, y) eta~(x, y~) dy dy~ dS_x,

L = |x - y| + |x - y~|, kappa = tau/sqrt(gamma0), evaluated in factorised form
int_cap I_eta(x) I_eta~(x) dS_x with each ball integral shifted by exp(kappa l0).
Only the cap of dD facing the probe is integrated (cut-off equal to one
there); the discarded part is bounded and reported.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .asymptotics import amplitude_general, reflection_coefficient
from .bessel import scaled_i, scaled_k
from .errors import ConvergenceError, DegenerateError
from .geometry import Sphere, Surface, graph_height_cavity, graph_height_probe
from .logvalue import LogValue
from .quadrature import ball_rule_toward, composite_gauss, pairwise_sum, \
    panel_breaks, periodic_rule
from .scene import Cavity, Scene, fibonacci_directions
from .stationary import StationaryPair, find_pairs

log = logging.getLogger(__name__)

EPS_CAP = 0.2
EXP_FLOOR = -600.0  # exponents below this are treated as exact zeros


def _shifted_exp(expo: np.ndarray) -> np.ndarray:
    """exp(expo) with tiny values flushed to zero before exponentiation."""
    small = expo < EXP_FLOOR
    return np.where(small, 0.0, np.exp(np.where(small, 0.0, expo)))


@dataclass(frozen=True)
class BoundaryKernelPair:
    eta: np.ndarray
    eta_t: np.ndarray


def boundary_kernels(kind: str, x, nu, y, lambda0=0.0, lambda1=0.0, gamma0: float = 1.0,
                     den_tol: float = 1e-8) -> BoundaryKernelPair:
    """Top-order kernel factors at (x, y); eta~ is meant to be used at (x, y~).

    ``y`` may be a single point or an (N, 3) array; lambda0 enters only the
    lower-order kernels and is accepted for a uniform signature.
    """
    x = np.asarray(x, float)
    nu = np.asarray(nu, float)
    y = np.asarray(y, float)
    d = x - y
    rho = np.linalg.norm(d, axis=-1)
    nw = (d @ nu) / rho  # nu . omega, about -1 near the stationary point
    rg = math.sqrt(gamma0)
    dphi = -rg * nw      # gamma0 * d_nu phi on the cavity boundary
    if kind == "dirichlet":
        eta = 1.0 / (4 * math.pi * gamma0 * rho)
        eta_t = (-nw + dphi / rg) / (4 * math.pi * rg * rho)
    else:
        lam1 = np.asarray(lambda1, float)
        a0 = (nw / rg + lam1 / gamma0) / (4 * math.pi * rho)
        den = dphi + lam1
        if np.any(np.abs(den) < den_tol):
            raise ValueError("Robin denominator vanishes: point outside the valid cap")
        eta = -a0
        eta_t = 1.0 / (4 * math.pi * gamma0 * rho) - a0 / den
    return BoundaryKernelPair(eta, eta_t)


@dataclass(frozen=True)
class OracleGrid:
    """Panel orders and counts; ``level`` doubles every node count."""

    n_ball: int = 12
    n_phi: int = 8
    n_outer: int = 12
    n_outer_phi: int = 16
    level: int = 0
    eps_cap: float = EPS_CAP

    def refined(self) -> "OracleGrid":
        return OracleGrid(self.n_ball, self.n_phi, self.n_outer, self.n_outer_phi,
                          self.level + 1, self.eps_cap)


@dataclass
class Cap:
    """Cap of the cavity surface around the stationary point, in the direction chart."""

    u0: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    half_angle: float


@dataclass
class OracleResult:
    tau: float
    shifted: float            # exp(2 kappa l0) * (J contribution)
    value: LogValue           # J contribution
    tail_bound: float         # bound on the discarded part, same scaling as ``shifted``
    refinement_change: float
    level: int
    n_evals: int
    axisymmetric: bool
    cap_half_angle: float
    coverage: float           # kappa * (L - 2 l0) at the cap edge
    meta: dict = field(default_factory=dict)


# -- geometry helpers -----------------------------------------------------------
def _probe_min_cosine(probe: Surface, x: np.ndarray, nu: np.ndarray, samples: np.ndarray) -> float:
    if isinstance(probe, Sphere):
        q = probe.center - x
        r = float(np.linalg.norm(q))
        if r <= probe.radius:
            return -1.0
        beta = math.acos(max(-1.0, min(1.0, float(q @ nu) / r)))
        ang = beta + math.asin(probe.radius / r)
        return math.cos(min(ang, math.pi))
    q = samples - x
    return float(np.min((q @ nu) / np.linalg.norm(q, axis=1)))


def _cap_circle(surface: Surface, cap: Cap, theta: float, phis: np.ndarray) -> np.ndarray:
    u = (math.cos(theta) * cap.u0[None, :]
         + math.sin(theta) * (np.cos(phis)[:, None] * cap.t1 + np.sin(phis)[:, None] * cap.t2))
    return u


def find_cap(cavity: Surface, probe: Surface, x0, eps_cap: float = EPS_CAP) -> Cap:
    """Largest cap (in chart angle) on which every probe point is seen at cosine >= eps_cap."""
    u0 = cavity.to_direction(x0)
    helper = np.array([1.0, 0.0, 0.0]) if abs(u0[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = helper - (helper @ u0) * u0
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(u0, t1)
    cap = Cap(u0, t1, t2, 0.0)
    samples = probe.from_direction(fibonacci_directions(600))
    phis = periodic_rule(24)[0]

    def ok(theta):
        for u in _cap_circle(cavity, cap, theta, phis):
            x = cavity.from_direction(u)
            if _probe_min_cosine(probe, x, cavity.normal(x), samples) < eps_cap:
                return False
        return True

    if not ok(0.0):
        raise DegenerateError("probe is not inside the valid cap at the stationary point")
    lo, hi = 0.0, math.pi / 2
    if ok(hi):
        lo = hi
    else:
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    cap.half_angle = lo
    return cap


def _is_axisymmetric(scene: Scene, cavity: Cavity) -> bool:
    if not (isinstance(cavity.surface, Sphere) and scene.probe_is_ball):
        return False
    if not (scene.source.is_constant and cavity.lambda0.is_constant
            and cavity.lambda1.is_constant):
        return False
    return True


def _ball_shell_log_bound(probe: Sphere, x: np.ndarray, kappa: float, l0: float) -> np.ndarray:
    """log of exp(kappa l0) int_B exp(-kappa |x-y|)/(4 pi |x-y|) dy for a ball, in closed form."""
    r = np.linalg.norm(x - probe.center, axis=-1)
    a = probe.radius
    i1 = scaled_i(1, kappa * a)[1]
    k0 = scaled_k(0, kappa * r)[0]
    return np.log(2 * a * a / math.pi * i1 * k0) + kappa * (a - r + l0)


def tail_bound(scene: Scene, cavity: Cavity, cap: Cap, tau: float, l0: float) -> float:
    """Bound on exp(2 kappa l0) * |discarded part| of the surface integral.

    The pointwise bound on |I_eta I_eta~| is integrated over the excluded
    region with an equal-area point set.

    Outside the cap the kernels are bounded by their cap-edge form (the
    cut-off removes the region where the Robin denominator degenerates):
    |eta| <= c/rho with c from the eps_cap lower bound.
    """
    g = scene.gamma0
    rg = math.sqrt(g)
    kappa = tau / rg
    surf = cavity.surface
    dirs = fibonacci_directions(4000)
    outside = dirs @ cap.u0 < math.cos(cap.half_angle)
    if not np.any(outside):
        return 0.0
    pts = surf.from_direction(dirs[outside])
    lam1 = float(np.max(np.abs(cavity.lambda1(pts)))) if cavity.is_robin else 0.0
    fmax = float(np.max(np.abs(scene.source(scene.probe.from_direction(dirs[:400])))))
    if cavity.kind == "dirichlet":
        c_eta, c_eta_t = 1.0 / g, 2.0 / rg
    else:
        c_eta = 1.0 / rg + lam1 / g
        c_eta_t = 1.0 / g + c_eta / (rg * EPS_CAP + lam1)
    if isinstance(scene.probe, Sphere):
        log_shell = _ball_shell_log_bound(scene.probe, pts, kappa, l0)
    else:
        # crude: whole probe volume at the minimal distance
        vol = 4.0 / 3.0 * math.pi * float(np.prod(scene.probe.semiaxes))
        dist = np.array([min(np.linalg.norm(p - scene.probe.from_direction(dirs[:400]), axis=1))
                         for p in pts])
        log_shell = np.log(vol / (4 * math.pi * dist)) - kappa * (dist - l0)
    # integral of the pointwise bound (uniform nodes in the chart, weighted by dS/dOmega)
    if fmax == 0.0:
        return 0.0
    dens = _shifted_exp(2.0 * log_shell + math.log(fmax * fmax * c_eta * c_eta_t))
    w = surf.area_element(dirs[outside]) * (4 * math.pi / len(dirs))
    return float(np.dot(w, dens))


# -- inner and outer integrals --------------------------------------------------
def inner_ball_integral(x, nu, cavity: Cavity, scene: Scene, tau: float, l0: float,
                        grid: OracleGrid = OracleGrid(),
                        kernels: Optional[Callable] = None) -> tuple[float, float]:
    """exp(kappa l0) int_B f(y) eta(x, y) exp(-kappa |x - y|) dy and the eta~ analogue."""
    kappa = tau / math.sqrt(scene.gamma0)
    pts, w = _probe_rule(scene, x, kappa, grid)
    return _inner(pts, w, np.asarray(x, float), np.asarray(nu, float), cavity, scene,
                  kappa, l0, kernels)


def _probe_rule(scene: Scene, x, kappa: float, grid: OracleGrid):
    if not isinstance(scene.probe, Sphere):
        return _ellipsoid_rule(scene.probe, x, kappa, grid)
    return ball_rule_toward(scene.probe.center, scene.probe.radius, x, kappa,
                            n=grid.n_ball, n_phi=grid.n_phi, refine=grid.level)


def _ellipsoid_rule(probe: Surface, x, kappa: float, grid: OracleGrid):
    """Map a unit-ball rule through y = c + A z; Jacobian |det A|."""
    A = probe._A
    # unit-ball rule graded toward the preimage of the nearest point direction
    target = np.asarray(x, float) - probe.center
    zt = probe._Ainv @ target
    scale = kappa * float(probe.semiaxes.min())
    pts, w = ball_rule_toward(np.zeros(3), 1.0, zt, scale, n=grid.n_ball,
                              n_phi=grid.n_phi, refine=grid.level)
    return probe.center + pts @ A.T, w * abs(np.linalg.det(A))


def _inner(pts, w, x, nu, cavity, scene, kappa, l0, kernels=None):
    if kernels is None:
        kp = boundary_kernels(cavity.kind, x, nu, pts, 0.0,
                              cavity.lambda1(x) if cavity.is_robin else 0.0, scene.gamma0)
        eta, eta_t = kp.eta, kp.eta_t
    else:
        eta, eta_t = kernels(x, nu, pts)
    rho = np.linalg.norm(x - pts, axis=1)
    wf = w * scene.source(pts) * _shifted_exp(-kappa * (rho - l0))
    return float(pairwise_sum(wf * eta)), float(pairwise_sum(wf * eta_t))


def _outer_nodes(cavity: Surface, cap: Cap, kappa: float, grid: OracleGrid, axisym: bool):
    """Direction-chart nodes u and weights including the area element."""
    m = 2 ** grid.level
    width = min(cap.half_angle, 1.0 / math.sqrt(max(kappa * cavity.scale, 1e-300)))
    tb = panel_breaks(cap.half_angle, width)
    for _ in range(grid.level):
        tb = np.sort(np.concatenate([tb, 0.5 * (tb[1:] + tb[:-1])]))
    th, wt = composite_gauss(tb, grid.n_outer)
    if axisym:
        ph, wp = np.zeros(1), np.full(1, 2 * math.pi)
    else:
        ph, wp = periodic_rule(grid.n_outer_phi * m)
    TH, PH = np.meshgrid(th, ph, indexing="ij")
    u = (np.cos(TH)[..., None] * cap.u0
         + np.sin(TH)[..., None] * (np.cos(PH)[..., None] * cap.t1
                                    + np.sin(PH)[..., None] * cap.t2)).reshape(-1, 3)
    W = (wt * np.sin(th))[:, None] * wp[None, :]
    return u, W.ravel() * cavity.area_element(u)


def _cavity_pair(scene: Scene, cavity: Cavity) -> StationaryPair:
    pairs = find_pairs(scene.with_cavities([cavity]))
    if len(pairs) != 1:
        raise DegenerateError(f"expected one stationary pair on {cavity.id}, found {len(pairs)}")
    return pairs[0]


def _integrate(scene, cavity, cap, tau, l0, grid, axisym, kernels=None):
    kappa = tau / math.sqrt(scene.gamma0)
    surf = cavity.surface
    u, W = _outer_nodes(surf, cap, kappa, grid, axisym)
    xs = surf.from_direction(u)
    vals = np.empty(len(xs))
    n_evals = 0
    for j, x in enumerate(xs):
        nu = surf.normal(x)
        pts, w = _probe_rule(scene, x, kappa, grid)
        a, b = _inner(pts, w, x, nu, cavity, scene, kappa, l0, kernels)
        vals[j] = a * b
        n_evals += 2 * len(w)
    return float(pairwise_sum(W * vals)), n_evals


def K_top_shifted(cavity: Cavity, scene: Scene, tau: float, grid: OracleGrid = OracleGrid(),
                  tol: float = 1e-6, max_doublings: int = 4, pair: Optional[StationaryPair] = None,
                  check_tail: bool = True, refine: bool = True) -> OracleResult:
    """Signed contribution of the cavity's top kernel to J, times exp(2 kappa l0).

    Dirichlet cavities enter J with a minus sign.  Grids are doubled until
    the relative change drops below ``tol`` (at most ``max_doublings``).
    """
    pair = pair or _cavity_pair(scene, cavity)
    l0 = pair.l0_local
    kappa = tau / math.sqrt(scene.gamma0)
    if np.all(scene.source(scene.probe.from_direction(fibonacci_directions(50))) == 0):
        return OracleResult(tau, 0.0, LogValue.zero(), 0.0, 0.0, grid.level, 0, False, 0.0, 0.0)
    cap = find_cap(cavity.surface, scene.probe, pair.x0, grid.eps_cap)
    axisym = _is_axisymmetric(scene, cavity)
    sign = -1.0 if cavity.kind == "dirichlet" else 1.0

    value, n_evals = _integrate(scene, cavity, cap, tau, l0, grid, axisym)
    change = math.inf
    g = grid
    if refine:
        for _ in range(max_doublings):
            g = g.refined()
            new, n_new = _integrate(scene, cavity, cap, tau, l0, g, axisym)
            n_evals += n_new
            change = abs(new - value) / abs(new) if new != 0 else 0.0
            value = new
            if change < tol:
                break
        if change >= tol:
            raise ConvergenceError(f"oracle refinement stalled: relative change {change:.2e}")
    tb = tail_bound(scene, cavity, cap, tau, l0)
    edge = cavity.surface.from_direction(_cap_circle(cavity.surface, cap, cap.half_angle,
                                                     periodic_rule(16)[0]))
    if isinstance(scene.probe, Sphere):
        dist = np.linalg.norm(edge - scene.probe.center, axis=1) - scene.probe.radius
    else:
        dist = np.array([np.min(np.linalg.norm(scene.probe.from_direction(
            fibonacci_directions(400)) - e, axis=1)) for e in edge])
    coverage = float(2 * kappa * (dist.min() - l0))
    if check_tail and tb > 0.01 * abs(value):
        raise ConvergenceError(f"cap too small: tail bound {tb:.3g} vs result {value:.3g}")
    shifted = sign * value
    return OracleResult(tau, shifted, LogValue.from_parts(shifted, -2.0 * kappa * l0), tb,
                        change, g.level, n_evals, axisym, cap.half_angle, coverage)


def top_term_ratio(result: OracleResult, pair: StationaryPair, scene: Scene,
                   cavity: Cavity) -> float:
    """tau^5 exp(2 kappa l0) 2 sqrt(A) K / (pi gamma0 b f(y0)^2); tends to 1."""
    lam1 = float(cavity.lambda1(pair.x0)) if cavity.is_robin else 0.0
    b = reflection_coefficient(cavity.kind, lam1, scene.gamma0)
    A = amplitude_general(pair)
    f = float(scene.source(pair.y0))
    return result.tau**5 * result.shifted * 2 * math.sqrt(A) / (math.pi * scene.gamma0 * b * f * f)


@dataclass
class ComparisonTable:
    taus: np.ndarray
    ratios: np.ndarray
    exponent: float
    tail_bounds: np.ndarray
    changes: np.ndarray

    def rows(self) -> list[dict]:
        return [{"tau": float(t), "ratio": float(r), "tail_bound": float(b),
                 "refinement_change": float(c)}
                for t, r, b, c in zip(self.taus, self.ratios, self.tail_bounds, self.changes)]


def convergence_exponent(taus, ratios) -> float:
    """Slope of log|ratio - 1| against log tau."""
    t = np.asarray(taus, float)
    e = np.abs(np.asarray(ratios, float) - 1.0)
    if np.any(e == 0):
        return -math.inf
    return float(np.polyfit(np.log(t), np.log(e), 1)[0])


def compare_to_laplace(cavity: Cavity, scene: Scene, taus: Sequence[float] = (8, 12, 16, 24, 32, 40),
                       grid: OracleGrid = OracleGrid(), **kw) -> ComparisonTable:
    taus = np.asarray(sorted(float(t) for t in taus))
    if np.any(np.diff(taus) <= 0):
        raise ValueError("tau grid must be increasing")
    pair = _cavity_pair(scene, cavity)
    res = [K_top_shifted(cavity, scene, t, grid, pair=pair, **kw) for t in taus]
    ratios = np.array([top_term_ratio(r, pair, scene, cavity) for r in res])
    return ComparisonTable(taus, ratios, convergence_exponent(taus, ratios),
                           np.array([r.tail_bound for r in res]),
                           np.array([r.refinement_change for r in res]))


def direct_product_integral(cavity: Cavity, scene: Scene, tau: float, grid: OracleGrid,
                            pair: Optional[StationaryPair] = None) -> float:
    """Unfactorised triple sum over (x, y, y~) on the same nodes (coarse grids only)."""
    pair = pair or _cavity_pair(scene, cavity)
    l0 = pair.l0_local
    kappa = tau / math.sqrt(scene.gamma0)
    cap = find_cap(cavity.surface, scene.probe, pair.x0, grid.eps_cap)
    axisym = _is_axisymmetric(scene, cavity)
    u, W = _outer_nodes(cavity.surface, cap, kappa, grid, axisym)
    xs = cavity.surface.from_direction(u)
    total = 0.0
    for x, wx in zip(xs, W):
        nu = cavity.surface.normal(x)
        pts, w = _probe_rule(scene, x, kappa, grid)
        kp = boundary_kernels(cavity.kind, x, nu, pts, 0.0,
                              cavity.lambda1(x) if cavity.is_robin else 0.0, scene.gamma0)
        rho = np.linalg.norm(x - pts, axis=1)
        fw = w * scene.source(pts)
        # full (y, y~) matrix of the unfactorised integrand
        L = rho[:, None] + rho[None, :]
        M = (fw * kp.eta)[:, None] * (fw * kp.eta_t)[None, :] * _shifted_exp(-kappa * (L - 2 * l0))
        total += wx * float(M.sum())
    return total


def reduced_surface_integral(x, nu, cavity: Cavity, scene: Scene, tau: float, l0: float,
                             n: int = 24) -> float:
    """exp(kappa l0) int_{dB} f eta exp(-kappa |x-y|) / A dS, A = n_B . (x-y)/|x-y|.

    The one-dimensional boundary-layer reduction of the ball integral: for
    large kappa, inner_ball_integral ~ S / kappa.
    """
    if not isinstance(scene.probe, Sphere):
        raise ValueError("reduced surface integral implemented for ball probes")
    kappa = tau / math.sqrt(scene.gamma0)
    c, a = scene.probe.center, scene.probe.radius
    x = np.asarray(x, float)
    q = x - c
    dx = float(np.linalg.norm(q))
    ez = q / dx
    helper = np.array([1.0, 0.0, 0.0]) if abs(ez[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    ex = helper - (helper @ ez) * ez
    ex /= np.linalg.norm(ex)
    ey = np.cross(ez, ex)
    t_scale = math.sqrt((dx - a) / (kappa * a * dx))
    th, wt = composite_gauss(panel_breaks(math.pi / 2, min(t_scale, math.pi / 8)), n)
    ph, wp = periodic_rule(16)
    TH, PH = np.meshgrid(th, ph, indexing="ij")
    nb = (np.sin(TH)[..., None] * (np.cos(PH)[..., None] * ex + np.sin(PH)[..., None] * ey)
          + np.cos(TH)[..., None] * ez).reshape(-1, 3)
    y = c + a * nb
    W = (a * a * wt * np.sin(th))[:, None] * wp[None, :]
    d = x - y
    rho = np.linalg.norm(d, axis=1)
    A = np.sum(nb * d, axis=1) / rho
    kp = boundary_kernels(cavity.kind, x, nu, y, 0.0,
                          cavity.lambda1(x) if cavity.is_robin else 0.0, scene.gamma0)
    vals = scene.source(y) * kp.eta * _shifted_exp(-kappa * (rho - l0)) / A
    return float(np.dot(W.ravel(), vals))


def inner_scaling_exponent(cavity: Cavity, scene: Scene, taus=(20.0, 25.0, 30.0, 35.0, 40.0),
                           pair: Optional[StationaryPair] = None,
                           grid: OracleGrid = OracleGrid(level=1)) -> float:
    """Fitted exponent p in I_eta / S_eta ~ tau^p at the stationary point (expected -1)."""
    pair = pair or _cavity_pair(scene, cavity)
    x = pair.x0
    nu = cavity.surface.normal(x)
    r = []
    for t in taus:
        I, _ = inner_ball_integral(x, nu, cavity, scene, t, pair.l0_local, grid)
        S = reduced_surface_integral(x, nu, cavity, scene, t, pair.l0_local)
        r.append(I / S)
    return float(np.polyfit(np.log(taus), np.log(np.abs(r)), 1)[0])


# -- 6D Laplace check -------------------------------------------------------------
def _disc_rule(radius: float, width: float, n: int, n_phi: int):
    rb = panel_breaks(radius, width)
    r, wr = composite_gauss(rb, n)
    ph, wp = periodic_rule(n_phi)
    R, PH = np.meshgrid(r, ph, indexing="ij")
    pts = np.stack([R * np.cos(PH), R * np.sin(PH)], axis=-1).reshape(-1, 2)
    return pts, ((wr * r)[:, None] * wp[None, :]).ravel()


def chart_integral_6d(cavity: Cavity, scene: Scene, pair: StationaryPair, tau: float,
                      chart_radius: float = 0.8, n: int = 12, n_phi: int = 32) -> LogValue:
    """int exp(-tau L(sigma, u, v)) d sigma du dv over graph-chart discs.

    Uses the factorisation int d sigma [int exp(-tau |s(sigma) - b(u)|) du]^2.
    """
    fr = pair.frame
    l0 = pair.l0_local
    R_s = chart_radius * min(1.0 / max(cavity.surface.principal_curvatures(pair.x0)[1], 1e-12),
                             cavity.surface.scale)
    R_u = chart_radius * min(1.0 / max(scene.probe.principal_curvatures(pair.y0)[1], 1e-12),
                             scene.probe.scale)
    width = 1.0 / math.sqrt(tau)
    sig, ws = _disc_rule(R_s, width, n, n_phi)
    uu, wu = _disc_rule(R_u, width, n, n_phi)
    S = np.array([fr.origin + s[0] * fr.e1 + s[1] * fr.e2
                  - graph_height_cavity(cavity.surface, fr, s) * fr.normal for s in sig])
    B = np.array([fr.origin + u[0] * fr.e1 + u[1] * fr.e2
                  + (l0 + graph_height_probe(scene.probe, fr, l0, u)) * fr.normal for u in uu])
    D = np.linalg.norm(S[:, None, :] - B[None, :, :], axis=-1)
    inner = _shifted_exp(-tau * (D - l0)) @ wu
    total = float(np.dot(ws, inner**2))
    return LogValue.from_parts(total, -2.0 * tau * l0)
