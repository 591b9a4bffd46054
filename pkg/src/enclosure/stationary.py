"""Minimizers of L0(x, y) = |x - y| over cavity boundary x probe boundary.

Global search runs a batched gradient descent from a low-discrepancy set of
starts in the homogeneous direction chart ``x = c + A w/|w|`` (no poles),
then every distinct end point is polished by Newton steps in the graph
charts of the pair, where the exact second derivatives are available in
closed form.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .errors import ConvergenceError, DegenerateError
from .geometry import Frame, Surface, graph_height_cavity, graph_height_probe, fd_hessian, \
    graph_matrices, tangent_basis
from .scene import Cavity, Scene

log = logging.getLogger(__name__)

N_STARTS = 32
DEDUP_TOL = 1e-6       # relative to scene scale
MERGE_TOL = 1e-9       # relative to scene scale
EQUAL_TOL = 1e-7       # |l0+ - l0-| below this (relative) counts as a tie
GRAD_TOL = 1e-10       # relative to scene scale


@dataclass
class StationaryPair:
    cavity_id: str
    kind: str
    x0: np.ndarray
    y0: np.ndarray
    frame: Frame
    G: np.ndarray
    H: np.ndarray
    l0_local: float
    hess_L0: np.ndarray
    hess_L: np.ndarray
    min_eig_L0: float
    grad_norm: float = 0.0
    amplitude: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "cavity_id": self.cavity_id, "kind": self.kind,
            "x0": self.x0.tolist(), "y0": self.y0.tolist(),
            "nu": self.frame.normal.tolist(), "l0_local": self.l0_local,
            "G": self.G.tolist(), "H": self.H.tolist(),
            "min_eig_L0": self.min_eig_L0, "grad_norm": self.grad_norm,
            "amplitude": self.amplitude,
        }


@dataclass(frozen=True)
class ShortestLengths:
    l0: float
    l0_plus: Optional[float]
    l0_minus: Optional[float]
    l1: float
    equal: bool = False

    def to_dict(self) -> dict:
        return {"l0": self.l0, "l0_plus": self.l0_plus, "l0_minus": self.l0_minus,
                "l1": self.l1, "equal": self.equal}


@dataclass(frozen=True)
class NondegeneracyReport:
    passed: bool
    min_eig: float
    min_eig_triple: float
    tol_eig: float
    extra: dict = field(default_factory=dict)


# -- local minimisation of |x - y| ---------------------------------------------
def _sphere_point(u1: float, u2: float) -> np.ndarray:
    z = 1.0 - 2.0 * u1
    r = math.sqrt(max(0.0, 1.0 - z * z))
    phi = 2.0 * math.pi * u2
    return np.array([r * math.cos(phi), r * math.sin(phi), z])


def _starts(s1: Surface, s2: Surface, n_starts: int, seed: int) -> list[np.ndarray]:
    """Centre-line start first, then Sobol points on S^2 x S^2."""
    d = s2.center - s1.center
    starts = []
    if np.any(d):
        # chart directions of the points facing the other centre
        starts.append(np.concatenate([d @ s1._Ainv.T, -d @ s2._Ainv.T]))
    sob = qmc.Sobol(d=4, scramble=True, seed=seed).random(n_starts)
    for row in sob[: n_starts - len(starts)]:
        starts.append(np.concatenate([_sphere_point(row[0], row[1]),
                                      _sphere_point(row[2], row[3])]))
    return starts


def _bfgs(s1: Surface, s2: Surface, w: np.ndarray):
    A1, A2, c1, c2 = s1._A, s2._A, s1.center, s2.center

    def fun(w):
        w1, w2 = w[:3], w[3:]
        r1 = math.sqrt(w1 @ w1)
        r2 = math.sqrt(w2 @ w2)
        u1, u2 = w1 / r1, w2 / r2
        d = (c1 + A1 @ u1) - (c2 + A2 @ u2)
        r = math.sqrt(d @ d)
        # J^T om with J = A (I - u u^T) / |w|
        v1 = A1.T @ d / r
        v2 = A2.T @ d / r
        g = np.concatenate([(v1 - u1 * (u1 @ v1)) / r1, -(v2 - u2 * (u2 @ v2)) / r2])
        return r, g

    res = minimize(fun, w, jac=True, method="BFGS", options={"gtol": 1e-7, "maxiter": 300})
    return s1.from_direction(res.x[:3]), s2.from_direction(res.x[3:])


def _descend_batch(s1: Surface, s2: Surface, W: np.ndarray, n_iter: int = 400,
                   gtol: float = 1e-6) -> np.ndarray:
    """Gradient descent on all starts at once in the unit-direction charts.

    Each start keeps its own step length: grown after an accepted step,
    halved (and the step undone) when the distance went up.
    """
    A1, A2, c1, c2 = s1._A, s2._A, s1.center, s2.center
    U1 = W[:, :3] / np.linalg.norm(W[:, :3], axis=1, keepdims=True)
    U2 = W[:, 3:] / np.linalg.norm(W[:, 3:], axis=1, keepdims=True)

    def evaluate(U1, U2):
        d = (c1 + U1 @ A1.T) - (c2 + U2 @ A2.T)
        r = np.linalg.norm(d, axis=1)
        om = d / r[:, None]
        v1 = om @ A1
        v2 = -(om @ A2)
        g1 = v1 - U1 * np.sum(U1 * v1, axis=1, keepdims=True)
        g2 = v2 - U2 * np.sum(U2 * v2, axis=1, keepdims=True)
        return r, g1, g2

    step = np.full(len(W), 0.1 / max(s1.scale, s2.scale))
    r, g1, g2 = evaluate(U1, U2)
    for _ in range(n_iter):
        gn = np.sqrt(np.sum(g1 * g1, axis=1) + np.sum(g2 * g2, axis=1))
        if np.all(gn < gtol):
            break
        T1 = U1 - step[:, None] * g1
        T2 = U2 - step[:, None] * g2
        T1 /= np.linalg.norm(T1, axis=1, keepdims=True)
        T2 /= np.linalg.norm(T2, axis=1, keepdims=True)
        rt, h1, h2 = evaluate(T1, T2)
        ok = rt <= r
        U1 = np.where(ok[:, None], T1, U1)
        U2 = np.where(ok[:, None], T2, U2)
        r = np.where(ok, rt, r)
        g1 = np.where(ok[:, None], h1, g1)
        g2 = np.where(ok[:, None], h2, g2)
        step = np.where(ok, 1.2 * step, 0.5 * step)
    return np.hstack([U1, U2])


def _retract(surface: Surface, base: np.ndarray, n: np.ndarray) -> np.ndarray:
    t = surface.line_intersections(base, n)
    if t.size == 0:
        raise ConvergenceError("Newton step left the surface")
    return base + t[np.argmin(np.abs(t))] * n


def newton_polish(s1: Surface, s2: Surface, x, y, max_iter: int = 30):
    """Newton iteration on the graph charts of (s1 at x, s2 at y).

    Returns (x, y, gradient norm).  The step uses the exact chart Hessian
    of |x(sigma) - y(u)|, assembled from the two second fundamental forms.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    scale = max(s1.scale, s2.scale)
    gnorm = math.inf
    for _ in range(max_iter):
        d = x - y
        rho = float(np.linalg.norm(d))
        om = d / rho
        nx, ny = s1.normal(x), s2.normal(y)
        E = np.stack(tangent_basis(nx))
        F = np.stack(tangent_basis(ny))
        grad = np.concatenate([E @ om, -(F @ om)])
        gnorm = float(np.linalg.norm(grad))
        if gnorm < 1e-15:
            break
        P = np.eye(3) - np.outer(om, om)
        Gx = s1.second_fundamental_form(x, E[0], E[1])
        Hy = s2.second_fundamental_form(y, F[0], F[1])
        hess = np.empty((4, 4))
        hess[:2, :2] = E @ P @ E.T / rho - (om @ nx) * Gx
        hess[2:, 2:] = F @ P @ F.T / rho + (om @ ny) * Hy
        hess[:2, 2:] = -E @ P @ F.T / rho
        hess[2:, :2] = hess[:2, 2:].T
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = -grad * rho
        if np.linalg.eigvalsh(hess)[0] <= 0:
            step = -grad * rho  # not in a convex basin: fall back to a gradient step
        cap = 0.1 * scale
        sn = float(np.linalg.norm(step))
        if sn > cap:
            step *= cap / sn
        x = _retract(s1, x + step[:2] @ E, -nx)
        y = _retract(s2, y + step[2:] @ F, -ny)
        if sn < 1e-16 * scale:
            break
    # final gradient at the returned point
    d = x - y
    om = d / np.linalg.norm(d)
    E = np.stack(tangent_basis(s1.normal(x)))
    F = np.stack(tangent_basis(s2.normal(y)))
    gnorm = float(np.linalg.norm(np.concatenate([E @ om, -(F @ om)])))
    return x, y, gnorm


def local_minima(s1: Surface, s2: Surface, n_starts: int = N_STARTS, seed: int = 0,
                 scale: Optional[float] = None) -> list[tuple[np.ndarray, np.ndarray, float]]:
    """Distinct local minima (x, y, |x - y|) of the distance between two surfaces."""
    scale = scale or max(s1.scale, s2.scale)
    found: list[tuple[np.ndarray, np.ndarray, float]] = []
    ends = _descend_batch(s1, s2, np.array(_starts(s1, s2, n_starts, seed)))
    # starts that drained into the same basin are polished once
    distinct: list[np.ndarray] = []
    for w in ends:
        if not any(np.linalg.norm(w - v) < 1e-3 for v in distinct):
            distinct.append(w)
    for w in distinct:
        try:
            x, y, g = newton_polish(s1, s2, s1.from_direction(w[:3]), s2.from_direction(w[3:]))
        except (ConvergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
            log.info("start discarded: %s", exc)
            continue
        if g > GRAD_TOL:
            log.info("start discarded: gradient %.3g after polish", g)
            continue
        if any(np.linalg.norm(x - fx) + np.linalg.norm(y - fy) < DEDUP_TOL * scale
               for fx, fy, _ in found):
            continue
        found.append((x, y, float(np.linalg.norm(x - y))))
    # deterministic order: by value, then lexicographically by x
    found.sort(key=lambda t: (round(t[2] / (MERGE_TOL * scale)), tuple(np.round(t[0], 9))))
    return found


def surface_distance(s1: Surface, s2: Surface, n_starts: int = 8) -> float:
    """Minimum distance between two surfaces (0 if they cross)."""
    best = math.inf
    for w in _starts(s1, s2, n_starts, seed=1):
        x, y = _bfgs(s1, s2, w)
        best = min(best, float(np.linalg.norm(x - y)))
    return best


# -- Hessians ------------------------------------------------------------------
def hess_L0_blocks(G, H, l0: float) -> np.ndarray:
    I = np.eye(2)
    Sg = I + l0 * np.asarray(G)
    Sh = I + l0 * np.asarray(H)
    return np.block([[Sg, -I], [-I, Sh]]) / l0


def hess_triple_blocks(G, H, l0: float) -> np.ndarray:
    I = np.eye(2)
    Z = np.zeros((2, 2))
    Sg = I + l0 * np.asarray(G)
    Sh = I + l0 * np.asarray(H)
    return np.block([[2 * Sg, -I, -I], [-I, Sh, Z], [-I, Z, Sh]]) / l0


def hessian_triple(pair: StationaryPair) -> np.ndarray:
    """6x6 Hessian of |s - b(u)| + |s - b(v)| at the stationary pair."""
    return hess_triple_blocks(pair.G, pair.H, pair.l0_local)


def factorization_matrix() -> np.ndarray:
    I = np.eye(2)
    Z = np.zeros((2, 2))
    return np.block([[I, Z, Z], [Z, I / 2, I / 2], [Z, I / 2, -I / 2]])


def factorization_residual(pair: StationaryPair) -> float:
    """|| Hess(L) - (2/l0) P^T diag(l0 Hess(L0), S_h) P || in the max norm."""
    l0 = pair.l0_local
    P = factorization_matrix()
    Sh = np.eye(2) + l0 * pair.H
    D = np.zeros((6, 6))
    D[:4, :4] = l0 * pair.hess_L0
    D[4:, 4:] = Sh
    return float(np.abs(pair.hess_L - (2.0 / l0) * P.T @ D @ P).max())


def chart_length(cavity: Surface, probe: Surface, pair: StationaryPair):
    """L(sigma, u, v) = |s(sigma) - b(u)| + |s(sigma) - b(v)| in the pair's graph charts."""
    fr = pair.frame
    l0 = pair.l0_local

    def s(sig):
        return fr.origin + sig[0] * fr.e1 + sig[1] * fr.e2 \
            - graph_height_cavity(cavity, fr, sig) * fr.normal

    def b(u):
        return fr.origin + u[0] * fr.e1 + u[1] * fr.e2 \
            + (l0 + graph_height_probe(probe, fr, l0, u)) * fr.normal

    def L(z):
        x = s(z[:2])
        return float(np.linalg.norm(x - b(z[2:4])) + np.linalg.norm(x - b(z[4:6])))

    return L


def fd_hessian_triple(cavity: Surface, probe: Surface, pair: StationaryPair,
                      rel_step: float = 1e-2) -> np.ndarray:
    L = chart_length(cavity, probe, pair)
    radius = min(pair.l0_local, cavity.scale, probe.scale)
    for k in (*cavity.principal_curvatures(pair.x0), *probe.principal_curvatures(pair.y0)):
        radius = min(radius, 1.0 / max(abs(k), 1e-12))
    Hm = fd_hessian(L, 6, rel_step * radius)
    return 0.5 * (Hm + Hm.T)


def default_tol_eig(l0: float) -> float:
    return 1e-8 / l0


def check_nondegenerate(pair: StationaryPair, tol_eig: Optional[float] = None,
                        probe_convex: bool = True) -> NondegeneracyReport:
    """Pass iff the smallest eigenvalue of Hess(L0) is at least ``tol_eig``.

    For convex probes the 6x6 test must give the same verdict; a mismatch
    means the Hessians are inconsistent and is raised.
    """
    tol = default_tol_eig(pair.l0_local) if tol_eig is None else tol_eig
    me = float(np.linalg.eigvalsh(pair.hess_L0)[0])
    me3 = float(np.linalg.eigvalsh(pair.hess_L)[0])
    passed = me >= tol
    if probe_convex and passed != (me3 >= tol):
        # near the threshold the two smallest eigenvalues differ by O(1) factors
        if not (abs(me) < 1e3 * tol and abs(me3) < 1e3 * tol):
            raise DegenerateError(
                f"Hessian tests disagree: min eig L0 {me:.3g}, triple {me3:.3g}")
    return NondegeneracyReport(passed, me, me3, tol)


# -- assembly --------------------------------------------------------------------
def make_pair(cavity: Cavity, probe: Surface, x0, y0, grad_norm: float = 0.0) -> StationaryPair:
    x0 = np.asarray(x0, float)
    y0 = np.asarray(y0, float)
    frame = Frame.from_pair(x0, y0)
    l0 = float(np.linalg.norm(y0 - x0))
    G, H = graph_matrices(cavity.surface, probe, (x0, y0), frame)
    hL0 = hess_L0_blocks(G, H, l0)
    return StationaryPair(
        cavity_id=cavity.id, kind=cavity.kind, x0=x0, y0=y0, frame=frame, G=G, H=H,
        l0_local=l0, hess_L0=hL0, hess_L=hess_triple_blocks(G, H, l0),
        min_eig_L0=float(np.linalg.eigvalsh(hL0)[0]), grad_norm=grad_norm)


def cavity_minima(scene: Scene, cavity: Cavity, n_starts: int = N_STARTS, seed: int = 0):
    return local_minima(cavity.surface, scene.probe, n_starts, seed, scene.scale)


def find_pairs(scene: Scene, n_starts: int = N_STARTS, seed: int = 0) -> list[StationaryPair]:
    """All stationary pairs attaining the global minimum l0 (within merge tolerance)."""
    scale = scene.scale
    per_cavity = {c.id: cavity_minima(scene, c, n_starts, seed) for c in scene.cavities}
    values = [m[2] for ms in per_cavity.values() for m in ms]
    if not values:
        raise ConvergenceError("no stationary pair found: geometry inconsistent")
    l0 = min(values)
    pairs = []
    for cav in scene.cavities:
        for x, y, val in per_cavity[cav.id]:
            if val <= l0 + MERGE_TOL * scale:
                pairs.append(make_pair(cav, scene.probe, x, y, _grad_norm(cav.surface,
                                                                           scene.probe, x, y)))
    return pairs


def _grad_norm(s1: Surface, s2: Surface, x, y) -> float:
    om = (x - y) / np.linalg.norm(x - y)
    E = np.stack(tangent_basis(s1.normal(x)))
    F = np.stack(tangent_basis(s2.normal(y)))
    return float(np.linalg.norm(np.concatenate([E @ om, -(F @ om)])))


def _l1_cavity(cav_surface: Surface, probe: Surface, x, y) -> tuple[float, np.ndarray]:
    """min over x on the cavity, y, y~ in the closed probe of |x-y| + |x-y~|.

    Independent of the two-point search: SLSQP with the probe's implicit
    inequality as constraint, started near the supplied guess.
    """
    z0 = np.concatenate([cav_surface.to_direction(x) * 1.0, y, y])

    def fun(z):
        xx = cav_surface.from_direction(z[:3])
        d1 = xx - z[3:6]
        d2 = xx - z[6:9]
        r1, r2 = np.linalg.norm(d1), np.linalg.norm(d2)
        J = cav_surface.direction_jacobian(z[:3])
        g = np.concatenate([J.T @ (d1 / r1 + d2 / r2), -d1 / r1, -d2 / r2])
        return r1 + r2, g

    cons = [{"type": "ineq", "fun": lambda z: -probe.implicit(z[3:6]),
             "jac": lambda z: np.concatenate([np.zeros(3), -probe.gradient(z[3:6]), np.zeros(3)])},
            {"type": "ineq", "fun": lambda z: -probe.implicit(z[6:9]),
             "jac": lambda z: np.concatenate([np.zeros(6), -probe.gradient(z[6:9])])}]
    res = minimize(fun, z0, jac=True, method="SLSQP", constraints=cons,
                   options={"ftol": 1e-16, "maxiter": 500})
    return float(res.fun), res.x


def shortest_lengths(pairs: list[StationaryPair], scene: Scene,
                     n_starts: int = 8) -> ShortestLengths:
    """l0, l0+ (neumann_plus), l0- (neumann_minus and dirichlet) and l1."""
    if not pairs:
        raise ValueError("need at least one stationary pair")
    scale = scene.scale
    dist = {}
    for cav in scene.cavities:
        ms = cavity_minima(scene, cav, n_starts)
        if ms:
            dist[cav.id] = min(m[2] for m in ms)
    plus = [d for cid, d in dist.items() if scene.cavity(cid).kind == "neumann_plus"]
    minus = [d for cid, d in dist.items() if scene.cavity(cid).kind != "neumann_plus"]
    l0p = min(plus) if plus else None
    l0m = min(minus) if minus else None
    l0 = min(v for v in (l0p, l0m) if v is not None)

    # l1 from a fresh constrained search, started off the known minimisers
    rng = np.random.default_rng(0)
    l1 = math.inf
    for cav in scene.cavities:
        for x, y, _ in cavity_minima(scene, cav, n_starts)[:2]:
            jitter = 0.05 * scene.probe.scale * rng.standard_normal(3)
            ystart = scene.probe.center + 0.9 * (y + jitter - scene.probe.center)
            val, _ = _l1_cavity(cav.surface, scene.probe, x + jitter, ystart)
            l1 = min(l1, val)
    equal = l0p is not None and l0m is not None and abs(l0p - l0m) <= EQUAL_TOL * scale
    return ShortestLengths(l0, l0p, l0m, l1, equal)


def l1_minimizer(scene: Scene, cavity: Cavity, x, y):
    """(value, x, y, y~) of the three-point problem, for diagnostics."""
    val, z = _l1_cavity(cavity.surface, scene.probe, x, y)
    return val, cavity.surface.from_direction(z[:3]), z[3:6], z[6:9]
