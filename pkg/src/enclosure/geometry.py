"""Closed quadric surfaces (spheres, ellipsoids) and local graph charts.

Normals always point out of the enclosed solid, so a convex body has
positive principal curvatures and a positive definite second fundamental
form.  Points are plain ``(3,)`` float arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FD_RELATIVE_STEP = 1e-2


def _as_vec(v) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite vector {v!r}")
    return a


@dataclass(frozen=True, eq=False)
class Surface:
    """Boundary of the solid ``{p : (p-c)^T M (p-c) <= 1}`` with ``M = A^{-T} A^{-1}``.

    ``A = rotation @ diag(semiaxes)`` maps the unit sphere onto the surface.
    Subclasses only fix how the parameters are given.
    """

    center: np.ndarray
    semiaxes: np.ndarray
    rotation: np.ndarray
    _A: np.ndarray = field(init=False, repr=False)
    _Ainv: np.ndarray = field(init=False, repr=False)
    _M: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = _as_vec(self.center)
        s = _as_vec(self.semiaxes)
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        if np.any(s <= 0):
            raise ValueError("semiaxes must be positive")
        if np.linalg.norm(R.T @ R - np.eye(3)) > 1e-12:
            raise ValueError("rotation is not orthonormal")
        A = R * s  # R @ diag(s)
        Ainv = (R / s).T  # diag(1/s) @ R^T
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "semiaxes", s)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "_A", A)
        object.__setattr__(self, "_Ainv", Ainv)
        object.__setattr__(self, "_M", Ainv.T @ Ainv)

    # -- basic quadric algebra -------------------------------------------------
    @property
    def scale(self) -> float:
        return float(self.semiaxes.max())

    def implicit(self, p) -> np.ndarray:
        """(p-c)^T M (p-c) - 1; vectorised over leading axes."""
        q = np.asarray(p, dtype=float) - self.center
        return np.einsum("...i,ij,...j->...", q, self._M, q) - 1.0

    def contains(self, p) -> np.ndarray:
        return self.implicit(p) <= 0.0

    def from_direction(self, w) -> np.ndarray:
        """Surface point c + A w/|w| for any non-zero w (vectorised)."""
        w = np.asarray(w, dtype=float)
        u = w / np.linalg.norm(w, axis=-1, keepdims=True)
        return self.center + u @ self._A.T

    def to_direction(self, p) -> np.ndarray:
        """Unit preimage of a surface point under the map above."""
        u = (np.asarray(p, dtype=float) - self.center) @ self._Ainv.T
        return u / np.linalg.norm(u, axis=-1, keepdims=True)

    def direction_jacobian(self, w) -> np.ndarray:
        """d from_direction / dw at a single w, shape (3, 3)."""
        w = _as_vec(w)
        r = np.linalg.norm(w)
        u = w / r
        return self._A @ (np.eye(3) - np.outer(u, u)) / r

    def area_element(self, u) -> np.ndarray:
        """dS/dOmega for the map of unit vectors u onto the surface."""
        g = np.asarray(u, dtype=float) @ self._Ainv  # rows: A^{-T} u
        return abs(np.linalg.det(self._A)) * np.linalg.norm(g, axis=-1)

    def gradient(self, p) -> np.ndarray:
        q = np.asarray(p, dtype=float) - self.center
        return 2.0 * q @ self._M  # M symmetric

    def normal(self, p) -> np.ndarray:
        g = self.gradient(p)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def second_fundamental_form(self, p, e1, e2) -> np.ndarray:
        """II(e_i, e_j) w.r.t. the outward normal, in the tangent basis (e1, e2).

        For F = (p-c)^T M (p-c) - 1 this is e_i^T Hess(F) e_j / |grad F|.
        """
        p = _as_vec(p)
        E = np.stack([_as_vec(e1), _as_vec(e2)])
        g = np.linalg.norm(self.gradient(p))
        S = 2.0 * E @ self._M @ E.T / g
        return 0.5 * (S + S.T)

    def line_intersections(self, p, d) -> np.ndarray:
        """Parameters t (ascending) with p + t d on the surface; empty if none."""
        q = _as_vec(p) - self.center
        d = _as_vec(d)
        Md = self._M @ d
        a = d @ Md
        b = 2.0 * q @ Md
        c = q @ self._M @ q - 1.0
        disc = b * b - 4.0 * a * c
        if disc < 0:
            return np.empty(0)
        sq = math.sqrt(disc)
        # cancellation-free pair of roots
        qq = -0.5 * (b + math.copysign(sq, b))
        if qq == 0.0:
            return np.zeros(1)
        return np.sort(np.array([qq / a, c / qq]))

    # -- spherical-angle chart -------------------------------------------------
    def point_and_normal(self, params) -> tuple[np.ndarray, np.ndarray]:
        """Point and outward unit normal at chart angles (theta, phi).

        theta in [0, pi] is measured from the body's third axis, phi in
        [-2*pi, 2*pi] around it.
        """
        theta, phi = (float(v) for v in params)
        if not (0.0 <= theta <= math.pi) or not (-2 * math.pi <= phi <= 2 * math.pi):
            raise ValueError(f"chart parameters {params!r} outside [0,pi]x[-2pi,2pi]")
        u = np.array([math.sin(theta) * math.cos(phi),
                      math.sin(theta) * math.sin(phi),
                      math.cos(theta)])
        p = self.center + self._A @ u
        return p, self.normal(p)

    def principal_curvatures(self, p) -> tuple[float, float]:
        """Principal curvatures (k1 <= k2) at a surface point."""
        n = self.normal(p)
        e1, e2 = tangent_basis(n)
        k = np.linalg.eigvalsh(self.second_fundamental_form(p, e1, e2))
        return float(k[0]), float(k[1])

    def curvatures_at_params(self, params) -> tuple[float, float]:
        p, _ = self.point_and_normal(params)
        return self.principal_curvatures(p)

    def to_dict(self) -> dict:
        raise NotImplementedError


class Sphere(Surface):
    def __init__(self, center, radius: float):
        radius = float(radius)
        if not radius > 0:
            raise ValueError("radius must be positive")
        super().__init__(center, np.full(3, radius), np.eye(3))

    @property
    def radius(self) -> float:
        return float(self.semiaxes[0])

    def principal_curvatures(self, p) -> tuple[float, float]:
        k = 1.0 / self.radius
        return k, k

    def second_fundamental_form(self, p, e1, e2) -> np.ndarray:
        E = np.stack([_as_vec(e1), _as_vec(e2)])
        return (E @ E.T) / self.radius

    def to_dict(self) -> dict:
        return {"type": "sphere", "center": self.center.tolist(), "radius": self.radius}

    def __repr__(self):
        return f"Sphere(center={self.center.tolist()}, radius={self.radius})"


class Ellipsoid(Surface):
    def __init__(self, center, semiaxes, rotation=None):
        super().__init__(center, semiaxes, np.eye(3) if rotation is None else rotation)

    def to_dict(self) -> dict:
        return {"type": "ellipsoid", "center": self.center.tolist(),
                "semiaxes": self.semiaxes.tolist(), "rotation": self.rotation.tolist()}

    def __repr__(self):
        return f"Ellipsoid(center={self.center.tolist()}, semiaxes={self.semiaxes.tolist()})"


def surface_from_dict(d: dict) -> Surface:
    kind = d.get("type")
    if kind in ("sphere", "ball"):
        return Sphere(d["center"], d["radius"])
    if kind == "ellipsoid":
        return Ellipsoid(d["center"], d["semiaxes"], d.get("rotation"))
    raise ValueError(f"unknown surface type {kind!r}")


def tangent_basis(n) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal e1, e2 with (e1, e2, n) right-handed."""
    n = _as_vec(n)
    n = n / np.linalg.norm(n)
    helper = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = helper - (helper @ n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2


@dataclass(frozen=True, eq=False)
class Frame:
    origin: np.ndarray
    normal: np.ndarray
    e1: np.ndarray
    e2: np.ndarray

    def __post_init__(self):
        B = np.stack([self.e1, self.e2, self.normal])
        if np.linalg.norm(B @ B.T - np.eye(3)) > 1e-10:
            raise ValueError("frame is not orthonormal")
        if np.linalg.det(B) < 0:
            raise ValueError("frame is not right-handed")

    @classmethod
    def from_pair(cls, x0, y0) -> "Frame":
        x0, y0 = _as_vec(x0), _as_vec(y0)
        nu = (y0 - x0) / np.linalg.norm(y0 - x0)
        e1, e2 = tangent_basis(nu)
        return cls(x0, nu, e1, e2)


def _check_alignment(frame: Frame, x0, y0) -> float:
    d = np.asarray(y0, float) - np.asarray(x0, float)
    l0 = float(np.linalg.norm(d))
    if frame.normal @ d / l0 < 1.0 - 1e-8:
        raise ValueError("frame normal is not aligned with y0 - x0")
    return l0


def graph_height_cavity(surface: Surface, frame: Frame, sigma) -> float:
    """g(sigma) with x0 + s1 e1 + s2 e2 - g nu on the cavity surface."""
    base = frame.origin + sigma[0] * frame.e1 + sigma[1] * frame.e2
    t = surface.line_intersections(base, -frame.normal)
    if t.size == 0:
        raise ValueError("graph chart left the cavity surface")
    return float(t[np.argmin(np.abs(t))])


def graph_height_probe(surface: Surface, frame: Frame, l0: float, u) -> float:
    """h(u) with x0 + u1 e1 + u2 e2 + (l0 + h) nu on the probe surface."""
    base = frame.origin + u[0] * frame.e1 + u[1] * frame.e2
    t = surface.line_intersections(base, frame.normal)
    if t.size == 0:
        raise ValueError("graph chart left the probe surface")
    return float(t[np.argmin(np.abs(t - l0))] - l0)


def fd_hessian(func, n: int, step: float, richardson: bool = True) -> np.ndarray:
    """Central-difference Hessian of func: R^n -> R at the origin.

    One Richardson level combines steps h and h/2 (error O(h^4)).
    """

    def central(h):
        f0 = func(np.zeros(n))
        Hm = np.empty((n, n))
        E = np.eye(n) * h
        for i in range(n):
            Hm[i, i] = (func(E[i]) - 2.0 * f0 + func(-E[i])) / h**2
            for j in range(i + 1, n):
                v = (func(E[i] + E[j]) - func(E[i] - E[j])
                     - func(-E[i] + E[j]) + func(-E[i] - E[j])) / (4.0 * h * h)
                Hm[i, j] = Hm[j, i] = v
        return Hm

    Hh = central(step)
    if not richardson:
        return Hh
    Hh2 = central(0.5 * step)
    return (4.0 * Hh2 - Hh) / 3.0


def graph_matrices(cavity: Surface, probe: Surface, pair, frame: Frame,
                   method: str = "exact") -> tuple[np.ndarray, np.ndarray]:
    """Hessians G of g and H of h at the origin of the paired graph charts.

    ``method="exact"`` reads them off the quadric's second fundamental form;
    ``method="fd"`` differentiates the chart heights numerically.
    """
    x0, y0 = pair
    l0 = _check_alignment(frame, x0, y0)
    if method == "exact":
        G = cavity.second_fundamental_form(x0, frame.e1, frame.e2)
        # nu points into the probe, i.e. against the probe's outward normal
        H = probe.second_fundamental_form(y0, frame.e1, frame.e2)
        return G, H
    if method != "fd":
        raise ValueError(f"unknown method {method!r}")
    kg = 1.0 / max(np.abs(cavity.principal_curvatures(x0)).max(), 1e-12)
    kh = 1.0 / max(np.abs(probe.principal_curvatures(y0)).max(), 1e-12)
    G = fd_hessian(lambda s: graph_height_cavity(cavity, frame, s), 2,
                   FD_RELATIVE_STEP * min(kg, cavity.scale))
    H = fd_hessian(lambda u: graph_height_probe(probe, frame, l0, u), 2,
                   FD_RELATIVE_STEP * min(kh, probe.scale))
    return 0.5 * (G + G.T), 0.5 * (H + H.T)
