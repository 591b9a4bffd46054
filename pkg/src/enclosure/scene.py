"""Problem instances: probe region, source, cavities and their boundary data.

Scenes are read from JSON documents with kebab-case keys::

    {
      "gamma0": 1.0,
      "mu1-margin": 0.01,
      "probe": {"type": "ball", "center": [0, 0, 0], "radius": 1.0},
      "source": {"type": "constant", "value": 1.0},
      "cavities": [
        {"id": "d1", "kind": "dirichlet",
         "surface": {"type": "sphere", "center": [0, 0, 4], "radius": 1.0}},
        {"id": "n1", "kind": "neumann-plus", "lambda0": 0.0, "lambda1": 0.25,
         "surface": {"type": "ellipsoid", "center": [0, 0, -5],
                     "semiaxes": [1, 1.5, 2], "rotation": [[1,0,0],[0,1,0],[0,0,1]]}}
      ]
    }

A source or boundary coefficient is either a number or
``{"type": "polynomial", "terms": [{"coef": c, "powers": [i, j, k]}, ...]}``
in absolute coordinates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SceneError
from .geometry import Sphere, Surface, surface_from_dict

KINDS = ("neumann_plus", "neumann_minus", "dirichlet")


@dataclass(frozen=True)
class Polynomial:
    """Sum of coef * x^i y^j z^k; a constant when it has a single (0,0,0) term."""

    terms: tuple[tuple[float, tuple[int, int, int]], ...]

    @classmethod
    def constant(cls, value: float) -> "Polynomial":
        return cls(((float(value), (0, 0, 0)),))

    @property
    def is_constant(self) -> bool:
        return all(p == (0, 0, 0) for _, p in self.terms)

    @property
    def constant_value(self) -> float:
        if not self.is_constant:
            raise ValueError("polynomial is not constant")
        return math.fsum(c for c, _ in self.terms)

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape[:-1])
        for coef, (i, j, k) in self.terms:
            out = out + coef * pts[..., 0] ** i * pts[..., 1] ** j * pts[..., 2] ** k
        return out

    def to_json(self):
        if self.is_constant:
            return self.constant_value
        return {"type": "polynomial",
                "terms": [{"coef": c, "powers": list(p)} for c, p in self.terms]}

    @classmethod
    def from_json(cls, obj) -> "Polynomial":
        if isinstance(obj, (int, float)):
            return cls.constant(obj)
        if isinstance(obj, dict):
            kind = obj.get("type", "polynomial")
            if kind == "constant":
                return cls.constant(obj["value"])
            if kind == "polynomial":
                terms = tuple((float(t["coef"]), tuple(int(p) for p in t["powers"]))
                              for t in obj["terms"])
                if not terms or any(len(p) != 3 or min(p) < 0 for _, p in terms):
                    raise SceneError("polynomial terms need three non-negative powers")
                return cls(terms)
        raise SceneError(f"cannot read field/source {obj!r}")


@dataclass(frozen=True)
class Cavity:
    id: str
    kind: str
    surface: Surface
    lambda0: Polynomial = field(default_factory=lambda: Polynomial.constant(0.0))
    lambda1: Polynomial = field(default_factory=lambda: Polynomial.constant(0.0))

    def __post_init__(self):
        kind = self.kind.replace("-", "_")
        if kind not in KINDS:
            raise SceneError(f"cavity {self.id!r}: unknown kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        for name in ("lambda0", "lambda1"):
            v = getattr(self, name)
            if not isinstance(v, Polynomial):
                object.__setattr__(self, name, Polynomial.from_json(v))

    @property
    def is_robin(self) -> bool:
        return self.kind != "dirichlet"


@dataclass(frozen=True)
class Scene:
    gamma0: float
    probe: Surface
    cavities: tuple[Cavity, ...]
    source: Polynomial = field(default_factory=lambda: Polynomial.constant(1.0))
    mu1_margin: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "cavities", tuple(self.cavities))
        if not isinstance(self.source, Polynomial):
            object.__setattr__(self, "source", Polynomial.from_json(self.source))

    @property
    def probe_is_ball(self) -> bool:
        return isinstance(self.probe, Sphere)

    @property
    def scale(self) -> float:
        """Characteristic length: size of the configuration around the probe."""
        c = self.probe.center
        ext = [self.probe.scale]
        for cav in self.cavities:
            ext.append(float(np.linalg.norm(cav.surface.center - c)) + cav.surface.scale)
        return max(ext)

    def cavity(self, cavity_id: str) -> Cavity:
        for cav in self.cavities:
            if cav.id == cavity_id:
                return cav
        raise KeyError(cavity_id)

    def with_cavities(self, cavities) -> "Scene":
        return Scene(self.gamma0, self.probe, tuple(cavities), self.source, self.mu1_margin)

    # -- serialisation ----------------------------------------------------------
    def to_dict(self) -> dict:
        probe = self.probe.to_dict()
        if probe["type"] == "sphere":
            probe["type"] = "ball"
        return {
            "gamma0": self.gamma0,
            "mu1-margin": self.mu1_margin,
            "probe": probe,
            "source": self.source.to_json(),
            "cavities": [
                {"id": c.id, "kind": c.kind.replace("_", "-"),
                 "surface": c.surface.to_dict(),
                 "lambda0": c.lambda0.to_json(), "lambda1": c.lambda1.to_json()}
                for c in self.cavities
            ],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        try:
            probe_d = dict(d["probe"])
            if probe_d.get("type") not in ("ball", "sphere", "ellipsoid"):
                raise SceneError(f"non-convex or unsupported probe {probe_d.get('type')!r}: "
                                 "B must be convex (ball or ellipsoid)")
            probe = surface_from_dict(probe_d)
            cavities = []
            for c in d["cavities"]:
                cavities.append(Cavity(
                    id=str(c["id"]), kind=c["kind"],
                    surface=surface_from_dict(c["surface"]),
                    lambda0=Polynomial.from_json(c.get("lambda0", 0.0)),
                    lambda1=Polynomial.from_json(c.get("lambda1", 0.0))))
            return cls(gamma0=float(d["gamma0"]), probe=probe, cavities=tuple(cavities),
                       source=Polynomial.from_json(d.get("source", 1.0)),
                       mu1_margin=float(d.get("mu1-margin", 1e-3)))
        except SceneError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneError(f"malformed scene document: {exc}") from exc


def fibonacci_directions(n: int) -> np.ndarray:
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    r = np.sqrt(1.0 - z * z)
    phi = math.pi * (1.0 + math.sqrt(5.0)) * k
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def probe_samples(probe: Surface, n_dir: int = 400, n_shell: int = 6) -> np.ndarray:
    """Points of the closed probe region: nested shells plus the center."""
    u = fibonacci_directions(n_dir)
    shells = [probe.center[None, :]]
    for s in np.linspace(1.0, 0.0, n_shell, endpoint=False):
        shells.append(probe.center + s * (u @ probe._A.T))
    return np.concatenate(shells)


def validate(scene: Scene, n_samples: int = 800) -> Scene:
    """Check the modelling assumptions; raise SceneError listing every violation."""
    # local import: stationary depends on this module for its types
    from .stationary import surface_distance

    problems = []
    if not scene.gamma0 > 0:
        problems.append("gamma0 must be positive")
    if not scene.mu1_margin > 0:
        problems.append("mu1 margin must be positive")
    if not scene.cavities:
        problems.append("scene has no cavities")
    ids = [c.id for c in scene.cavities]
    if len(set(ids)) != len(ids):
        problems.append("cavity ids are not unique")

    root_g = math.sqrt(scene.gamma0) if scene.gamma0 > 0 else float("nan")
    dirs = fibonacci_directions(n_samples)
    for cav in scene.cavities:
        pts = cav.surface.from_direction(dirs)
        if cav.is_robin:
            lam1 = cav.lambda1(pts)
            if lam1.min() < 0:
                problems.append(f"cavity {cav.id}: dissipativity violated (lambda1 < 0)")
            if cav.kind == "neumann_plus" and not lam1.max() < root_g - scene.mu1_margin:
                problems.append(f"cavity {cav.id}: lambda1 margin (n+) violated: "
                                f"need sup lambda1 < sqrt(gamma0) - mu1")
            if cav.kind == "neumann_minus" and not lam1.min() > root_g + scene.mu1_margin:
                problems.append(f"cavity {cav.id}: lambda1 margin (n-) violated: "
                                f"need inf lambda1 > sqrt(gamma0) + mu1")
        if cav.surface.contains(scene.probe.center) or scene.probe.contains(cav.surface.center):
            problems.append(f"cavity {cav.id}: disjointness violated (nested with probe)")
        elif surface_distance(cav.surface, scene.probe) <= 1e-9 * scene.scale:
            problems.append(f"cavity {cav.id}: disjointness violated (touches probe)")

    for i, a in enumerate(scene.cavities):
        for b in scene.cavities[i + 1:]:
            nested = a.surface.contains(b.surface.center) or b.surface.contains(a.surface.center)
            if nested or surface_distance(a.surface, b.surface) <= 1e-9 * scene.scale:
                problems.append(f"cavities {a.id}, {b.id}: disjointness violated")

    fv = scene.source(probe_samples(scene.probe))
    if not (np.all(fv > 0) or np.all(fv < 0)):
        problems.append("emission condition violated: f changes sign or vanishes on the probe")

    if problems:
        raise SceneError("; ".join(problems))
    return scene


def load_scene(path) -> Scene:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SceneError(f"scene file is not valid JSON: {exc}") from exc
    return validate(Scene.from_dict(doc))


def cfg1(kind: str = "dirichlet", lambda1: float = 0.0, lambda0: float = 0.0,
         gamma0: float = 1.0) -> Scene:
    """Reference layout: unit probe ball at the origin, unit sphere cavity at (0, 0, 4)."""
    cav = Cavity("c1", kind, Sphere([0.0, 0.0, 4.0], 1.0),
                 Polynomial.constant(lambda0), Polynomial.constant(lambda1))
    return Scene(gamma0, Sphere([0.0, 0.0, 0.0], 1.0), (cav,))
