"""Scene description: editable geometry plus global solver parameters.

A scene lives in the unit square [0,1]^2. Geometry objects are circles or
axis-aligned rectangles, either plain obstacles or manikins (thermally
active occupants). The scene also carries the solver parameters and the
refinement plan, so one JSON file fully describes a steering setup.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path


class DegenerateGeometry(ValueError):
    """Object with non-positive size."""


class InvalidGeometry(ValueError):
    """Object outside the unit domain or otherwise malformed."""


class UnknownId(KeyError):
    """Edit addressed to an object id not present in the scene."""


BOUNDARY_MODES = ("channel", "periodic", "periodic_x")


@dataclass(frozen=True)
class FluidParams:
    """Lattice-unit solver parameters.

    tau is the BGK relaxation time (must exceed 0.5 for linear stability),
    body_force is an acceleration per unit density, inflow_velocity must stay
    well below the lattice sound speed (|u| < 0.3 enforced here).
    Temperatures are plain degrees Celsius throughout.
    """

    tau: float = 0.8
    body_force: tuple[float, float] = (0.0, 0.0)
    inflow_velocity: tuple[float, float] = (0.05, 0.0)
    ambient_temp: float = 25.0
    thermal_diffusivity: float = 0.05

    def __post_init__(self):
        if not self.tau > 0.5:
            raise ValueError(f"tau must be > 0.5 for stability, got {self.tau}")
        speed = math.hypot(*self.inflow_velocity)
        if not speed < 0.3:
            raise ValueError(f"|inflow_velocity| must be < 0.3, got {speed:.4f}")
        if not self.thermal_diffusivity > 0:
            raise ValueError("thermal_diffusivity must be positive")

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "body_force": list(self.body_force),
            "inflow_velocity": list(self.inflow_velocity),
            "ambient_temp": self.ambient_temp,
            "thermal_diffusivity": self.thermal_diffusivity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FluidParams":
        return cls(
            tau=float(d.get("tau", 0.8)),
            body_force=tuple(d.get("body_force", (0.0, 0.0))),
            inflow_velocity=tuple(d.get("inflow_velocity", (0.05, 0.0))),
            ambient_temp=float(d.get("ambient_temp", 25.0)),
            thermal_diffusivity=float(d.get("thermal_diffusivity", 0.05)),
        )


@dataclass(frozen=True)
class LevelPlan:
    """Budget and shape of the coarse-to-fine response to a steering edit."""

    base_resolution: tuple[int, int] = (48, 48)
    refinement_ratio: int = 2
    max_level: int = 2
    budget_ms: float = 2000.0
    steps_per_check: int = 16
    residual_threshold: float = 1e-6   # per-step velocity change, lattice units
    max_steps_factor: int = 5          # step cap = factor * max(nx, ny) per level
    memory_cap_cells: int = 4_000_000

    def __post_init__(self):
        nx, ny = self.base_resolution
        if nx < 16 or ny < 16:
            raise ValueError("base_resolution must be at least 16x16")
        if self.refinement_ratio < 2:
            raise ValueError("refinement_ratio must be >= 2")
        if self.max_level < 0:
            raise ValueError("max_level must be >= 0")
        if self.steps_per_check < 1:
            raise ValueError("steps_per_check must be >= 1")
        fx, fy = self.resolution_at(self.max_level)
        if fx * fy > self.memory_cap_cells:
            raise ValueError(
                f"finest grid {fx}x{fy} exceeds memory cap of "
                f"{self.memory_cap_cells} cells"
            )

    def resolution_at(self, level: int) -> tuple[int, int]:
        r = self.refinement_ratio ** level
        return self.base_resolution[0] * r, self.base_resolution[1] * r

    def to_dict(self) -> dict:
        return {
            "base_resolution": list(self.base_resolution),
            "refinement_ratio": self.refinement_ratio,
            "max_level": self.max_level,
            "budget_ms": self.budget_ms,
            "steps_per_check": self.steps_per_check,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LevelPlan":
        kw = {}
        if "base_resolution" in d:
            kw["base_resolution"] = tuple(d["base_resolution"])
        for k in ("refinement_ratio", "max_level", "steps_per_check"):
            if k in d:
                kw[k] = int(d[k])
        if "budget_ms" in d:
            kw["budget_ms"] = float(d["budget_ms"])
        return cls(**kw)


@dataclass
class SceneObject:
    """One editable geometry object.

    size is a radius for circles and a (width, height) pair for rects,
    all in unit-domain coordinates.
    """

    id: str
    shape: str                 # "circle" | "rect"
    center: tuple[float, float]
    size: float | tuple[float, float]
    kind: str = "obstacle"     # "obstacle" | "manikin"

    def __post_init__(self):
        if self.shape not in ("circle", "rect"):
            raise InvalidGeometry(f"unknown shape {self.shape!r}")
        if self.kind not in ("obstacle", "manikin"):
            raise InvalidGeometry(f"unknown kind {self.kind!r}")
        if self.shape == "circle":
            if not float(self.size) > 0:
                raise DegenerateGeometry(f"circle {self.id!r} has radius {self.size}")
        else:
            w, h = self.size
            if not (w > 0 and h > 0):
                raise DegenerateGeometry(f"rect {self.id!r} has size {w}x{h}")

    def bbox(self) -> tuple[float, float, float, float]:
        cx, cy = self.center
        if self.shape == "circle":
            r = float(self.size)
            return cx - r, cy - r, cx + r, cy + r
        w, h = self.size
        return cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2

    def contains(self, x: float, y: float) -> bool:
        cx, cy = self.center
        if self.shape == "circle":
            r = float(self.size)
            return (x - cx) ** 2 + (y - cy) ** 2 <= r * r
        w, h = self.size
        return abs(x - cx) <= w / 2 and abs(y - cy) <= h / 2

    def to_dict(self) -> dict:
        size = list(self.size) if self.shape == "rect" else float(self.size)
        return {
            "id": self.id,
            "shape": self.shape,
            "center": list(self.center),
            "size": size,
            "kind": self.kind,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneObject":
        size = d["size"]
        if d["shape"] == "rect":
            size = tuple(size)
        return cls(
            id=str(d["id"]),
            shape=d["shape"],
            center=tuple(d["center"]),
            size=size,
            kind=d.get("kind", "obstacle"),
        )


@dataclass
class Scene:
    """The steering target: geometry objects plus global parameters."""

    objects: list[SceneObject] = field(default_factory=list)
    params: FluidParams = field(default_factory=FluidParams)
    plan: LevelPlan = field(default_factory=LevelPlan)
    boundary: str = "channel"

    def __post_init__(self):
        if self.boundary not in BOUNDARY_MODES:
            raise ValueError(f"boundary must be one of {BOUNDARY_MODES}")

    def validate(self) -> None:
        seen = set()
        for obj in self.objects:
            if obj.id in seen:
                raise InvalidGeometry(f"duplicate object id {obj.id!r}")
            seen.add(obj.id)
            x0, y0, x1, y1 = obj.bbox()
            eps = 1e-9
            if x0 < -eps or y0 < -eps or x1 > 1 + eps or y1 > 1 + eps:
                raise InvalidGeometry(
                    f"object {obj.id!r} extends outside the unit domain"
                )

    def find(self, object_id: str) -> SceneObject:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise UnknownId(object_id)

    def manikins(self) -> list[SceneObject]:
        return sorted(
            (o for o in self.objects if o.kind == "manikin"), key=lambda o: o.id
        )

    def copy(self) -> "Scene":
        return copy.deepcopy(self)

    def to_dict(self) -> dict:
        return {
            "objects": [o.to_dict() for o in self.objects],
            "params": self.params.to_dict(),
            "plan": self.plan.to_dict(),
            "boundary": self.boundary,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        return cls(
            objects=[SceneObject.from_dict(o) for o in d.get("objects", [])],
            params=FluidParams.from_dict(d.get("params", {})),
            plan=LevelPlan.from_dict(d.get("plan", {})),
            boundary=d.get("boundary", "channel"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "Scene":
        scene = cls.from_dict(json.loads(Path(path).read_text()))
        scene.validate()
        return scene

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))
