"""Scene description: analytic primitives, pinhole camera, environment light.

Scene files are INI-style key/value documents with sections ``[camera]``,
``[materials.<name>]``, ``[objects.<name>]`` and ``[environment]``.  Vectors
are whitespace- or comma-separated triples.  See tests/data or README for a
complete example.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field

import numpy as np

from ..errors import SceneParseError, ValidationError
from .material import Material
from .vecmath import normalize


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float
    material: str

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64)
        if c.shape != (3,) or not np.all(np.isfinite(c)):
            raise ValidationError(f"sphere center must be a finite 3-vector, got {self.center}")
        r = float(self.radius)
        if not np.isfinite(r) or r <= 0.0:
            raise ValidationError(f"sphere radius must be positive, got {r}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", r)


@dataclass(frozen=True)
class Plane:
    point: np.ndarray
    normal: np.ndarray
    material: str

    def __post_init__(self):
        p = np.asarray(self.point, dtype=np.float64)
        n = np.asarray(self.normal, dtype=np.float64)
        if p.shape != (3,) or not np.all(np.isfinite(p)):
            raise ValidationError(f"plane point must be a finite 3-vector, got {self.point}")
        if n.shape != (3,) or not np.all(np.isfinite(n)) or np.linalg.norm(n) == 0.0:
            raise ValidationError(f"plane normal must be a nonzero 3-vector, got {self.normal}")
        object.__setattr__(self, "point", p)
        object.__setattr__(self, "normal", normalize(n))


@dataclass(frozen=True)
class Camera:
    position: np.ndarray
    look_at: np.ndarray
    up: np.ndarray
    fov_degrees: float
    width: int
    height: int

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64)
        tgt = np.asarray(self.look_at, dtype=np.float64)
        up = np.asarray(self.up, dtype=np.float64)
        if not (0.0 < float(self.fov_degrees) < 180.0):
            raise ValidationError(f"fov_degrees must lie in (0, 180), got {self.fov_degrees}")
        if int(self.width) < 1 or int(self.height) < 1:
            raise ValidationError("image dimensions must be positive")
        if np.allclose(pos, tgt):
            raise ValidationError("camera position and look_at coincide")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "look_at", tgt)
        object.__setattr__(self, "up", up)
        object.__setattr__(self, "fov_degrees", float(self.fov_degrees))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

    def primary_rays(self) -> tuple[np.ndarray, np.ndarray]:
        """Rays through pixel centers: (origins, directions), each (H*W, 3)."""
        fwd = normalize(self.look_at - self.position)
        right = normalize(np.cross(fwd, self.up))
        up = np.cross(right, fwd)
        tan_half = np.tan(np.radians(self.fov_degrees) / 2.0)
        aspect = self.width / self.height
        xs = (np.arange(self.width) + 0.5) / self.width
        ys = (np.arange(self.height) + 0.5) / self.height
        sx = (2.0 * xs - 1.0) * tan_half * aspect
        sy = (1.0 - 2.0 * ys) * tan_half
        dirs = (
            fwd
            + sx[None, :, None] * right
            + sy[:, None, None] * up
        )
        dirs = normalize(dirs.reshape(-1, 3))
        origins = np.broadcast_to(self.position, dirs.shape)
        return origins, dirs


@dataclass(frozen=True)
class Environment:
    """Directional radiance field: constant color or a two-color gradient."""

    kind: str = "constant"
    radiance: np.ndarray = field(default_factory=lambda: np.full(3, 0.5))
    top: np.ndarray | None = None
    bottom: np.ndarray | None = None
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        if self.kind not in ("constant", "gradient"):
            raise ValidationError(f"environment kind must be constant|gradient, got {self.kind!r}")
        object.__setattr__(self, "radiance", np.asarray(self.radiance, dtype=np.float64))
        object.__setattr__(self, "axis", normalize(np.asarray(self.axis, dtype=np.float64)))
        if self.kind == "gradient":
            if self.top is None or self.bottom is None:
                raise ValidationError("gradient environment needs top and bottom colors")
            object.__setattr__(self, "top", np.asarray(self.top, dtype=np.float64))
            object.__setattr__(self, "bottom", np.asarray(self.bottom, dtype=np.float64))

    def radiance_toward(self, dirs: np.ndarray) -> np.ndarray:
        """Radiance arriving from direction(s) ``dirs``, shape (..., 3)."""
        dirs = np.asarray(dirs, dtype=np.float64)
        if self.kind == "constant":
            return np.broadcast_to(self.radiance, dirs.shape).copy()
        t = 0.5 * (1.0 + dirs @ self.axis)
        return self.bottom + t[..., None] * (self.top - self.bottom)

    def max_radiance(self) -> float:
        if self.kind == "constant":
            return float(np.max(self.radiance))
        return float(max(np.max(self.top), np.max(self.bottom)))


@dataclass(frozen=True)
class Scene:
    camera: Camera
    materials: dict[str, Material]
    objects: tuple
    environment: Environment

    def __post_init__(self):
        if self.environment.max_radiance() <= 0.0:
            raise ValidationError("scene needs at least one emitter with nonzero radiance")
        for obj in self.objects:
            if obj.material not in self.materials:
                raise ValidationError(f"object references unknown material {obj.material!r}")
        object.__setattr__(self, "objects", tuple(self.objects))


def _parse_floats(raw: str, n: int, where: str) -> np.ndarray:
    parts = raw.replace(",", " ").split()
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise SceneParseError(f"{where}: cannot parse {raw!r} as numbers") from None
    if len(vals) != n:
        raise SceneParseError(f"{where}: expected {n} numbers, got {len(vals)}")
    return np.asarray(vals, dtype=np.float64)


def _get(section, key: str, where: str) -> str:
    if key not in section:
        raise SceneParseError(f"{where}: missing key {key!r}")
    return section[key]


def parse_scene(text: str) -> Scene:
    """Parse a scene document; raises SceneParseError on any defect."""
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    try:
        parser.read_file(io.StringIO(text))
    except configparser.Error as exc:
        raise SceneParseError(f"scene parse error: {exc}") from None

    if "camera" not in parser:
        raise SceneParseError("missing [camera] section")
    if "environment" not in parser:
        raise SceneParseError("missing [environment] section")

    cam_sec = parser["camera"]
    try:
        camera = Camera(
            position=_parse_floats(_get(cam_sec, "position", "[camera]"), 3, "[camera] position"),
            look_at=_parse_floats(_get(cam_sec, "look_at", "[camera]"), 3, "[camera] look_at"),
            up=_parse_floats(cam_sec.get("up", "0 1 0"), 3, "[camera] up"),
            fov_degrees=float(_get(cam_sec, "fov_degrees", "[camera]")),
            width=int(_get(cam_sec, "width", "[camera]")),
            height=int(_get(cam_sec, "height", "[camera]")),
        )
    except (ValidationError, ValueError) as exc:
        if isinstance(exc, SceneParseError):
            raise
        raise SceneParseError(f"[camera]: {exc}") from None

    materials: dict[str, Material] = {}
    objects = []
    for name in parser.sections():
        if name.startswith("materials."):
            sec = parser[name]
            short = name.split(".", 1)[1]
            try:
                materials[short] = Material(
                    albedo=_parse_floats(_get(sec, "albedo", f"[{name}]"), 3, f"[{name}] albedo"),
                    roughness=float(_get(sec, "roughness", f"[{name}]")),
                    metallic=float(_get(sec, "metallic", f"[{name}]")),
                    f0=_parse_floats(sec.get("f0", "0.04 0.04 0.04"), 3, f"[{name}] f0"),
                    geometry_k_mode=sec.get("geometry_k_mode", "direct"),
                )
            except ValidationError as exc:
                raise SceneParseError(f"[{name}]: {exc}") from None
        elif name.startswith("objects."):
            sec = parser[name]
            kind = _get(sec, "type", f"[{name}]")
            try:
                if kind == "sphere":
                    objects.append(
                        Sphere(
                            center=_parse_floats(_get(sec, "center", f"[{name}]"), 3, f"[{name}] center"),
                            radius=float(_get(sec, "radius", f"[{name}]")),
                            material=_get(sec, "material", f"[{name}]"),
                        )
                    )
                elif kind == "plane":
                    objects.append(
                        Plane(
                            point=_parse_floats(_get(sec, "point", f"[{name}]"), 3, f"[{name}] point"),
                            normal=_parse_floats(_get(sec, "normal", f"[{name}]"), 3, f"[{name}] normal"),
                            material=_get(sec, "material", f"[{name}]"),
                        )
                    )
                else:
                    raise SceneParseError(f"[{name}]: unknown object type {kind!r}")
            except ValidationError as exc:
                raise SceneParseError(f"[{name}]: {exc}") from None
        elif name not in ("camera", "environment"):
            raise SceneParseError(f"unknown section [{name}]")

    env_sec = parser["environment"]
    kind = env_sec.get("kind", "constant")
    try:
        if kind == "constant":
            environment = Environment(
                kind="constant",
                radiance=_parse_floats(_get(env_sec, "radiance", "[environment]"), 3, "[environment] radiance"),
            )
        elif kind == "gradient":
            environment = Environment(
                kind="gradient",
                top=_parse_floats(_get(env_sec, "top", "[environment]"), 3, "[environment] top"),
                bottom=_parse_floats(_get(env_sec, "bottom", "[environment]"), 3, "[environment] bottom"),
                axis=_parse_floats(env_sec.get("axis", "0 0 1"), 3, "[environment] axis"),
            )
        else:
            raise SceneParseError(f"[environment]: unknown kind {kind!r}")
        return Scene(camera=camera, materials=materials, objects=tuple(objects), environment=environment)
    except ValidationError as exc:
        raise SceneParseError(str(exc)) from None


def load_scene(path) -> Scene:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scene(fh.read())
