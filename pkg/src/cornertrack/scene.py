"""Scene geometry: surfel objects, rigid poses, and the wall/laser/camera setup.

Conventions
-----------
The wall is a plane given by a point and a unit normal; the hidden volume lies on
the side the normal points to.  The shipped scenes put the wall in the XZ plane
(``y = 0``) with normal ``+Y``, so Y is the object-to-wall distance.

Poses rotate an object about its centroid with extrinsic X-then-Y-then-Z Euler
angles in degrees, then translate it.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from scipy.spatial.transform import Rotation

PathLike = Union[str, Path]

UNIT_TOL = 1e-9
PLANE_TOL = 1e-9
LOAD_NORMAL_TOL = 1e-3


class SceneError(ValueError):
    """Invalid scene, grid, or object definition."""


class ObjectFileError(ValueError):
    """Malformed surfel file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _vec3(v, name: str = "vector") -> np.ndarray:
    a = np.asarray(v, dtype=np.float64).reshape(-1)
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise SceneError(f"{name} must be 3 finite numbers, got {v!r}")
    return a


def _unit(v, name: str = "normal") -> np.ndarray:
    a = _vec3(v, name)
    n = np.linalg.norm(a)
    if n == 0.0:
        raise SceneError(f"{name} has zero length")
    if abs(n - 1.0) > 1e-12:
        a = a / n
    return a


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# Objects


@dataclass(frozen=True)
class Surfel:
    position: np.ndarray
    normal: np.ndarray
    area: float

    def __post_init__(self):
        object.__setattr__(self, "position", _frozen(_vec3(self.position, "position")))
        n = _vec3(self.normal, "normal")
        if abs(np.linalg.norm(n) - 1.0) > UNIT_TOL:
            raise SceneError(f"surfel normal {n} is not unit length")
        object.__setattr__(self, "normal", _frozen(n))
        if not (self.area > 0 and math.isfinite(self.area)):
            raise SceneError(f"surfel area must be positive, got {self.area}")
        object.__setattr__(self, "area", float(self.area))


@dataclass(frozen=True, eq=False)
class ObjectModel:
    """An ordered set of surfels stored as parallel arrays.

    ``positions`` and ``normals`` are ``(n, 3)``, ``areas`` is ``(n,)``.  The
    stored order is the summation order used by the renderer.
    """

    positions: np.ndarray
    normals: np.ndarray
    areas: np.ndarray
    name: str = "object"

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        nrm = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
        area = np.asarray(self.areas, dtype=np.float64).reshape(-1)
        if len(pos) == 0:
            raise SceneError("object has no surfels")
        if not (len(pos) == len(nrm) == len(area)):
            raise SceneError("positions, normals and areas differ in length")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(nrm)) and np.all(np.isfinite(area))):
            raise SceneError("non-finite surfel data")
        if np.any(area <= 0):
            raise SceneError("surfel areas must be positive")
        norms = np.linalg.norm(nrm, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            raise SceneError("surfel normals must be unit length")
        object.__setattr__(self, "positions", _frozen(pos))
        object.__setattr__(self, "normals", _frozen(nrm))
        object.__setattr__(self, "areas", _frozen(area))

    @classmethod
    def from_surfels(cls, surfels: Sequence[Surfel], name: str = "object") -> "ObjectModel":
        if not surfels:
            raise SceneError("object has no surfels")
        return cls(
            np.array([s.position for s in surfels]),
            np.array([s.normal for s in surfels]),
            np.array([s.area for s in surfels]),
            name=name,
        )

    def __len__(self) -> int:
        return len(self.areas)

    def __getitem__(self, i: int) -> Surfel:
        return Surfel(self.positions[i], self.normals[i], float(self.areas[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ObjectModel):
            return NotImplemented
        return (
            self.name == other.name
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.normals, other.normals)
            and np.array_equal(self.areas, other.areas)
        )

    @property
    def centroid(self) -> np.ndarray:
        return self.positions.mean(axis=0)

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    def subset(self, index) -> "ObjectModel":
        index = np.atleast_1d(index)
        return ObjectModel(self.positions[index], self.normals[index], self.areas[index], self.name)

    def single_surfel_proxy(self, name: str = "proxy") -> "ObjectModel":
        """Collapse the object into one surfel at its centroid.

        The proxy carries the total area and the area-weighted mean normal.
        """
        n = (self.normals * self.areas[:, None]).sum(axis=0)
        n = n / np.linalg.norm(n)
        return ObjectModel(self.centroid[None, :], n[None, :], np.array([self.total_area]), name)


def make_planar_object(width_m: float, height_m: float, nx: int, ny: int,
                       normal=(0.0, -1.0, 0.0), center=(0.0, 0.0, 0.0),
                       name: str = "plane") -> ObjectModel:
    """Regular ``nx`` by ``ny`` grid of surfels covering a rectangle.

    The rectangle is centered on ``center`` and perpendicular to ``normal``.
    Its first axis is the projection of world X onto the plane (world Z if the
    normal is along X), its second axis completes a right-handed frame.
    """
    if not (width_m > 0 and height_m > 0):
        raise ValueError("planar object extents must be positive")
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError("planar object grid counts must be positive integers")
    nx, ny = int(nx), int(ny)
    n = _unit(normal)
    ref = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 0.0, 1.0])
    e1 = ref - n * (ref @ n)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    s = (np.arange(nx) + 0.5) / nx * width_m - width_m / 2
    t = (np.arange(ny) + 0.5) / ny * height_m - height_m / 2
    ss, tt = np.meshgrid(s, t, indexing="xy")
    pos = _vec3(center, "center") + ss.reshape(-1, 1) * e1 + tt.reshape(-1, 1) * e2
    area = np.full(nx * ny, (width_m * height_m) / (nx * ny))
    return ObjectModel(pos, np.tile(n, (nx * ny, 1)), area, name=name)


def make_l_object(arm_m: float = 0.12, thickness_m: float = 0.04, pitch_m: float = 0.01,
                  name: str = "L") -> ObjectModel:
    """Planar L shape in the XZ plane facing -Y, centered on its centroid.

    The asymmetry makes rotation about the wall-normal axis observable.
    """
    nt = max(1, round(thickness_m / pitch_m))
    na = max(1, round(arm_m / pitch_m))
    horiz = make_planar_object(na * pitch_m, nt * pitch_m, na, nt,
                               center=(na * pitch_m / 2, 0.0, nt * pitch_m / 2))
    vert_len = (na - nt) * pitch_m
    vert = make_planar_object(nt * pitch_m, vert_len, nt, na - nt,
                              center=(nt * pitch_m / 2, 0.0, nt * pitch_m + vert_len / 2))
    pos = np.vstack([horiz.positions, vert.positions])
    pos = pos - pos.mean(axis=0)
    return ObjectModel(pos, np.vstack([horiz.normals, vert.normals]),
                       np.concatenate([horiz.areas, vert.areas]), name=name)


def make_car_object(pitch_m: float = 0.02, name: str = "car") -> ObjectModel:
    """Flat car silhouette in the XZ plane facing -Y: 502 surfels at 2 cm pitch.

    Body 30x12 cells, cabin 18x7 cells offset toward the rear, two 4x2 wheels.
    """
    cells = [(i, j) for i in range(30) for j in range(12)]
    cells += [(i, 12 + j) for i in range(4, 22) for j in range(7)]
    for w0 in (3, 22):
        cells += [(w0 + i, -2 + j) for i in range(4) for j in range(2)]
    ij = np.array(cells, dtype=np.float64)
    pos = np.zeros((len(cells), 3))
    pos[:, 0] = (ij[:, 0] + 0.5) * pitch_m
    pos[:, 2] = (ij[:, 1] + 0.5) * pitch_m
    pos -= pos.mean(axis=0)
    nrm = np.tile([0.0, -1.0, 0.0], (len(cells), 1))
    return ObjectModel(pos, nrm, np.full(len(cells), pitch_m**2), name=name)


def load_object(path: PathLike, name: str | None = None) -> ObjectModel:
    """Read a surfel file: one ``px py pz nx ny nz area`` record per line."""
    path = Path(path)
    rows = []
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 7:
                raise ObjectFileError(f"expected 7 fields, got {len(parts)}", lineno)
            try:
                vals = [float(x) for x in parts]
            except ValueError as exc:
                raise ObjectFileError(f"bad number ({exc})", lineno) from None
            if not all(math.isfinite(x) for x in vals):
                raise ObjectFileError("non-finite value", lineno)
            n = np.array(vals[3:6])
            norm = float(np.linalg.norm(n))
            if abs(norm - 1.0) > LOAD_NORMAL_TOL:
                raise ObjectFileError(f"normal length {norm:.6g} is not within {LOAD_NORMAL_TOL} of 1", lineno)
            if abs(norm - 1.0) > 1e-12:
                n = n / norm
            if vals[6] <= 0:
                raise ObjectFileError(f"area must be positive, got {vals[6]}", lineno)
            rows.append((vals[0:3], n, vals[6]))
    if not rows:
        raise ObjectFileError(f"{path}: no surfels")
    return ObjectModel(
        np.array([r[0] for r in rows]),
        np.array([r[1] for r in rows]),
        np.array([r[2] for r in rows]),
        name=name if name is not None else path.stem,
    )


def save_object(obj: ObjectModel, path: PathLike) -> None:
    with open(path, "w") as f:
        f.write(f"# {obj.name}: {len(obj)} surfels, px py pz nx ny nz area (m, m^2)\n")
        for p, n, a in zip(obj.positions, obj.normals, obj.areas):
            f.write(" ".join(repr(float(x)) for x in (*p, *n, a)) + "\n")


# ---------------------------------------------------------------------------
# Poses


class DofMode(str, enum.Enum):
    TRANSLATION3 = "translation3"
    POSE6 = "pose6"

    @property
    def n_dof(self) -> int:
        return 3 if self is DofMode.TRANSLATION3 else 6


def wrap_angle(deg: float) -> float:
    """Map an angle in degrees into (-180, 180]."""
    w = math.fmod(deg, 360.0)
    if w <= -180.0:
        w += 360.0
    elif w > 180.0:
        w -= 360.0
    return w


@dataclass(frozen=True)
class Pose:
    translation: tuple = (0.0, 0.0, 0.0)
    rotation: tuple = (0.0, 0.0, 0.0)
    mode: DofMode = DofMode.POSE6

    def __post_init__(self):
        t = tuple(float(x) for x in self.translation)
        r = tuple(float(x) for x in self.rotation)
        if len(t) != 3 or len(r) != 3:
            raise ValueError("pose needs 3 translation and 3 rotation components")
        if not all(math.isfinite(x) for x in t + r):
            raise ValueError("pose components must be finite")
        mode = DofMode(self.mode)
        if mode is DofMode.TRANSLATION3 and any(x != 0.0 for x in r):
            raise ValueError("translation-only pose must have zero rotation")
        if any(not (-180.0 < x <= 180.0) for x in r):
            raise ValueError(f"Euler angles must lie in (-180, 180], got {r}")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "mode", mode)

    @classmethod
    def from_vector(cls, vec, mode: DofMode) -> "Pose":
        """Build a pose from an optimizer vector, wrapping angles into range."""
        mode = DofMode(mode)
        vec = [float(x) for x in vec]
        if len(vec) != mode.n_dof:
            raise ValueError(f"{mode.value} pose vector needs {mode.n_dof} entries")
        rot = tuple(wrap_angle(x) for x in vec[3:6]) if mode is DofMode.POSE6 else (0.0, 0.0, 0.0)
        return cls(tuple(vec[:3]), rot, mode)

    def canonical(self) -> "Pose":
        if self.mode is DofMode.TRANSLATION3:
            return self
        return Pose(self.translation, canonical_euler(self.rotation), self.mode)

    def to_vector(self) -> np.ndarray:
        if self.mode is DofMode.TRANSLATION3:
            return np.array(self.translation)
        return np.array(self.translation + self.rotation)

    def rotation_matrix(self) -> np.ndarray:
        return euler_matrix(self.rotation)

    def inverse(self) -> "Pose":
        """Pose undoing this one (for an object whose centroid has moved by ``translation``)."""
        t = tuple(-x for x in self.translation)
        if self.mode is DofMode.TRANSLATION3 or not any(self.rotation):
            return Pose(t, (0.0, 0.0, 0.0), self.mode)
        ang = Rotation.from_matrix(self.rotation_matrix().T).as_euler("xyz", degrees=True)
        return Pose(t, tuple(wrap_angle(a) for a in ang), self.mode)

    def to_dict(self) -> dict:
        return {"translation": list(self.translation), "rotation": list(self.rotation),
                "mode": self.mode.value}

    @classmethod
    def from_dict(cls, d: dict) -> "Pose":
        return cls(tuple(d.get("translation", (0, 0, 0))), tuple(d.get("rotation", (0, 0, 0))),
                   DofMode(d.get("mode", "pose6")))


def canonical_euler(angles_deg) -> tuple:
    """Equivalent XYZ Euler triple with the middle angle in [-90, 90], wrapped."""
    a, b, c = (wrap_angle(float(x)) for x in angles_deg)
    if abs(b) > 90.0:
        a, b, c = wrap_angle(a + 180.0), wrap_angle(180.0 - b), wrap_angle(c + 180.0)
    return (a, b, c)


def euler_matrix(angles_deg) -> np.ndarray:
    """Extrinsic X, then Y, then Z rotation (degrees) as a 3x3 matrix."""
    return Rotation.from_euler("xyz", angles_deg, degrees=True).as_matrix()


def apply_pose(obj: ObjectModel, pose: Pose) -> ObjectModel:
    """Rotate ``obj`` about its centroid, then translate it. Surfel order is kept."""
    t = np.array(pose.translation)
    if not any(pose.rotation):
        if not t.any():
            return obj
        return ObjectModel(obj.positions + t, obj.normals, obj.areas, obj.name)
    R = pose.rotation_matrix()
    c = obj.centroid
    pos = (obj.positions - c) @ R.T + c + t
    nrm = obj.normals @ R.T
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    return ObjectModel(pos, nrm, obj.areas, obj.name)


# ---------------------------------------------------------------------------
# Wall, laser, camera


@dataclass(frozen=True)
class OrthographicRect:
    """Pixels sample a rectangle on the wall; pixel centers sit half a pitch inside."""

    width: int
    height: int
    origin: np.ndarray
    u_axis: np.ndarray
    v_axis: np.ndarray
    extent_u: float
    extent_v: float

    mode = "orthographic"

    def __post_init__(self):
        _check_dims(self.width, self.height)
        object.__setattr__(self, "origin", _frozen(_vec3(self.origin, "origin")))
        object.__setattr__(self, "u_axis", _frozen(_unit(self.u_axis, "u_axis")))
        object.__setattr__(self, "v_axis", _frozen(_unit(self.v_axis, "v_axis")))
        if not (self.extent_u > 0 and self.extent_v > 0):
            raise SceneError("orthographic extents must be positive")

    def points(self, wall_point, wall_normal, camera_center) -> np.ndarray:
        su = (np.arange(self.width) + 0.5) / self.width * self.extent_u
        sv = (np.arange(self.height) + 0.5) / self.height * self.extent_v
        pts = (self.origin[None, None, :]
               + su[None, :, None] * self.u_axis
               + sv[:, None, None] * self.v_axis)
        return pts.reshape(-1, 3)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "width": self.width, "height": self.height,
                "origin": self.origin.tolist(), "u_axis": self.u_axis.tolist(),
                "v_axis": self.v_axis.tolist(), "extent": [self.extent_u, self.extent_v]}


@dataclass(frozen=True)
class Pinhole:
    """Perspective camera; each pixel ray through its center is cut with the wall.

    ``look_at`` and ``up`` orient the camera.  Image x runs along
    ``forward x up``, image y runs downward.
    """

    width: int
    height: int
    focal_px: float
    principal_point: tuple
    look_at: np.ndarray
    up: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    mode = "pinhole"

    def __post_init__(self):
        _check_dims(self.width, self.height)
        if not self.focal_px > 0:
            raise SceneError("focal length must be positive")
        pp = tuple(float(x) for x in self.principal_point)
        if len(pp) != 2:
            raise SceneError("principal point needs two coordinates")
        object.__setattr__(self, "principal_point", pp)
        object.__setattr__(self, "look_at", _frozen(_vec3(self.look_at, "look_at")))
        object.__setattr__(self, "up", _frozen(_vec3(self.up, "up")))

    def rays(self, camera_center) -> np.ndarray:
        fwd = self.look_at - camera_center
        fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(fwd, self.up)
        if np.linalg.norm(right) < 1e-12:
            raise SceneError("camera up vector is parallel to the viewing direction")
        right /= np.linalg.norm(right)
        down = np.cross(fwd, right)
        cx, cy = self.principal_point
        x = (np.arange(self.width) + 0.5 - cx) / self.focal_px
        y = (np.arange(self.height) + 0.5 - cy) / self.focal_px
        d = fwd + x[None, :, None] * right + y[:, None, None] * down
        return d.reshape(-1, 3)

    def points(self, wall_point, wall_normal, camera_center) -> np.ndarray:
        d = self.rays(camera_center)
        denom = d @ wall_normal
        with np.errstate(divide="ignore", invalid="ignore"):
            s = ((wall_point - camera_center) @ wall_normal) / denom
        if np.any(~np.isfinite(s)) or np.any(s <= 0):
            bad = int(np.flatnonzero(~(np.isfinite(s) & (s > 0)))[0])
            raise SceneError(f"pixel ({bad % self.width}, {bad // self.width}) ray misses the wall")
        pts = camera_center + s[:, None] * d
        # remove the rounding component along the normal so points sit on the plane
        off = (pts - wall_point) @ wall_normal
        return pts - off[:, None] * wall_normal

    def to_dict(self) -> dict:
        return {"mode": self.mode, "width": self.width, "height": self.height,
                "focal_px": self.focal_px, "principal_point": list(self.principal_point),
                "look_at": self.look_at.tolist(), "up": self.up.tolist()}


PixelGrid = Union[OrthographicRect, Pinhole]


def _check_dims(w, h):
    if int(w) != w or int(h) != h or w < 1 or h < 1:
        raise SceneError(f"grid dimensions must be positive integers, got {w}x{h}")


@dataclass(frozen=True, eq=False)
class SceneGeometry:
    wall_point: np.ndarray
    wall_normal: np.ndarray
    laser_source: np.ndarray
    laser_spot: np.ndarray
    camera_center: np.ndarray
    grid: PixelGrid

    def __post_init__(self):
        wp = _frozen(_vec3(self.wall_point, "wall point"))
        wn = _frozen(_unit(self.wall_normal, "wall normal"))
        object.__setattr__(self, "wall_point", wp)
        object.__setattr__(self, "wall_normal", wn)
        for name in ("laser_source", "laser_spot", "camera_center"):
            object.__setattr__(self, name, _frozen(_vec3(getattr(self, name), name)))
        if abs((self.laser_spot - wp) @ wn) >= PLANE_TOL:
            raise SceneError("laser spot does not lie on the wall plane")
        for name in ("laser_source", "camera_center"):
            if (getattr(self, name) - wp) @ wn <= 0:
                raise SceneError(f"{name} must be in front of the wall")
        pts = self.grid.points(wp, wn, self.camera_center)
        off = np.abs((pts - wp) @ wn)
        if off.max() >= PLANE_TOL:
            raise SceneError("pixel grid does not lie on the wall plane")
        object.__setattr__(self, "_points", _frozen(pts))

    @property
    def width(self) -> int:
        return self.grid.width

    @property
    def height(self) -> int:
        return self.grid.height

    @property
    def shape(self) -> tuple:
        return (self.grid.height, self.grid.width)

    @property
    def wall_points(self) -> np.ndarray:
        """``(height * width, 3)`` wall points in row-major pixel order."""
        return self._points

    def with_grid(self, grid: PixelGrid) -> "SceneGeometry":
        return SceneGeometry(self.wall_point, self.wall_normal, self.laser_source,
                             self.laser_spot, self.camera_center, grid)

    def to_dict(self) -> dict:
        return {
            "wall": {"point": self.wall_point.tolist(), "normal": self.wall_normal.tolist()},
            "laser": {"source": self.laser_source.tolist(), "spot": self.laser_spot.tolist()},
            "camera": {"center": self.camera_center.tolist()},
            "grid": self.grid.to_dict(),
        }


def pixel_to_wall_point(scene: SceneGeometry, u: int, v: int) -> np.ndarray:
    """Wall point seen by pixel column ``u``, row ``v``."""
    if not (0 <= u < scene.width and 0 <= v < scene.height):
        raise IndexError(f"pixel ({u}, {v}) outside {scene.width}x{scene.height} grid")
    return scene.wall_points[v * scene.width + u].copy()


def grid_from_dict(d: dict) -> PixelGrid:
    mode = d.get("mode")
    try:
        if mode == "orthographic":
            ext = d["extent"]
            return OrthographicRect(int(d["width"]), int(d["height"]), d["origin"],
                                    d["u_axis"], d["v_axis"], float(ext[0]), float(ext[1]))
        if mode == "pinhole":
            w, h = int(d["width"]), int(d["height"])
            return Pinhole(w, h, float(d["focal_px"]),
                           tuple(d.get("principal_point", (w / 2, h / 2))),
                           d["look_at"], d.get("up", (0.0, 0.0, 1.0)))
    except KeyError as exc:
        raise SceneError(f"grid is missing key {exc}") from None
    raise SceneError(f"unknown grid mode {mode!r}")


def scene_from_dict(d: dict) -> SceneGeometry:
    try:
        return SceneGeometry(
            wall_point=d["wall"]["point"],
            wall_normal=d["wall"]["normal"],
            laser_source=d["laser"]["source"],
            laser_spot=d["laser"]["spot"],
            camera_center=d["camera"]["center"],
            grid=grid_from_dict(d["grid"]),
        )
    except KeyError as exc:
        raise SceneError(f"scene is missing key {exc}") from None


def load_scene(path: PathLike) -> SceneGeometry:
    with open(path) as f:
        return scene_from_dict(json.load(f))


def save_scene(scene: SceneGeometry, path: PathLike) -> None:
    with open(path, "w") as f:
        json.dump(scene.to_dict(), f, indent=2)
        f.write("\n")


def orthographic_wall_scene(width: int, height: int, extent_u: float = 2.0, extent_v: float = 2.0,
                            laser_spot=(0.0, 0.0, 0.0)) -> SceneGeometry:
    """Fronto-parallel orthographic view of a wall rectangle centered on the origin."""
    grid = OrthographicRect(width, height, origin=(-extent_u / 2, 0.0, extent_v / 2),
                            u_axis=(1.0, 0.0, 0.0), v_axis=(0.0, 0.0, -1.0),
                            extent_u=extent_u, extent_v=extent_v)
    return SceneGeometry(wall_point=(0.0, 0.0, 0.0), wall_normal=(0.0, 1.0, 0.0),
                         laser_source=(1.0, 1.5, 0.0), laser_spot=laser_spot,
                         camera_center=(0.0, 2.0, 0.0), grid=grid)
