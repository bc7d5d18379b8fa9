"""Three-bounce light transport: laser spot -> surfel -> wall point -> camera.

Each surfel contributes the product of three reflection terms.  The laser spot
term is a constant BRDF value, the surfel term couples spot and surfel through
two clamped cosines over their squared distance, and the wall term couples surfel
and observed wall point the same way.  A pixel's value is the sum over surfels.

The per-surfel spot coupling does not depend on the pixel, so it is computed once
per render and the kernel only evaluates the wall term per (pixel, surfel) pair.
Pixels run in parallel; the surfel sum inside each pixel is sequential in stored
order, so output is bit-identical for any thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .scene import ObjectModel, Pose, SceneGeometry, apply_pose

SINGULAR_DISTANCE = 1e-9

# the bundled TBB is often too old and numba warns on every import that probes it
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


class SingularityError(ArithmeticError):
    """A surfel coincides with the laser spot or an observed wall point."""

    def __init__(self, message: str, surfel: int | None = None, pixel: tuple | None = None):
        self.surfel = surfel
        self.pixel = pixel
        super().__init__(message)


@dataclass(frozen=True)
class RenderSettings:
    rho0: float = 1.0
    f_spot: float = 1.0
    f_surfel: float = 1.0
    f_wall: float = 1.0

    def __post_init__(self):
        for name in ("rho0", "f_spot", "f_surfel", "f_wall"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")


def clamped_cos(v, w) -> float:
    """Normalized dot product, clamped to zero for back-facing pairs."""
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    nv = math.sqrt(float(v @ v))
    nw = math.sqrt(float(w @ w))
    if nv == 0.0 or nw == 0.0:
        raise ValueError("clamped_cos of a zero-length vector")
    d = float(v @ w)
    if d <= 0.0:
        return 0.0
    return d / (nv * nw)


def surfel_contribution(scene: SceneGeometry, settings: RenderSettings, surfel,
                        wall_point) -> float:
    """Radiance one surfel sends to ``wall_point`` (scalar reference path)."""
    p_s = scene.laser_spot
    n_s = scene.wall_normal
    n_w = scene.wall_normal
    p_i = np.asarray(surfel.position, dtype=np.float64)
    n_i = np.asarray(surfel.normal, dtype=np.float64)
    p_w = np.asarray(wall_point, dtype=np.float64)
    if (p_i - scene.wall_point) @ scene.wall_normal == 0.0:
        raise ValueError("surfel lies on the wall plane")
    to_spot = p_s - p_i
    to_wall = p_w - p_i
    r2_s = float(to_spot @ to_spot)
    r2_w = float(to_wall @ to_wall)
    if r2_s < SINGULAR_DISTANCE**2:
        raise SingularityError("surfel coincides with the laser spot")
    if r2_w < SINGULAR_DISTANCE**2:
        raise SingularityError("surfel coincides with the wall point")

    spot = settings.rho0 * settings.f_spot
    c1 = clamped_cos(n_s, -to_spot)
    c2 = clamped_cos(n_i, to_spot)
    if c1 == 0.0 or c2 == 0.0:
        return 0.0
    surf = c1 * c2 / r2_s * settings.f_surfel * surfel.area
    c3 = clamped_cos(n_i, to_wall)
    c4 = clamped_cos(n_w, -to_wall)
    if c3 == 0.0 or c4 == 0.0:
        return 0.0
    wall = c3 * c4 / r2_w * settings.f_wall
    return spot * surf * wall


def _spot_coupling(scene: SceneGeometry, settings: RenderSettings, obj: ObjectModel) -> np.ndarray:
    """Laser spot and surfel lines of the three-bounce product, one value per surfel."""
    to_spot = scene.laser_spot - obj.positions
    r2 = np.einsum("ij,ij->i", to_spot, to_spot)
    bad = np.flatnonzero(r2 < SINGULAR_DISTANCE**2)
    if len(bad):
        raise SingularityError(f"surfel {bad[0]} coincides with the laser spot", surfel=int(bad[0]))
    r = np.sqrt(r2)
    n_s = scene.wall_normal
    nn_s = math.sqrt(float(n_s @ n_s))
    nn_i = np.linalg.norm(obj.normals, axis=1)
    d1 = -(to_spot @ n_s)
    d2 = np.einsum("ij,ij->i", obj.normals, to_spot)
    c1 = np.where(d1 > 0, d1 / (nn_s * r), 0.0)
    c2 = np.where(d2 > 0, d2 / (nn_i * r), 0.0)
    spot = settings.rho0 * settings.f_spot
    return spot * (c1 * c2 / r2 * settings.f_surfel * obj.areas)


@numba.njit(parallel=True, cache=True)
def _wall_kernel(wall_pts, n_w, nn_w, f_wall, pos, nrm, nn_i, coupling, guard2, out, bad):
    npix = wall_pts.shape[0]
    nsurf = pos.shape[0]
    for k in numba.prange(npix):
        wx = wall_pts[k, 0]
        wy = wall_pts[k, 1]
        wz = wall_pts[k, 2]
        acc = 0.0
        for i in range(nsurf):
            k_i = coupling[i]
            if k_i == 0.0:
                continue
            dx = wx - pos[i, 0]
            dy = wy - pos[i, 1]
            dz = wz - pos[i, 2]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 < guard2:
                if bad[k] < 0:
                    bad[k] = i
                continue
            d3 = nrm[i, 0] * dx + nrm[i, 1] * dy + nrm[i, 2] * dz
            if d3 <= 0.0:
                continue
            d4 = -(n_w[0] * dx + n_w[1] * dy + n_w[2] * dz)
            if d4 <= 0.0:
                continue
            r = math.sqrt(r2)
            c3 = d3 / (nn_i[i] * r)
            c4 = d4 / (nn_w * r)
            acc += k_i * (c3 * c4 / r2 * f_wall)
        out[k] = acc


def render_points(scene: SceneGeometry, settings: RenderSettings, obj: ObjectModel,
                  wall_points: np.ndarray) -> np.ndarray:
    """Render an already-posed object at arbitrary wall points, shape ``(n_points,)``."""
    wall_points = np.ascontiguousarray(wall_points, dtype=np.float64).reshape(-1, 3)
    coupling = _spot_coupling(scene, settings, obj)
    out = np.empty(len(wall_points))
    bad = np.full(len(wall_points), -1, dtype=np.int64)
    n_w = np.ascontiguousarray(scene.wall_normal)
    _wall_kernel(wall_points, n_w, math.sqrt(float(n_w @ n_w)), float(settings.f_wall),
                 np.ascontiguousarray(obj.positions), np.ascontiguousarray(obj.normals),
                 np.linalg.norm(obj.normals, axis=1), coupling, SINGULAR_DISTANCE**2, out, bad)
    hit = np.flatnonzero(bad >= 0)
    if len(hit):
        k = int(hit[0])
        raise SingularityError(f"surfel {bad[k]} coincides with wall point {k}",
                               surfel=int(bad[k]), pixel=(k,))
    return out


def render_image(scene: SceneGeometry, settings: RenderSettings, obj: ObjectModel,
                 pose: Pose | None = None) -> np.ndarray:
    """Simulated wall image for ``obj`` under ``pose``, shape ``(height, width)``."""
    posed = apply_pose(obj, pose) if pose is not None else obj
    try:
        out = render_points(scene, settings, posed, scene.wall_points)
    except SingularityError as exc:
        if exc.pixel is not None:
            k = exc.pixel[0]
            u, v = k % scene.width, k // scene.width
            raise SingularityError(f"surfel {exc.surfel} coincides with the wall point of pixel ({u}, {v})",
                                   surfel=exc.surfel, pixel=(u, v)) from None
        raise
    return out.reshape(scene.shape)


def render_difference(scene: SceneGeometry, settings: RenderSettings, obj: ObjectModel,
                      pose_a: Pose, pose_b: Pose) -> np.ndarray:
    return render_image(scene, settings, obj, pose_a) - render_image(scene, settings, obj, pose_b)


def set_threads(n: int | None) -> int:
    """Limit the renderer's worker threads; returns the count in effect."""
    if n is not None:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
    return numba.get_num_threads()
