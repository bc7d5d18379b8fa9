"""Synthetic camera frames and measurement preprocessing.

Images are ``float64`` arrays of shape ``(height, width)``.  A capture session
yields four frames (laser off/on, object absent/present):

    i00 = A          i10 = A + B
    i01 = A          i11 = A + B + O

with ambient light A, laser light from the static background B and laser light
from the object O.  The tracker consumes ``M = i11 - i01 - B_hat``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .render import RenderSettings, render_image
from .scene import ObjectModel, Pose, SceneGeometry


@dataclass(frozen=True)
class NoiseModel:
    """Poisson photon noise followed by additive Gaussian read noise.

    ``photon_scale`` is electrons per intensity unit (0 disables shot noise),
    ``read_sigma`` is in intensity units.
    """

    photon_scale: float = 1e4
    read_sigma: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.photon_scale < 0 or self.read_sigma < 0:
            raise ValueError("noise parameters must be non-negative")

    @property
    def is_zero(self) -> bool:
        return self.photon_scale == 0 and self.read_sigma == 0


@dataclass(frozen=True)
class SmoothField:
    """Non-negative image generator: a stored image or a low-order polynomial.

    The polynomial is ``sum c[i, j] * x**i * y**j`` with ``x, y`` the pixel
    coordinates normalized to [-1, 1].  ``flicker`` is the half-width of a
    per-frame uniform gain around 1 (mains flicker on ambient light).
    """

    coeffs: np.ndarray | None = None
    image: np.ndarray | None = None
    flicker: float = 0.0

    def __post_init__(self):
        if (self.coeffs is None) == (self.image is None):
            raise ValueError("give exactly one of coeffs or image")
        if not 0 <= self.flicker < 1:
            raise ValueError("flicker must lie in [0, 1)")

    @classmethod
    def zero(cls) -> "SmoothField":
        return cls(coeffs=np.zeros((1, 1)))

    @classmethod
    def constant(cls, level: float, flicker: float = 0.0) -> "SmoothField":
        return cls(coeffs=np.array([[level]]), flicker=flicker)

    def render(self, shape: tuple) -> np.ndarray:
        if self.image is not None:
            img = np.asarray(self.image, dtype=np.float64)
            if img.shape != tuple(shape):
                raise ValueError(f"stored field is {img.shape}, expected {tuple(shape)}")
            out = img.copy()
        else:
            h, w = shape
            x = np.linspace(-1, 1, w) if w > 1 else np.zeros(1)
            y = np.linspace(-1, 1, h) if h > 1 else np.zeros(1)
            out = np.polynomial.polynomial.polygrid2d(y, x, np.asarray(self.coeffs, dtype=np.float64).T)
        if np.any(out < 0):
            raise ValueError("ambient/background field must be non-negative")
        return out


AmbientModel = SmoothField
BackgroundModel = SmoothField


@dataclass(frozen=True)
class FrameSet:
    i00: np.ndarray
    i10: np.ndarray
    i01: np.ndarray
    i11: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shapes = {np.shape(getattr(self, k)) for k in ("i00", "i10", "i01", "i11")}
        if len(shapes) != 1:
            raise ValueError(f"frame shapes differ: {sorted(shapes)}")

    @property
    def shape(self) -> tuple:
        return self.i00.shape


def _frame_rngs(seed: int, count: int) -> list:
    # counter-based generator: the stream depends only on the seed, not on call order
    return [np.random.Generator(np.random.Philox(s)) for s in np.random.SeedSequence(seed).spawn(count)]


def add_noise(clean: np.ndarray, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    out = np.asarray(clean, dtype=np.float64)
    if noise.photon_scale > 0:
        if np.any(out < 0):
            raise ValueError("photon noise needs a non-negative signal")
        out = rng.poisson(out * noise.photon_scale) / noise.photon_scale
    else:
        out = out.copy()
    if noise.read_sigma > 0:
        out = out + rng.normal(0.0, noise.read_sigma, size=out.shape)
    return out


def compose_frames(obj_term: np.ndarray, ambient: SmoothField, background: SmoothField,
                   noise: NoiseModel) -> FrameSet:
    """Build the four noisy frames from an object term O (already rendered)."""
    obj_term = np.asarray(obj_term, dtype=np.float64)
    shape = obj_term.shape
    a = ambient.render(shape)
    b = background.render(shape)
    rngs = _frame_rngs(noise.seed, 4)
    gains = [1.0] * 4
    if ambient.flicker > 0:
        flick = np.random.Generator(np.random.Philox(np.random.SeedSequence(noise.seed).spawn(5)[4]))
        gains = list(flick.uniform(1 - ambient.flicker, 1 + ambient.flicker, size=4))
    clean = [gains[0] * a, gains[1] * a + b, gains[2] * a, gains[3] * a + b + obj_term]
    if noise.is_zero:
        frames = clean
    else:
        frames = [add_noise(c, noise, r) for c, r in zip(clean, rngs)]
    return FrameSet(frames[0], frames[1], frames[2], frames[3],
                    meta={"seed": noise.seed, "photon_scale": noise.photon_scale,
                          "read_sigma": noise.read_sigma, "flicker": ambient.flicker,
                          "gains": [float(g) for g in gains]})


def synthesize_frames(scene: SceneGeometry, settings: RenderSettings, obj: ObjectModel, pose: Pose,
                      ambient: SmoothField, background: SmoothField, noise: NoiseModel) -> FrameSet:
    """Render the object term for ``pose`` and compose the four capture frames."""
    return compose_frames(render_image(scene, settings, obj, pose), ambient, background, noise)


def background_pairs(background: SmoothField, ambient: SmoothField, noise: NoiseModel,
                     shape: tuple, n: int) -> list:
    """``n`` noisy (laser on, laser off) pairs captured with the object removed."""
    b = background.render(shape)
    a = ambient.render(shape)
    pairs = []
    for seed in np.random.SeedSequence(noise.seed).generate_state(n, dtype=np.uint64):
        sub = NoiseModel(noise.photon_scale, noise.read_sigma, int(seed))
        rng_on, rng_off = _frame_rngs(sub.seed, 2)
        if noise.is_zero:
            pairs.append((a + b, a.copy()))
        else:
            pairs.append((add_noise(a + b, sub, rng_on), add_noise(a, sub, rng_off)))
    return pairs


def _check_same(*imgs):
    shapes = {np.shape(i) for i in imgs}
    if len(shapes) != 1:
        raise ValueError(f"image shapes differ: {sorted(shapes)}")


def compute_measurement(frames: FrameSet, background_estimate) -> np.ndarray:
    """``M = i11 - i01 - B_hat``; negative values are kept."""
    _check_same(frames.i11, frames.i01, background_estimate)
    return frames.i11 - frames.i01 - np.asarray(background_estimate, dtype=np.float64)


def estimate_background(frame_pairs: Sequence) -> np.ndarray:
    """Mean of ``i10 - i00`` over calibration pairs."""
    if len(frame_pairs) == 0:
        raise ValueError("estimate_background needs at least one frame pair")
    _check_same(*[img for pair in frame_pairs for img in pair])
    acc = np.zeros(np.shape(frame_pairs[0][0]))
    for on, off in frame_pairs:
        acc += np.asarray(on, dtype=np.float64) - off
    return acc / len(frame_pairs)


@dataclass(frozen=True)
class LinearBackground:
    """``g(u, v) = a*u + b*v + c`` over raw integer pixel indices (u column, v row)."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.a, self.b, self.c)):
            raise ValueError("linear background coefficients must be finite")

    def render(self, shape: tuple) -> np.ndarray:
        h, w = shape
        v, u = np.mgrid[0:h, 0:w]
        return self.a * u + self.b * v + self.c


def _linear_basis(shape: tuple):
    h, w = shape
    if h < 2 or w < 2:
        raise ValueError(f"linear background fit needs at least a 2x2 image, got {w}x{h}")
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    return u, v


def fit_linear_background(image) -> LinearBackground:
    """Least-squares plane through all pixels.

    Coordinates are centered before forming the normal equations, which keeps
    them well conditioned; the intercept is shifted back afterwards.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("expected a 2-D image")
    u, v = _linear_basis(img.shape)
    uc = u - u.mean()
    vc = v - v.mean()
    X = np.stack([uc.ravel(), vc.ravel(), np.ones(img.size)], axis=1)
    a, b, c0 = np.linalg.solve(X.T @ X, X.T @ img.ravel())
    return LinearBackground(float(a), float(b), float(c0 - a * u.mean() - b * v.mean()))


def subtract_linear(image) -> np.ndarray:
    """Remove the least-squares plane; the residual is orthogonal to u, v and 1."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("expected a 2-D image")
    u, v = _linear_basis(img.shape)
    uc = u - u.mean()
    vc = v - v.mean()
    X = np.stack([uc.ravel(), vc.ravel(), np.ones(img.size)], axis=1)
    coef = np.linalg.solve(X.T @ X, X.T @ img.ravel())
    return img - (X @ coef).reshape(img.shape)


def downsample2x(image) -> np.ndarray:
    """2x2 box average; an odd trailing row or column is dropped."""
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape[0] // 2 * 2, img.shape[1] // 2 * 2
    if h == 0 or w == 0:
        raise ValueError("image too small to downsample")
    img = img[:h, :w]
    return 0.25 * (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2])
