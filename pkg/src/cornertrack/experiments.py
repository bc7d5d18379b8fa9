"""Synthetic experiment runners: sensitivity study, tracking studies, benchmarks.

Tracking experiments (numbered as in the hardware study they mimic):

1. known object, translation only
2. known object, translation and rotation
3. translation only, tracker uses a single-surfel proxy instead of the object
4. translation only without background calibration; runs the calibrated,
   uncorrected and linear-fit variants side by side

Every random draw comes from ``SeedSequence([seed, pose_index, trial])``, so a
run is reproducible from its spec and seed and independent of trial order.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .measure import (NoiseModel, SmoothField, background_pairs, compose_frames,
                      compute_measurement, estimate_background)
from .render import RenderSettings, render_image
from .scene import (DofMode, ObjectModel, Pose, SceneGeometry, load_object, load_scene,
                    make_car_object, make_l_object, make_planar_object, wrap_angle)
from .track import BackgroundMode, TrackerConfig, track_frame

log = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"
AXES = ("tx", "ty", "tz", "rx", "ry", "rz")


def resolve_path(name, base: Path | None = None) -> Path:
    """Find ``name`` as given, next to ``base``, or among the bundled data files."""
    p = Path(name)
    if p.is_absolute() or p.exists():
        return p
    for root in ([base] if base is not None else []) + [DATA_DIR]:
        if (root / p).exists():
            return root / p
    raise FileNotFoundError(f"cannot find {name}")


def build_object(desc, base: Path | None = None) -> ObjectModel:
    """Object from a spec entry: a file path, ``{"planar": {...}}`` or ``{"builtin": name}``."""
    if isinstance(desc, str):
        return load_object(resolve_path(desc, base))
    if "file" in desc:
        return load_object(resolve_path(desc["file"], base))
    if "planar" in desc:
        return make_planar_object(**desc["planar"])
    if "builtin" in desc:
        name = desc["builtin"]
        if name == "car":
            return make_car_object()
        if name == "L":
            return make_l_object(**desc.get("params", {}))
        if name == "square":
            return make_planar_object(0.1, 0.1, 10, 10, name="square")
    raise ValueError(f"cannot build object from {desc!r}")


def _schedule(desc, center) -> list:
    if isinstance(desc, list):
        return [Pose.from_dict({"mode": "pose6", **d}) for d in desc]
    grid = desc["grid"]
    c = np.array(grid.get("center", center), dtype=np.float64)
    poses = []
    for axis in grid["axes"]:
        k = AXES.index(axis)
        for off in grid["offsets"]:
            vec = np.concatenate([c, np.zeros(3)])
            vec[k] += off
            poses.append(Pose(tuple(vec[:3]), tuple(vec[3:]), DofMode.POSE6))
    return poses


@dataclass
class ExperimentSpec:
    scene: SceneGeometry
    obj: ObjectModel
    poses: list
    experiment: int = 1
    trials: int = 25
    noise: NoiseModel = field(default_factory=NoiseModel)
    ambient: SmoothField = field(default_factory=lambda: SmoothField.constant(0.2, flicker=0.05))
    background: SmoothField = field(default_factory=lambda: SmoothField(
        coeffs=np.array([[0.3, 0.1, 0.0], [0.08, 0.0, 0.0], [0.004, 0.0, 0.0]])))
    calibration_pairs: int = 300
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    init_cube: float = 0.3
    volume_center: tuple = (0.0, 0.5, 0.0)
    seed: int = 0
    out: Path | None = None
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.poses:
            raise ValueError("pose schedule is empty")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.experiment not in (1, 2, 3, 4):
            raise ValueError(f"unknown experiment {self.experiment}")
        if self.experiment == 2 and self.tracker.dof_mode is not DofMode.POSE6:
            raise ValueError("experiment 2 tracks rotation and needs dof_mode pose6")
        if self.tracker.dof_mode is DofMode.TRANSLATION3 and any(any(p.rotation) for p in self.poses):
            raise ValueError("translation-only tracking cannot use rotated truth poses")

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None, **overrides) -> "ExperimentSpec":
        d = {**d, **{k: v for k, v in overrides.items() if v is not None}}
        center = tuple(d.get("volume_center", (0.0, 0.5, 0.0)))
        experiment = int(d.get("experiment", 1))
        tracker = dict(d.get("tracker", {}))
        tracker.setdefault("init_translation", center)
        if experiment == 2:
            tracker.setdefault("dof_mode", "pose6")
        noise = d.get("noise", {})
        amb = d.get("ambient", {"level": 0.2, "flicker": 0.05})
        kw = {}
        if "background" in d:
            kw["background"] = SmoothField(coeffs=np.array(d["background"]["coeffs"], dtype=np.float64))
        return cls(
            scene=load_scene(resolve_path(d["scene"], base)),
            obj=build_object(d["object"], base),
            poses=_schedule(d["poses"], center),
            experiment=experiment,
            trials=int(d.get("trials", 25)),
            noise=NoiseModel(float(noise.get("photon_scale", 1e4)), float(noise.get("read_sigma", 1e-4))),
            ambient=SmoothField.constant(float(amb.get("level", 0.0)), float(amb.get("flicker", 0.0))),
            calibration_pairs=int(d.get("calibration_pairs", 300)),
            tracker=TrackerConfig.from_dict(tracker),
            init_cube=float(d.get("init_cube", 0.3)),
            volume_center=center,
            seed=int(d.get("seed", 0)),
            out=Path(d["out"]) if d.get("out") else None,
            source=d,
            **kw,
        )

    @classmethod
    def load(cls, path, **overrides) -> "ExperimentSpec":
        path = resolve_path(path)
        return cls.from_dict(json.loads(Path(path).read_text()), base=path.parent, **overrides)


@dataclass
class PoseStats:
    variant: str
    pose_index: int
    truth: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    rms: np.ndarray
    mean_iterations: float
    median_iterations: float
    failures: int
    trials: int
    estimates: np.ndarray
    iterations: np.ndarray


@dataclass
class ExperimentResult:
    experiment: int
    stats: list
    wall_clock_s: float = 0.0
    variant_time_s: dict = field(default_factory=dict)

    def variants(self) -> list:
        seen = []
        for s in self.stats:
            if s.variant not in seen:
                seen.append(s.variant)
        return seen

    def for_variant(self, variant: str) -> list:
        return [s for s in self.stats if s.variant == variant]

    def pooled_rms(self, variant: str, axes=(0, 1, 2)) -> np.ndarray:
        """Per-axis RMS error over every trial of every pose."""
        err = np.concatenate([_errors(s.estimates, s.truth) for s in self.for_variant(variant)])
        return np.sqrt(np.nanmean(err[:, list(axes)] ** 2, axis=0))

    def pooled_std(self, variant: str, axes=(0, 1, 2)) -> np.ndarray:
        """Root-mean-square of the per-pose standard deviations."""
        s = np.array([st.std[list(axes)] for st in self.for_variant(variant)])
        return np.sqrt(np.mean(s**2, axis=0))

    def max_std(self, variant: str, axes=(0, 1, 2)) -> np.ndarray:
        return np.max([st.std[list(axes)] for st in self.for_variant(variant)], axis=0)

    def all_iterations(self, variant: str) -> np.ndarray:
        return np.concatenate([s.iterations for s in self.for_variant(variant)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for s in self.stats:
            w.writerow([self.experiment, s.variant, s.pose_index, s.trials, s.failures]
                       + [_fmt(x) for x in s.truth] + [_fmt(x) for x in s.mean]
                       + [_fmt(x) for x in s.std] + [_fmt(x) for x in s.rms]
                       + [_fmt(s.mean_iterations)])
        return buf.getvalue()


CSV_COLUMNS = (["experiment", "variant", "pose_index", "trials", "failures"]
               + [f"truth_{a}" for a in AXES] + [f"mean_{a}" for a in AXES]
               + [f"std_{a}" for a in AXES] + [f"rms_{a}" for a in AXES] + ["mean_iterations"])


def _fmt(x: float) -> str:
    return repr(float(x))


def read_results_csv(text: str) -> list:
    """Parse a tracking CSV back into dictionaries with typed values."""
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        out = {}
        for k, v in row.items():
            if k == "variant":
                out[k] = v
            elif k in ("experiment", "pose_index", "trials", "failures"):
                out[k] = int(v)
            else:
                out[k] = float(v)
        rows.append(out)
    return rows


def _errors(estimates: np.ndarray, truth: np.ndarray) -> np.ndarray:
    err = estimates - truth
    rot = err[:, 3:]
    ok = np.isfinite(rot)  # failed trials stay NaN
    rot[ok] = [wrap_angle(a) for a in rot[ok]]
    return err


def _variants(spec: ExperimentSpec) -> list:
    if spec.experiment == 4:
        return [("calibrated", BackgroundMode.CALIBRATED), ("none", BackgroundMode.NONE),
                ("linear_fit", BackgroundMode.LINEAR_FIT)]
    return [(spec.tracker.background_mode.value, spec.tracker.background_mode)]


def signal_settings(spec: ExperimentSpec) -> RenderSettings:
    """Settings that put the object term's peak at 1 intensity unit at the volume center."""
    ref = render_image(spec.scene, RenderSettings(), spec.obj, Pose(spec.volume_center))
    peak = float(ref.max())
    if peak <= 0:
        raise ValueError("object at the tracking volume center does not light the wall")
    return RenderSettings(rho0=1.0 / peak)


def run_tracking(spec: ExperimentSpec, progress=None) -> ExperimentResult:
    t_start = time.perf_counter()
    mode = spec.tracker.dof_mode
    sim_settings = signal_settings(spec)
    track_settings = RenderSettings()
    tracker_obj = spec.obj.single_surfel_proxy() if spec.experiment == 3 else spec.obj
    variants = _variants(spec)
    shape = spec.scene.shape

    b_hat = None
    if any(m is BackgroundMode.CALIBRATED for _, m in variants):
        calib_noise = replace(spec.noise, seed=int(np.random.SeedSequence([spec.seed, 2**32 - 1]).generate_state(1)[0]))
        b_hat = estimate_background(background_pairs(spec.background, spec.ambient, calib_noise,
                                                     shape, spec.calibration_pairs))
    center = np.array(spec.volume_center)
    stats = []
    variant_time = {name: 0.0 for name, _ in variants}
    for pi, truth in enumerate(spec.poses):
        obj_term = render_image(spec.scene, sim_settings, spec.obj, truth)
        est = {name: np.full((spec.trials, 6), np.nan) for name, _ in variants}
        its = {name: np.zeros(spec.trials, dtype=int) for name, _ in variants}
        fails = {name: 0 for name, _ in variants}
        for t in range(spec.trials):
            ss = np.random.SeedSequence([spec.seed, pi, t])
            noise_seed, init_seed = (int(x) for x in ss.generate_state(2, dtype=np.uint64))
            frames = compose_frames(obj_term, spec.ambient, spec.background,
                                    replace(spec.noise, seed=noise_seed))
            init_rng = np.random.Generator(np.random.Philox(init_seed))
            init_t = center + init_rng.uniform(-spec.init_cube / 2, spec.init_cube / 2, 3)
            p0 = Pose(tuple(init_t), (0.0, 0.0, 0.0), mode)
            for name, bmode in variants:
                bg = b_hat if bmode is BackgroundMode.CALIBRATED else np.zeros(shape)
                m = compute_measurement(frames, bg)
                cfg = replace(spec.tracker, background_mode=bmode)
                t0 = time.perf_counter()
                try:
                    res = track_frame(spec.scene, track_settings, tracker_obj, m, cfg, p0)
                except Exception as exc:  # noqa: BLE001 - a failed trial is recorded, not fatal
                    log.warning("pose %d trial %d (%s) failed: %s", pi, t, name, exc)
                    fails[name] += 1
                    continue
                finally:
                    variant_time[name] += time.perf_counter() - t0
                est[name][t] = np.concatenate([res.pose.translation, res.pose.rotation])
                its[name][t] = res.iterations
                if not res.converged:
                    fails[name] += 1
            if progress is not None:
                progress(pi, t)
        truth_vec = np.concatenate([truth.translation, truth.rotation])
        for name, _ in variants:
            e = est[name]
            err = _errors(e, truth_vec)
            n_ok = int(np.sum(np.all(np.isfinite(e), axis=1)))
            stats.append(PoseStats(
                variant=name, pose_index=pi, truth=truth_vec,
                mean=np.nanmean(e, axis=0) if n_ok else np.full(6, np.nan),
                std=np.nanstd(e, axis=0, ddof=1) if n_ok > 1 else np.zeros(6),
                rms=np.sqrt(np.nanmean(err**2, axis=0)) if n_ok else np.full(6, np.nan),
                mean_iterations=float(np.mean(its[name])),
                median_iterations=float(np.median(its[name])),
                failures=fails[name], trials=spec.trials, estimates=e, iterations=its[name]))
    return ExperimentResult(spec.experiment, stats, time.perf_counter() - t_start, variant_time)


def write_tracking_outputs(result: ExperimentResult, spec: ExperimentSpec, out: Path,
                           figure: bool = True) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / f"experiment{result.experiment}.csv",
             "timing": out / f"experiment{result.experiment}_timing.json"}
    paths["csv"].write_text(result.to_csv())
    timing = {"wall_clock_s": result.wall_clock_s, "variant_time_s": result.variant_time_s,
              "trials": spec.trials, "poses": len(spec.poses)}
    paths["timing"].write_text(json.dumps(timing, indent=2) + "\n")
    if figure:
        from .plotting import tracking_figure
        paths["figure"] = tracking_figure(result, out / f"experiment{result.experiment}.png")
    return paths


# ---------------------------------------------------------------------------
# Sensitivity study


@dataclass
class DiffStudy:
    reference: np.ndarray
    differences: dict
    shape_difference: np.ndarray
    rows: list

    def row(self, axis: str) -> dict:
        return next(r for r in self.rows if r["axis"] == axis)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=DIFF_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
        return buf.getvalue()


DIFF_COLUMNS = ["axis", "delta", "unit", "peak_abs_diff", "peak_reference", "relative_change",
                "relative_per_unit", "amplification"]


def amplification_factor(ratio: float) -> int:
    """Largest 1-2-5 display gain not exceeding ``1/ratio`` (0 for a zero difference)."""
    if ratio <= 0:
        return 0
    target = 1.0 / ratio
    best = 1
    for e in range(0, 12):
        for m in (1, 2, 5):
            if m * 10**e <= target:
                best = m * 10**e
    return best


def diff_study(scene: SceneGeometry, obj: ObjectModel, base_pose: Pose,
               delta_translation: float = 0.025, delta_rotation: float = 7.5,
               alternate: ObjectModel | None = None,
               settings: RenderSettings = RenderSettings()) -> DiffStudy:
    """Reference image, six signed difference images S(p + d) - S(p - d), and a shape change."""
    ref = render_image(scene, settings, obj, base_pose)
    peak = float(ref.max())
    base = np.concatenate([base_pose.translation, base_pose.rotation])
    diffs, rows = {}, []
    for k, axis in enumerate(AXES):
        d = delta_translation if k < 3 else delta_rotation
        plus, minus = base.copy(), base.copy()
        plus[k] += d
        minus[k] -= d
        diff = (render_image(scene, settings, obj, Pose.from_vector(plus, DofMode.POSE6))
                - render_image(scene, settings, obj, Pose.from_vector(minus, DofMode.POSE6)))
        diffs[axis] = diff
        pk = float(np.abs(diff).max())
        rel = pk / peak
        span = 2 * d * (100.0 if k < 3 else 1.0)
        rows.append({"axis": axis, "delta": float(d), "unit": "m" if k < 3 else "deg",
                     "peak_abs_diff": pk, "peak_reference": peak, "relative_change": rel,
                     "relative_per_unit": rel / span if span > 0 else 0.0,
                     "amplification": amplification_factor(rel)})
    if alternate is None:
        w = math.sqrt(2 * obj.total_area)
        alternate = make_planar_object(w, obj.total_area / w, 14, 7, name="rectangle")
    shape_diff = render_image(scene, settings, alternate, base_pose) - ref
    pk = float(np.abs(shape_diff).max())
    rows.append({"axis": "shape", "delta": 0.0, "unit": "", "peak_abs_diff": pk,
                 "peak_reference": peak, "relative_change": pk / peak,
                 "relative_per_unit": pk / peak, "amplification": amplification_factor(pk / peak)})
    return DiffStudy(ref, diffs, shape_diff, rows)


# ---------------------------------------------------------------------------
# Benchmark


def time_render(scene: SceneGeometry, obj: ObjectModel, pose: Pose, repeats: int = 5) -> float:
    """Best-of-``repeats`` wall-clock seconds for one render (after a warm-up call)."""
    settings = RenderSettings()
    render_image(scene, settings, obj, pose)
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        render_image(scene, settings, obj, pose)
        best = min(best, time.perf_counter() - t0)
    return best


def bench(scene: SceneGeometry, obj: ObjectModel, sizes: list, surfel_counts: list,
          pose: Pose | None = None, repeats: int = 5) -> list:
    """Render timings over pixel-count and surfel-count series.

    ``sizes`` are ``(width, height)`` pairs rendered with ``obj``; ``surfel_counts``
    are rendered at the scene's own resolution with the first n surfels of a
    tiled copy of ``obj``.  Each row carries the time ratio and count ratio
    relative to the previous row of its series.
    """
    from .scene import OrthographicRect, Pinhole

    if not sizes and not surfel_counts:
        raise ValueError("bench needs at least one size")
    pose = pose or Pose((0.0, 0.5, 0.0))
    rows = []
    prev = None
    for w, h in sizes:
        g = scene.grid
        if isinstance(g, OrthographicRect):
            grid = replace(g, width=int(w), height=int(h))
        else:
            sx, sy = w / g.width, h / g.height
            grid = Pinhole(int(w), int(h), g.focal_px * sx,
                           (g.principal_point[0] * sx, g.principal_point[1] * sy), g.look_at, g.up)
        sc = scene.with_grid(grid)
        t = time_render(sc, obj, pose, repeats)
        count = int(w) * int(h)
        rows.append(_bench_row("pixels", count, len(obj), t, prev))
        prev = (count, t)
    prev = None
    for n in surfel_counts:
        reps = -(-int(n) // len(obj))
        idx = np.arange(reps * len(obj))[: int(n)] % len(obj)
        sub = obj.subset(idx)
        t = time_render(scene, sub, pose, repeats)
        rows.append(_bench_row("surfels", scene.width * scene.height, int(n), t, prev, by_surfels=True))
        prev = (int(n), t)
    return rows


def _bench_row(series, pixels, surfels, t, prev, by_surfels=False):
    count = surfels if by_surfels else pixels
    return {"series": series, "pixels": pixels, "surfels": surfels, "seconds": t,
            "count_ratio": count / prev[0] if prev else "",
            "time_ratio": t / prev[1] if prev else ""}


BENCH_COLUMNS = ["series", "pixels", "surfels", "seconds", "count_ratio", "time_ratio"]


def bench_csv(rows: list) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()
