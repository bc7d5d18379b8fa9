"""Pose recovery by analysis-by-synthesis.

The cost compares a measurement M with a simulation S(p) after projecting S onto
M with the best global scale::

    gamma(a, b) = a.b / |b|^2
    f(p) = |M - gamma(M, S(p)) S(p)|^2

so absolute radiometry (laser power, albedo, camera gain) never matters.  The
optimizer is Levenberg-Marquardt on the residual vector ``M - gamma S``, with
gamma recomputed at every probe and forward-difference Jacobians (n_dof + 1
renders each).
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .measure import subtract_linear
from .render import RenderSettings, SingularityError, render_image
from .scene import DofMode, ObjectModel, Pose, SceneGeometry

log = logging.getLogger(__name__)

MAX_DAMPING = 1e12


class DegenerateSimulationError(ArithmeticError):
    """The simulated image is identically zero (object invisible to the wall)."""


class BackgroundMode(str, enum.Enum):
    NONE = "none"
    CALIBRATED = "calibrated"
    LINEAR_FIT = "linear_fit"


@dataclass(frozen=True)
class CostEvaluation:
    value: float
    gamma: float
    residual: np.ndarray


@dataclass(frozen=True)
class TrackerConfig:
    dof_mode: DofMode = DofMode.TRANSLATION3
    background_mode: BackgroundMode = BackgroundMode.CALIBRATED
    fd_step_translation: float = 1e-3
    fd_step_rotation: float = 0.1
    lm_initial_damping: float = 1e-3
    lm_damping_up: float = 10.0
    lm_damping_down: float = 0.1
    max_iterations: int = 50
    cost_tolerance: float = 1e-8
    step_tolerance: float = 1e-6
    init_translation: tuple = (0.0, 0.5, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "dof_mode", DofMode(self.dof_mode))
        object.__setattr__(self, "background_mode", BackgroundMode(self.background_mode))
        object.__setattr__(self, "init_translation", tuple(float(x) for x in self.init_translation))
        for name in ("fd_step_translation", "fd_step_rotation", "lm_initial_damping",
                     "cost_tolerance", "step_tolerance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.lm_damping_up > 1 or not 0 < self.lm_damping_down < 1:
            raise ValueError("damping factors must satisfy up > 1 > down > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")

    @property
    def fd_steps(self) -> np.ndarray:
        steps = [self.fd_step_translation] * 3
        if self.dof_mode is DofMode.POSE6:
            steps += [self.fd_step_rotation] * 3
        return np.array(steps)

    def default_pose(self) -> Pose:
        return Pose(self.init_translation, (0.0, 0.0, 0.0), self.dof_mode)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dof_mode"] = self.dof_mode.value
        d["background_mode"] = self.background_mode.value
        d["init_translation"] = list(self.init_translation)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrackerConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown tracker config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrackResult:
    pose: Pose
    iterations: int
    final_cost: float
    final_gamma: float
    converged: bool
    simulations_used: int
    message: str = ""
    accepted_costs: list = field(default_factory=list)
    rejected_steps: int = 0
    config: TrackerConfig | None = None

    def to_dict(self) -> dict:
        return {
            "pose": self.pose.to_dict(),
            "iterations": self.iterations,
            "final_cost": self.final_cost,
            "final_gamma": self.final_gamma,
            "converged": self.converged,
            "simulations_used": self.simulations_used,
            "rejected_steps": self.rejected_steps,
            "message": self.message,
            "config": self.config.to_dict() if self.config is not None else None,
        }


def gamma(a, b) -> float:
    """Scale that best projects ``b`` onto ``a`` in the least-squares sense."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"image sizes differ: {a.size} vs {b.size}")
    bb = float(b @ b)
    if bb == 0.0:
        raise DegenerateSimulationError("simulated image is zero; the object is invisible to the wall")
    return float(a @ b) / bb


def cost(measurement, simulated) -> CostEvaluation:
    m = np.asarray(measurement, dtype=np.float64)
    s = np.asarray(simulated, dtype=np.float64)
    g = gamma(m, s)
    r = m - g * s
    flat = r.ravel()
    return CostEvaluation(float(flat @ flat), g, r)


def preprocess(image, mode: BackgroundMode) -> np.ndarray:
    if BackgroundMode(mode) is BackgroundMode.LINEAR_FIT:
        return subtract_linear(image)
    return np.asarray(image, dtype=np.float64)


def cost_with_background_mode(measurement, simulated, mode: BackgroundMode) -> CostEvaluation:
    return cost(preprocess(measurement, mode), preprocess(simulated, mode))


class Objective:
    """Cost of a pose hypothesis against one measurement.

    Holds the scene, object and preprocessed measurement, and counts renders.
    """

    def __init__(self, scene: SceneGeometry, settings: RenderSettings, obj: ObjectModel,
                 measurement, config: TrackerConfig):
        self.scene = scene
        self.settings = settings
        self.obj = obj
        self.config = config
        self.measurement = np.asarray(measurement, dtype=np.float64)
        if self.measurement.shape != scene.shape:
            raise ValueError(f"measurement is {self.measurement.shape}, scene grid is {scene.shape}")
        self._m = preprocess(self.measurement, config.background_mode)
        self.renders = 0

    def simulate(self, pose: Pose) -> np.ndarray:
        self.renders += 1
        return render_image(self.scene, self.settings, self.obj, pose)

    def __call__(self, pose: Pose) -> CostEvaluation:
        s = preprocess(self.simulate(pose), self.config.background_mode)
        return cost(self._m, s)

    def pose(self, vec) -> Pose:
        return Pose.from_vector(vec, self.config.dof_mode)

    def residual(self, vec) -> np.ndarray:
        return self(self.pose(vec)).residual.ravel()


def objective(scene: SceneGeometry, settings: RenderSettings, obj: ObjectModel, measurement,
              config: TrackerConfig, p: Pose) -> CostEvaluation:
    return Objective(scene, settings, obj, measurement, config)(p)


def numeric_jacobian(fn, p: Pose, config: TrackerConfig):
    """Forward-difference Jacobian of the residual map at ``p``.

    ``fn`` maps a pose to a :class:`CostEvaluation`.  Returns
    ``(J, base_evaluation)`` with ``J`` of shape ``(n_pixels, n_dof)``, using
    exactly ``n_dof + 1`` evaluations.
    """
    x0 = p.to_vector()
    steps = config.fd_steps
    if len(steps) != len(x0):
        raise ValueError(f"pose has {len(x0)} parameters, config expects {len(steps)}")
    try:
        base = fn(p)
    except DegenerateSimulationError as exc:
        raise DegenerateSimulationError(f"base pose {x0.tolist()}: {exc}") from None
    r0 = base.residual.ravel()
    J = np.empty((r0.size, len(x0)))
    for k, h in enumerate(steps):
        x = x0.copy()
        x[k] += h
        probe = Pose.from_vector(x, config.dof_mode)
        try:
            rk = fn(probe).residual.ravel()
        except DegenerateSimulationError as exc:
            raise DegenerateSimulationError(f"probe {k} at {x.tolist()}: {exc}") from None
        J[:, k] = (rk - r0) / h
    return J, base


def _solve_damped(JtJ: np.ndarray, g: np.ndarray, lam: float):
    d = np.diag(JtJ).copy()
    # a zero column would make Marquardt scaling singular
    floor = 1e-12 * max(d.max(), 1e-300)
    d = np.maximum(d, floor)
    A = JtJ + lam * np.diag(d)
    try:
        step = np.linalg.solve(A, -g)
    except np.linalg.LinAlgError:
        return None
    return step if np.all(np.isfinite(step)) else None


def _evaluate(fn, pose: Pose):
    try:
        ev = fn(pose)
    except (DegenerateSimulationError, SingularityError):
        return None
    return ev if math.isfinite(ev.value) else None


def levenberg_marquardt(fn, p0: Pose, config: TrackerConfig) -> TrackResult:
    """Damped Gauss-Newton on ``fn``'s residual, starting at ``p0``.

    Each iteration builds a fresh Jacobian, then tries steps from
    ``(J'J + lam diag(J'J)) d = -J'r``, raising ``lam`` and re-solving with the
    same Jacobian until the cost decreases.  Stops on a small step, a small
    relative decrease, ``max_iterations``, or ``lam`` exceeding 1e12.
    """
    mode = config.dof_mode
    if p0.mode is not mode:
        p0 = Pose(p0.translation, p0.rotation if mode is DofMode.POSE6 else (0.0, 0.0, 0.0), mode)
    x = p0.to_vector()
    lam = config.lm_initial_damping
    calls = 0

    def counted(pose):
        nonlocal calls
        calls += 1
        return fn(pose)

    rejected = 0
    accepted = []
    best_pose, best_cost, best_gamma = p0, math.inf, math.nan
    converged = False
    message = "max_iterations reached"
    iterations = 0

    while iterations < config.max_iterations:
        iterations += 1
        pose = Pose.from_vector(x, mode)
        try:
            J, base = numeric_jacobian(counted, pose, config)
        except (DegenerateSimulationError, SingularityError) as exc:
            message = f"jacobian failed: {exc}"
            break
        f0 = base.value
        if not math.isfinite(f0):
            message = "non-finite cost"
            break
        if f0 < best_cost:
            best_pose, best_cost, best_gamma = pose, f0, base.gamma
        if not accepted:
            accepted.append(f0)
        if f0 == 0.0:
            converged, message = True, "zero cost"
            break

        r = base.residual.ravel()
        JtJ = J.T @ J
        g = J.T @ r
        step_taken = False
        while True:
            step = _solve_damped(JtJ, g, lam)
            if step is not None and np.linalg.norm(step) < config.step_tolerance:
                converged, message = True, "step below tolerance"
                break
            trial = None
            if step is not None:
                trial_pose = Pose.from_vector(x + step, mode)
                trial = _evaluate(counted, trial_pose)
            if trial is not None and trial.value < f0:
                lam = max(lam * config.lm_damping_down, 1e-15)
                x = trial_pose.to_vector()
                accepted.append(trial.value)
                if trial.value < best_cost:
                    best_pose, best_cost, best_gamma = trial_pose, trial.value, trial.gamma
                step_taken = True
                break
            rejected += 1
            lam *= config.lm_damping_up
            if lam > MAX_DAMPING:
                break
        if converged:
            break
        if not step_taken:
            message = "damping exceeded 1e12 without decrease"
            break
        decrease = (f0 - accepted[-1]) / f0
        if decrease < config.cost_tolerance:
            converged, message = True, "relative cost decrease below tolerance"
            break

    log.debug("LM finished after %d iterations: %s (cost %.3g)", iterations, message, best_cost)
    return TrackResult(pose=best_pose.canonical(), iterations=iterations, final_cost=float(best_cost),
                       final_gamma=float(best_gamma), converged=converged, simulations_used=calls,
                       message=message, accepted_costs=accepted, rejected_steps=rejected,
                       config=config)


def track_frame(scene: SceneGeometry, settings: RenderSettings, obj: ObjectModel, measurement,
                config: TrackerConfig, warm_start: Pose | None = None) -> TrackResult:
    """Recover the pose for one measurement, from ``warm_start`` or the configured default."""
    fn = Objective(scene, settings, obj, measurement, config)
    p0 = warm_start if warm_start is not None else config.default_pose()
    return levenberg_marquardt(fn, p0, config)


def with_mode(config: TrackerConfig, **changes) -> TrackerConfig:
    return replace(config, **changes)
