import json
import math

import numpy as np
import pytest

from cornertrack.experiments import DATA_DIR
from cornertrack.measure import LinearBackground
from cornertrack.render import RenderSettings, render_image
from cornertrack.scene import DofMode, Pose, load_scene, make_car_object
from cornertrack.track import (
    BackgroundMode,
    CostEvaluation,
    DegenerateSimulationError,
    Objective,
    TrackerConfig,
    TrackResult,
    cost,
    cost_with_background_mode,
    gamma,
    levenberg_marquardt,
    numeric_jacobian,
    objective,
    track_frame,
)

from . import oracles

T3 = TrackerConfig()
P6 = TrackerConfig(dof_mode=DofMode.POSE6)
TRUTH = Pose((0.03, 0.5, -0.02), mode=DofMode.TRANSLATION3)


@pytest.fixture(scope="module")
def noiseless(desk_scene, square):
    return render_image(desk_scene, RenderSettings(), square, TRUTH)


def _objective(scene, obj, m, config=T3, settings=RenderSettings()):
    return Objective(scene, settings, obj, m, config)


# -- gamma and cost ------------------------------------------------------------


def test_gamma_examples(rng):
    x = rng.normal(size=(4, 5))
    assert gamma(x, x) == pytest.approx(1.0, rel=1e-15)
    assert gamma(x, 2 * x) == pytest.approx(0.5, rel=1e-15)
    assert gamma(np.array([1.0, 0.0]), np.array([0.0, 3.0])) == 0.0
    with pytest.raises(DegenerateSimulationError):
        gamma(x, np.zeros_like(x))
    with pytest.raises(ValueError):
        gamma(np.ones(3), np.ones(4))


def test_gamma_minimizes(rng):
    a, b = rng.normal(size=30), rng.normal(size=30)
    g = gamma(a, b)
    f = lambda t: float(np.sum((a - t * b) ** 2))  # noqa: E731
    assert f(g) <= min(f(g + 1e-6), f(g - 1e-6))


def test_cost_examples(rng):
    s = rng.uniform(size=(6, 7))
    assert cost(3.5 * s, s).value == pytest.approx(0.0, abs=1e-25)
    m = np.array([1.0, 0.0, 2.0, 0.0])
    ev = cost(m, np.array([0.0, 5.0, 0.0, 1.0]))
    assert ev.gamma == 0.0 and ev.value == pytest.approx(float(m @ m))
    with pytest.raises(DegenerateSimulationError):
        cost(m, np.zeros(4))


def test_cost_matches_exact_oracle(rng):
    for _ in range(50):
        m, s = rng.normal(size=8), rng.uniform(0.1, 1, size=8)
        want, g = oracles.projection_cost(m, s)
        ev = cost(m, s)
        assert ev.value == pytest.approx(want, rel=1e-12)
        assert ev.gamma == pytest.approx(g, rel=1e-14)
        assert ev.value == pytest.approx(float(ev.residual.ravel() @ ev.residual.ravel()), rel=1e-9)


def test_background_modes(rng):
    s = rng.uniform(size=(12, 15))
    plane = LinearBackground(0.02, -0.01, 0.4).render((12, 15))
    assert cost_with_background_mode(2.0 * s + plane, s, BackgroundMode.LINEAR_FIT).value < 1e-24
    assert cost_with_background_mode(2.0 * s + plane, s, BackgroundMode.NONE).value > 1e-3
    m = rng.normal(size=(12, 15))
    a = cost_with_background_mode(m, s, BackgroundMode.NONE)
    b = cost_with_background_mode(m, s, BackgroundMode.CALIBRATED)
    assert a.value == b.value and a.gamma == b.gamma
    with pytest.raises(ValueError):
        cost_with_background_mode(np.ones((1, 5)), np.ones((1, 5)), BackgroundMode.LINEAR_FIT)


# -- objective -------------------------------------------------------------------


def test_objective_closure(desk_scene, square, noiseless):
    ev = objective(desk_scene, RenderSettings(), square, noiseless, T3, TRUTH)
    assert ev.value <= 1e-18 * float(np.sum(noiseless**2))
    assert ev.gamma == pytest.approx(1.0, rel=1e-14)


def test_objective_identifiable_in_y(desk_scene, square, noiseless):
    f0 = objective(desk_scene, RenderSettings(), square, noiseless, T3, TRUTH).value
    off = Pose((0.03, 0.51, -0.02), mode=DofMode.TRANSLATION3)
    assert objective(desk_scene, RenderSettings(), square, noiseless, T3, off).value > f0


def test_objective_renders_once(desk_scene, square, noiseless):
    fn = _objective(desk_scene, square, noiseless)
    fn(TRUTH)
    assert fn.renders == 1


def test_objective_shape_mismatch(desk_scene, square):
    with pytest.raises(ValueError):
        _objective(desk_scene, square, np.zeros((3, 3)))


def test_single_surfel_proxy_leaves_positive_minimum(desk_scene, square, noiseless):
    proxy = square.single_surfel_proxy()
    res = track_frame(desk_scene, RenderSettings(), proxy, noiseless, T3,
                      Pose((0.0, 0.45, 0.0), mode=DofMode.TRANSLATION3))
    norm2 = float(np.sum(noiseless**2))
    assert 0 < res.final_cost < 1e-2 * norm2
    assert np.linalg.norm(np.array(res.pose.translation) - TRUTH.translation) < 0.01


# -- Jacobian --------------------------------------------------------------------


def test_jacobian_render_budget(desk_scene, square, noiseless):
    for cfg, n in ((T3, 4), (P6, 7)):
        fn = _objective(desk_scene, square, noiseless, cfg)
        p = Pose(TRUTH.translation, (0, 0, 0), cfg.dof_mode)
        J, base = numeric_jacobian(fn, p, cfg)
        assert fn.renders == n
        assert J.shape == (noiseless.size, n - 1)
        assert isinstance(base, CostEvaluation)


def test_jacobian_columns_are_forward_differences(desk_scene, square, noiseless):
    fn = _objective(desk_scene, square, 1.3 * noiseless + 0.01)
    p = Pose((0.0, 0.48, 0.01), mode=DofMode.TRANSLATION3)
    J, base = numeric_jacobian(fn, p, T3)
    x = p.to_vector()
    x[1] += T3.fd_step_translation
    probe = fn(Pose.from_vector(x, DofMode.TRANSLATION3)).residual.ravel()
    np.testing.assert_array_equal(J[:, 1], (probe - base.residual.ravel()) / T3.fd_step_translation)


def test_jacobian_richardson_consistency(desk_scene, square, noiseless):
    fn = _objective(desk_scene, square, noiseless)
    y0 = 0.52

    def c(t):
        return fn(Pose((0.03, y0 + t, -0.02), mode=DofMode.TRANSLATION3)).value

    # centered reference, Richardson-extrapolated
    d = lambda h: (c(h) - c(-h)) / (2 * h)  # noqa: E731
    ref = (4 * d(5e-5) - d(1e-4)) / 3
    f0 = c(0.0)
    e1 = abs((c(1e-3) - f0) / 1e-3 - ref)
    e2 = abs((c(5e-4) - f0) / 5e-4 - ref)
    assert 1.6 < e1 / e2 < 2.4


def test_y_rotation_column_weak(fig2_scene, square):
    m = render_image(fig2_scene, RenderSettings(), square, Pose((0, 0.5, 0)))
    fn = _objective(fig2_scene, square, m, P6)
    J, _ = numeric_jacobian(fn, Pose((0, 0.5, 0), (0, 0, 0), DofMode.POSE6), P6)
    norms = np.linalg.norm(J, axis=0)
    assert min(norms[:3]) > 1e3 * norms[4]
    assert min(norms[3], norms[5]) > 1e2 * norms[4]


def test_duplicate_pixels_leave_step_unchanged(desk_scene, square, noiseless):
    meas = noiseless * 1.1

    def doubled(pose):
        s = render_image(desk_scene, RenderSettings(), square, pose)
        return cost(np.concatenate([meas, meas]), np.concatenate([s, s]))

    fn = _objective(desk_scene, square, meas)
    p = Pose((0.0, 0.47, 0.0), mode=DofMode.TRANSLATION3)
    J1, b1 = numeric_jacobian(fn, p, T3)
    J2, b2 = numeric_jacobian(doubled, p, T3)
    r1, r2 = b1.residual.ravel(), b2.residual.ravel()
    np.testing.assert_allclose(J2.T @ J2, 2 * J1.T @ J1, rtol=1e-10)
    np.testing.assert_allclose(J2.T @ r2, 2 * J1.T @ r1, rtol=1e-8)
    s1 = np.linalg.solve(J1.T @ J1, -J1.T @ r1)
    s2 = np.linalg.solve(J2.T @ J2, -J2.T @ r2)
    np.testing.assert_allclose(s2, s1, rtol=1e-8)


def test_degenerate_probe_is_named():
    def fn(pose):
        if pose.translation[2] > 0:
            raise DegenerateSimulationError("simulated image is zero")
        return CostEvaluation(1.0, 1.0, np.ones(3))

    with pytest.raises(DegenerateSimulationError, match="probe 2"):
        numeric_jacobian(fn, Pose((0, 0.5, 0), mode=DofMode.TRANSLATION3), T3)


def test_degenerate_base(desk_scene, square):
    fn = _objective(desk_scene, square, np.ones(desk_scene.shape))
    with pytest.raises(DegenerateSimulationError, match="base pose"):
        numeric_jacobian(fn, Pose((0, -0.5, 0), mode=DofMode.TRANSLATION3), T3)


# -- Levenberg-Marquardt ---------------------------------------------------------


def test_lm_from_truth(desk_scene, square, noiseless):
    res = track_frame(desk_scene, RenderSettings(), square, noiseless, T3, TRUTH)
    assert res.converged
    assert res.iterations <= 2
    assert res.final_cost <= 1e-12 * float(np.sum(noiseless**2))


def test_lm_recovers_from_cube(desk_scene, square, noiseless):
    rng = np.random.default_rng(5)
    for _ in range(4):
        p0 = Pose(tuple(np.array([0, 0.5, 0]) + rng.uniform(-0.15, 0.15, 3)), mode=DofMode.TRANSLATION3)
        res = track_frame(desk_scene, RenderSettings(), square, noiseless, T3, p0)
        assert res.converged, res.message
        assert np.max(np.abs(np.array(res.pose.translation) - TRUTH.translation)) < 1e-3
        assert res.iterations <= 10


def test_lm_budget_and_monotone(desk_scene, square, noiseless):
    fn = _objective(desk_scene, square, noiseless)
    res = levenberg_marquardt(fn, Pose((0.1, 0.6, 0.08), mode=DofMode.TRANSLATION3), T3)
    assert res.converged
    assert res.simulations_used == fn.renders
    trials = (len(res.accepted_costs) - 1) + res.rejected_steps
    assert res.simulations_used == res.iterations * 4 + trials
    assert np.all(np.diff(res.accepted_costs) < 0)
    assert res.final_cost == min(res.accepted_costs)


def test_lm_pose6_budget(desk_scene, noiseless):
    car = make_car_object(pitch_m=0.04)
    truth = Pose((0.0, 0.5, 0.0), (10, 0, -5), DofMode.POSE6)
    m = render_image(desk_scene, RenderSettings(), car, truth)
    fn = _objective(desk_scene, car, m, P6)
    res = levenberg_marquardt(fn, Pose((0.01, 0.52, 0.0), (5, 0, 0), DofMode.POSE6), P6)
    assert res.simulations_used == res.iterations * 7 + len(res.accepted_costs) - 1 + res.rejected_steps
    assert res.converged


def test_lm_measurement_scaling(desk_scene, square, noiseless):
    p0 = Pose((-0.05, 0.6, 0.05), mode=DofMode.TRANSLATION3)
    m = noiseless + 0.02 * np.random.default_rng(1).normal(size=noiseless.shape) * noiseless.max()
    a = levenberg_marquardt(_objective(desk_scene, square, m), p0, T3)
    for c in (4.0, 3.0):
        b = levenberg_marquardt(_objective(desk_scene, square, c * m), p0, T3)
        assert b.rejected_steps == a.rejected_steps and b.iterations == a.iterations
        np.testing.assert_allclose(b.accepted_costs, c**2 * np.array(a.accepted_costs), rtol=1e-12)
        np.testing.assert_allclose(b.pose.translation, a.pose.translation, rtol=1e-9)


def test_lm_simulation_scale_invariance(desk_scene, square, noiseless):
    p0 = Pose((-0.05, 0.6, 0.05), mode=DofMode.TRANSLATION3)
    a = levenberg_marquardt(_objective(desk_scene, square, noiseless), p0, T3)
    b = levenberg_marquardt(_objective(desk_scene, square, noiseless, settings=RenderSettings(rho0=8.0)), p0, T3)
    assert a.pose == b.pose and a.accepted_costs == b.accepted_costs


def test_lm_escalation_failure():
    def fn(pose):
        # forward-difference probes only move +y; every downhill trial lands in the
        # non-finite region, so damping has to escalate until it gives up
        x = pose.to_vector()
        if x[1] < 0.5:
            return CostEvaluation(math.inf, 1.0, np.full(2, math.inf))
        r = np.array([x[1] - 0.4, 0.1])
        return CostEvaluation(float(r @ r), 1.0, r)

    cfg = TrackerConfig(step_tolerance=1e-30)
    res = levenberg_marquardt(fn, Pose((0, 0.5, 0), mode=DofMode.TRANSLATION3), cfg)
    assert not res.converged
    assert "1e12" in res.message
    assert res.final_cost == pytest.approx(0.02)
    assert res.rejected_steps > 10


def test_lm_non_finite_base():
    def fn(pose):
        return CostEvaluation(math.nan, 1.0, np.array([math.nan]))

    res = levenberg_marquardt(fn, Pose((0, 0.5, 0), mode=DofMode.TRANSLATION3), T3)
    assert not res.converged and "non-finite" in res.message


def test_lm_max_iterations(desk_scene, square, noiseless):
    cfg = TrackerConfig(max_iterations=1)
    res = track_frame(desk_scene, RenderSettings(), square, noiseless, cfg,
                      Pose((0.1, 0.6, 0.1), mode=DofMode.TRANSLATION3))
    assert res.iterations == 1 and not res.converged


def test_cold_start_matches_direct_lm(desk_scene, square, noiseless):
    a = track_frame(desk_scene, RenderSettings(), square, noiseless, T3)
    b = levenberg_marquardt(_objective(desk_scene, square, noiseless), T3.default_pose(), T3)
    assert a.pose == b.pose and a.iterations == b.iterations and a.final_cost == b.final_cost


def test_warm_start_sequence(desk_scene, square):
    warm_its, cold_its = [], []
    prev = None
    for k in range(8):
        truth = Pose((-0.04 + 0.01 * k, 0.5, 0.0), mode=DofMode.TRANSLATION3)
        m = render_image(desk_scene, RenderSettings(), square, truth)
        cold = track_frame(desk_scene, RenderSettings(), square, m, T3,
                           Pose((0.12, 0.62, -0.1), mode=DofMode.TRANSLATION3))
        warm = track_frame(desk_scene, RenderSettings(), square, m, T3, prev or cold.pose)
        prev = warm.pose
        warm_its.append(warm.iterations)
        cold_its.append(cold.iterations)
        assert np.max(np.abs(np.array(warm.pose.translation) - truth.translation)) < 1e-3
    assert np.median(warm_its) <= np.median(cold_its)


def test_rotation_recovery():
    car = make_car_object(pitch_m=0.04)
    scene = load_scene(DATA_DIR / "desk_offset.json")
    truth = Pose((0.0, 0.5, 0.0), (20, -15, 10), DofMode.POSE6)
    m = render_image(scene, RenderSettings(), car, truth)
    res = track_frame(scene, RenderSettings(), car, m, P6, Pose((0.02, 0.52, -0.01), (10, -5, 5), DofMode.POSE6))
    assert res.converged
    np.testing.assert_allclose(res.pose.rotation, truth.rotation, atol=1e-2)
    np.testing.assert_allclose(res.pose.translation, truth.translation, atol=1e-4)


def test_result_json(desk_scene, square, noiseless):
    res = track_frame(desk_scene, RenderSettings(), square, noiseless, T3, TRUTH)
    d = json.loads(json.dumps(res.to_dict()))
    for key in ("pose", "iterations", "final_cost", "final_gamma", "simulations_used", "config"):
        assert key in d
    assert TrackerConfig.from_dict(d["config"]) == T3
    assert Pose.from_dict(d["pose"]) == res.pose
    assert isinstance(res, TrackResult)


def test_config_validation():
    with pytest.raises(ValueError):
        TrackerConfig(fd_step_translation=0)
    with pytest.raises(ValueError):
        TrackerConfig(max_iterations=0)
    with pytest.raises(ValueError):
        TrackerConfig(lm_damping_up=0.5)
    with pytest.raises(ValueError):
        TrackerConfig.from_dict({"bogus": 1})
    assert list(P6.fd_steps) == [1e-3] * 3 + [0.1] * 3
