import dataclasses
import textwrap

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import run_with_threads
from sketch3d.camera import orbit_camera
from sketch3d.curves import RationalBezier3, Sketch
from sketch3d.distill import mock_noise_predictor
from sketch3d.fit import AdamState, FitConfig, adam_step, fit_multiview, fit_sds, init_sketch, l2_loss_and_grad
from sketch3d.raster import RasterImage, RenderConfig, render

CAMS = [orbit_camera(2.0, az, 10.0, 60.0, (32, 32)) for az in (0.0, 90.0, 180.0, 270.0)]


def small_cfg(**kw):
    base = dict(n_curves=2, total_steps=10, spp=4, n_boundary_samples=64, batch_cameras=2)
    base.update(kw)
    base.setdefault("dnd_start", base["total_steps"])
    return FitConfig(**base)


def two_strokes():
    a = RationalBezier3([[-0.5, -0.2, 0.0], [-0.1, 0.4, 0.1], [0.3, -0.3, 0.0], [0.5, 0.2, 0.1]],
                        width=2.0, color=(0.2, 0.3, 0.8, 0.9), id=0, user_order=0)
    b = RationalBezier3([[-0.4, 0.4, -0.2], [0.0, 0.0, 0.3], [0.4, 0.5, 0.0]], weights=[1.0, 2.0, 1.0],
                        width=3.0, color=(0.8, 0.1, 0.1, 0.7), id=1, user_order=1)
    return Sketch([a, b])


def targets_from(sketch, cfg):
    rc = RenderConfig(cfg.spp, seed=cfg.render_seed)
    return [(render(sketch, cam, rc), cam) for cam in CAMS]


def test_init_defaults_are_contained():
    sk = init_sketch(np.random.default_rng(0))
    pts = np.concatenate([c.points for c in sk.curves])
    assert len(sk) == 56 and pts.shape == (224, 3)
    assert np.linalg.norm(pts, axis=1).max() <= 1.5 + 1e-12
    assert all(c.degree == 3 for c in sk.curves)


@given(st.integers(1, 20), st.floats(1e-3, 10.0), st.integers(0, 2**32 - 1))
def test_init_containment_property(n, r, seed):
    sk = init_sketch(np.random.default_rng(seed), n, r)
    pts = np.concatenate([c.points for c in sk.curves])
    assert np.linalg.norm(pts, axis=1).max() <= r * (1 + 1e-12)


def test_init_is_deterministic_and_collapses():
    a = init_sketch(np.random.default_rng(7), 5, 1.5)
    b = init_sketch(np.random.default_rng(7), 5, 1.5)
    assert a == b
    tiny = init_sketch(np.random.default_rng(0), 1, 1e-12)
    assert np.abs(tiny.curves[0].points).max() <= 1e-12
    with pytest.raises(ValueError):
        init_sketch(np.random.default_rng(0), 0, 1.0)


def test_l2_examples():
    t = RasterImage(np.random.default_rng(0).uniform(0, 0.9, (4, 5, 4)))
    loss, g = l2_loss_and_grad(t, t)
    assert loss == 0.0 and not np.any(g.pixels)
    loss, _ = l2_loss_and_grad(RasterImage(t.pixels + 0.1), t)
    assert loss == pytest.approx(0.01, rel=1e-12)
    with pytest.raises(ValueError):
        l2_loss_and_grad(t, RasterImage(np.zeros((4, 4, 4))))


def test_l2_gradient_matches_image_differences():
    rng = np.random.default_rng(1)
    a, b = rng.uniform(0, 1, (3, 4, 4)), rng.uniform(0, 1, (3, 4, 4))
    _, g = l2_loss_and_grad(RasterImage(a), RasterImage(b))
    h = 1e-5
    for idx in [(0, 0, 0), (1, 2, 3), (2, 3, 1)]:
        p, m = a.copy(), a.copy()
        p[idx] += h
        m[idx] -= h
        fd = (l2_loss_and_grad(RasterImage(p), RasterImage(b))[0] - l2_loss_and_grad(RasterImage(m), RasterImage(b))[0]) / (2 * h)
        assert g.pixels[idx] == pytest.approx(fd, abs=1e-10)


def test_adam_zero_gradient():
    x = np.array([1.0, -2.0])
    y, s = adam_step(x, np.zeros(2), AdamState.zeros(2))
    np.testing.assert_array_equal(x, y)
    assert s.step == 1


@given(st.floats(-1e3, 1e3).filter(lambda g: abs(g) > 1e-3))
def test_adam_first_step_has_size_lr(g):
    y, _ = adam_step(np.array([0.5]), np.array([g]), AdamState.zeros(1), lr=0.002)
    assert abs(y[0] - 0.5) == pytest.approx(0.002, rel=1e-4)


def test_adam_quadratic_bowl():
    x, s = np.array([1.0]), AdamState.zeros(1)
    for _ in range(5000):
        x, s = adam_step(x, 2 * x, s, lr=0.002)
    assert abs(x[0]) < 1e-3


def test_adam_rejects_bad_input():
    with pytest.raises(FloatingPointError):
        adam_step(np.zeros(2), np.array([0.0, np.nan]), AdamState.zeros(2))
    with pytest.raises(ValueError):
        adam_step(np.zeros(2), np.zeros(3), AdamState.zeros(2))


def test_fit_config_validation():
    with pytest.raises(ValueError):
        FitConfig(lr=0.0)
    with pytest.raises(ValueError):
        FitConfig(total_steps=10, dnd_start=20)
    with pytest.raises(ValueError):
        FitConfig(loss="lpips")
    assert [s for s in range(4000) if FitConfig().is_dnd_step(s)][:3] == [2000, 2100, 2200]


def test_fit_requires_targets():
    with pytest.raises(ValueError):
        fit_multiview([], small_cfg())


def test_own_rendering_is_a_fixed_point():
    sk = two_strokes()
    cfg = small_cfg(total_steps=100, dnd_start=100)
    rep = fit_multiview(targets_from(sk, cfg), cfg, sk)
    assert rep.steps == 100 and max(rep.losses) == 0.0
    drift = max(np.abs(a.points - b.points).max() for a, b in zip(rep.sketch.curves, sk.curves))
    assert drift <= 1e-3


def test_only_positions_change():
    sk = two_strokes()
    cfg = small_cfg(total_steps=15)
    moved = sk.with_points([c.points + 0.03 for c in sk.curves])
    rep = fit_multiview(targets_from(sk, cfg), cfg, moved)
    assert rep.losses[-1] < rep.losses[0]
    for a, b in zip(rep.sketch.curves, moved.curves):
        assert not np.array_equal(a.points, b.points)
        assert np.array_equal(a.weights, b.weights) and np.array_equal(a.color, b.color)
        assert (a.width, a.id, a.user_order) == (b.width, b.id, b.user_order)


def test_dnd_events_follow_schedule():
    sk = two_strokes()
    short = RationalBezier3([[0.0, 0.0, 0.0], [0.01, 0.02, 0.0], [0.03, 0.0, 0.0], [0.04, 0.01, 0.0]],
                            id=7, user_order=2)
    sk = Sketch(sk.curves + [short])
    cfg = small_cfg(total_steps=12, dnd_start=5, dnd_every=3)
    rep = fit_multiview(targets_from(two_strokes(), cfg), cfg, sk)
    assert [s for s, _ in rep.dnd_events] == [5, 8, 11]
    assert rep.dnd_events[0][1] == [7]
    assert [c.id for c in rep.sketch.curves] == [0, 1]
    assert rep.steps == 12 and not rep.terminated_early
    assert "dnd 5 removed 7" in rep.to_text()


def test_deleting_every_curve_ends_the_run():
    dots = Sketch([RationalBezier3(np.zeros((2, 3)) + [0, 0, 0.1 * i], id=i, user_order=i) for i in range(2)])
    cfg = small_cfg(total_steps=10, dnd_start=3)
    rep = fit_multiview(targets_from(two_strokes(), cfg), cfg, dots)
    assert len(rep.sketch) == 0 and rep.steps == 4 and rep.terminated_early


def test_echo_predictor_leaves_sketch_unchanged():
    sk = two_strokes()
    cfg = small_cfg(loss="sds", total_steps=5)
    rep = fit_sds(mock_noise_predictor("echo"), "prompt", cfg, sk, CAMS[0])
    assert rep.sketch == sk
    assert rep.losses == [0.0] * 5


def test_pull_toward_predictor_fits_the_target():
    sk = Sketch(two_strokes().curves[:1])
    cam = CAMS[0]
    target_sketch = sk.with_points([sk.curves[0].points + [0.06, -0.04, 0.0]])
    target = render(target_sketch, cam, RenderConfig(16)).pixels[..., :3]
    cfg = small_cfg(loss="sds", total_steps=500, dnd_start=500, spp=16, n_boundary_samples=128)

    def distance(s):
        return np.linalg.norm(render(s, cam, RenderConfig(16)).pixels[..., :3] - target)

    rep = fit_sds(mock_noise_predictor("pull_toward", target), None, cfg, sk, cam)
    assert distance(rep.sketch) <= 0.5 * distance(sk)


def test_sds_predictor_shape_is_checked():
    cfg = small_cfg(loss="sds", total_steps=1)
    with pytest.raises(ValueError):
        fit_sds(lambda q: np.zeros(3), None, cfg, two_strokes(), CAMS[0])


def test_sds_with_sampled_cameras_runs():
    cfg = dataclasses.replace(small_cfg(loss="sds", total_steps=3), n_curves=3)
    rep = fit_sds(mock_noise_predictor("zero"), None, cfg)
    assert rep.steps == 3 and len(rep.sketch) == 3


FIT_SCRIPT = textwrap.dedent("""
    import hashlib, numpy as np
    from sketch3d.camera import orbit_camera
    from sketch3d.fit import FitConfig, fit_multiview, init_sketch
    from sketch3d.raster import RenderConfig, render
    cams = [orbit_camera(2.0, az, 10.0, 60.0, (32, 32)) for az in (0.0, 120.0, 240.0)]
    truth = init_sketch(np.random.default_rng(3), 3, 0.8)
    cfg = FitConfig(n_curves=3, init_radius=0.8, total_steps=6, spp=4, batch_cameras=2,
                    n_boundary_samples=64, dnd_start=6, seed=5)
    targets = [(render(truth, c, RenderConfig(4)), c) for c in cams]
    rep = fit_multiview(targets, cfg)
    pts = np.concatenate([c.points for c in rep.sketch.curves])
    print(hashlib.sha256(np.array(rep.losses).tobytes() + pts.tobytes()).hexdigest())
""")


def test_fit_independent_of_thread_count():
    assert run_with_threads(FIT_SCRIPT, 1) == run_with_threads(FIT_SCRIPT, 4)
