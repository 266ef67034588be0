import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import dense_closest
from sketch3d.camera import Camera, orbit_camera
from sketch3d.curves import RationalBezier3, Sketch
from sketch3d.grad import (
    BoundarySampleConfig,
    CurveGrad,
    GradImage,
    backward,
    backward_2d,
    backward_project,
    fd_gradient,
    gradcheck,
)
from sketch3d.projection import project_curve
from sketch3d.raster import RenderConfig, project_sketch, render
from sketch3d.scenes import GRADCHECK_SHIFT, gradcheck_scene

CAM = orbit_camera(2.0, 0.0, 0.0, 60.0, (32, 32))


def stroke(points, **kw):
    kw.setdefault("width", 3.0)
    kw.setdefault("color", (0.9, 0.1, 0.1, 0.8))
    return RationalBezier3(np.asarray(points, dtype=np.float64), **kw)


def l2_grad(img, target):
    return GradImage(2.0 * (img.pixels - target.pixels) / img.pixels.size)


def test_zero_upstream_gives_zero_buffer():
    sk, cam = gradcheck_scene()
    buf = backward(sk, cam, GradImage.zeros(32, 32))
    for g in buf.curves:
        assert not np.any(g.points3d) and not np.any(g.weights3d)
        assert not np.any(g.points2d) and not np.any(g.weights2d)
        assert not np.any(g.color) and g.width == 0.0


def test_zero_2d_grads_give_zero_3d_grads():
    c = stroke([[-0.5, 0.0, 0.0], [0.0, 0.3, 0.2], [0.5, 0.0, 0.0]])
    g = backward_project(c, CAM, CurveGrad.zeros(2))
    assert not np.any(g.points3d) and not np.any(g.weights3d)


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**20))
def test_backward_is_linear_in_upstream(a, b, seed):
    sk, cam = gradcheck_scene()
    rng = np.random.default_rng(seed)
    g1, g2 = rng.normal(size=(32, 32, 4)), rng.normal(size=(32, 32, 4))
    cfg = BoundarySampleConfig(64, seed=seed)
    rc = RenderConfig(4, seed=seed)
    lhs = backward(sk, cam, GradImage(a * g1 + b * g2), cfg, rc)
    rhs = backward(sk, cam, GradImage(g1), cfg, rc).scaled(a) + backward(sk, cam, GradImage(g2), cfg, rc).scaled(b)
    scale = 1.0 + np.abs(rhs.flat_points3d()).max()
    np.testing.assert_allclose(lhs.flat_points3d(), rhs.flat_points3d(), rtol=0, atol=1e-10 * scale)
    np.testing.assert_allclose(lhs.flat_colors(), rhs.flat_colors(), rtol=0, atol=1e-10 * scale)


def test_gradients_finite_at_exact_depth_tie():
    # Two strokes crossing at the same depth everywhere.
    a = stroke([[-0.6, 0.0, 0.0], [0.6, 0.0, 0.0]], id=0, user_order=0)
    b = stroke([[0.0, -0.6, 0.0], [0.0, 0.6, 0.0]], color=(0.1, 0.2, 0.9, 0.7), id=1, user_order=1)
    sk = Sketch([a, b])
    img = render(sk, CAM)
    G = GradImage(np.random.default_rng(0).normal(size=img.pixels.shape))
    buf = backward(sk, CAM, G)
    assert buf.is_finite()
    assert np.any(buf.flat_points3d())


def test_on_axis_depth_moves_only_through_weight_path():
    cam = Camera(np.eye(3), np.zeros(3), 100.0, 64, 64)
    c = stroke([[0.0, 0.0, 2.0], [0.3, 0.1, 2.5], [0.5, -0.2, 3.0]], weights=[1.5, 1.0, 0.7])
    g2 = CurveGrad.zeros(2)
    g2.points2d[:] = [[0.3, -0.7], [0.2, 0.1], [-0.4, 0.5]]
    only_pos = backward_project(c, cam, g2)
    assert only_pos.points3d[0, 2] == 0.0
    g2.weights2d[:] = [0.25, 0.0, 0.0]
    with_w = backward_project(c, cam, g2)
    assert with_w.points3d[0, 2] == pytest.approx(0.25 * 1.5, rel=1e-15)


@given(st.integers(0, 2**20))
def test_backward_project_matches_projection_differences(seed):
    rng = np.random.default_rng(seed)
    cam = orbit_camera(3.0, rng.uniform(0, 360), rng.uniform(-40, 40), 50.0, (64, 48))
    n = int(rng.integers(1, 4))
    c = stroke(rng.uniform(-0.8, 0.8, (n + 1, 3)), weights=rng.uniform(0.3, 3.0, n + 1))
    gp, gw = rng.normal(size=(n + 1, 2)), rng.normal(size=n + 1)

    def linear(curve3):
        c2 = project_curve(curve3, cam)
        return float(np.sum(gp * c2.points) + np.sum(gw * c2.weights))

    g2 = CurveGrad.zeros(n)
    g2.points2d[:] = gp
    g2.weights2d[:] = gw
    analytic = backward_project(c, cam, g2).points3d
    h = 1e-6
    fd = np.zeros_like(analytic)
    for k in range(n + 1):
        for a in range(3):
            pts = c.points.copy()
            pts[k, a] += h
            plus = linear(c.replace(points=pts))
            pts[k, a] -= 2 * h
            minus = linear(c.replace(points=pts))
            fd[k, a] = (plus - minus) / (2 * h)
    np.testing.assert_allclose(analytic, fd, rtol=1e-5, atol=1e-5 * np.abs(fd).max())


def test_color_gradient_counts_fully_covered_pixels():
    c = stroke([[-0.7, 0.05, 0.0], [0.7, -0.05, 0.0]], width=6.0, color=(0.2, 0.4, 0.6, 1.0))
    sk = Sketch([c])
    c2 = project_sketch(sk, CAM)[0]
    inside = np.zeros((32, 32), dtype=bool)
    for py in range(32):
        for px in range(32):
            _, d = dense_closest(c2, (px + 0.5, py + 0.5), 2000)
            inside[py, px] = d + np.sqrt(0.5) < c2.width / 2
    G = np.zeros((32, 32, 4))
    G[inside, 0] = 1.0
    buf = backward(sk, CAM, GradImage(G), BoundarySampleConfig(512), RenderConfig(16))
    assert abs(buf.curves[0].color[0] - inside.sum()) <= 1.0
    assert np.abs(buf.flat_points3d()).max() < 1e-9


def test_position_gradient_is_a_descent_direction():
    c = stroke([[-0.5, -0.2, 0.0], [-0.1, 0.4, 0.1], [0.5, 0.1, 0.0]], color=(0.1, 0.1, 0.1, 1.0))
    sk = Sketch([c])
    shift = np.array([0.04, -0.03, 0.0])
    target = render(sk.with_points([c.points + shift]), CAM, RenderConfig(64, seed=12345))
    hits = 0
    for seed in range(100):
        rc = RenderConfig(16, seed=seed)
        G = l2_grad(render(sk, CAM, rc), target)
        g = backward(sk, CAM, G, BoundarySampleConfig(128, seed=seed), rc).points3d()[0]
        hits += float(-g.sum(axis=0) @ shift) > 0
    assert hits >= 95


def test_fd_constant_loss_is_zero():
    sk, cam = gradcheck_scene()
    g = fd_gradient(sk, cam, lambda img: 3.0, spp=4)
    assert not np.any(g.flat_points3d()) and not np.any(g.flat_colors())


def test_fd_linear_color_probe_matches_interior_term():
    sk, cam = gradcheck_scene()
    rc = RenderConfig(16, seed=0)
    fd = fd_gradient(sk, cam, lambda img: float(img.pixels[..., 1].sum()), spp=16, include_points=False)
    G = np.zeros((32, 32, 4))
    G[..., 1] = 1.0
    an = backward(sk, cam, GradImage(G), render_cfg=rc)
    np.testing.assert_allclose(an.flat_colors(), fd.flat_colors(), rtol=1e-9, atol=1e-9)


def test_fd_rejects_bad_step():
    sk, cam = gradcheck_scene()
    with pytest.raises(ValueError):
        fd_gradient(sk, cam, lambda img: 0.0, h=0.0)


def test_backward_2d_rejects_mismatched_image():
    sk, cam = gradcheck_scene()
    with pytest.raises(ValueError):
        backward_2d(project_sketch(sk, cam), (32, 32), GradImage.zeros(16, 16))


def test_boundary_config_validation():
    with pytest.raises(ValueError):
        BoundarySampleConfig(0)
    with pytest.raises(ValueError):
        BoundarySampleConfig(8, epsilon=0.0)


def test_gradcheck_report_smoke():
    sk, cam = gradcheck_scene()
    rep = gradcheck(sk, cam, np.array(GRADCHECK_SHIFT), n_seeds=4, spp=4, target_spp=16, color_spp=4)
    assert rep.analytic.shape == rep.fd.shape == (21,)
    assert rep.color_max_rel_error < 1e-6
    assert "checked" in rep.summary()
