import textwrap
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import run_with_threads
from oracles import composite_back_to_front
from sketch3d.camera import orbit_camera
from sketch3d.curves import RationalBezier2, RationalBezier3, Sketch, eval2
from sketch3d.raster import (
    RasterImage,
    RenderConfig,
    fragments_at,
    render,
    render_curves,
    render_reference,
    scene_eval,
)

WHITE = (1.0, 1.0, 1.0, 1.0)
RED = (1.0, 0.0, 0.0, 0.5)
BLUE = (0.0, 0.0, 1.0, 0.5)


def flat(points, depth=1.0, **kw):
    """2D curve whose source depth is constant."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    return RationalBezier2(pts, np.full(n, depth), np.ones(n), np.full(n, depth), **kw)


def hline(y=16.0, depth=1.0, **kw):
    return flat([[-10.0, y], [42.0, y]], depth, **kw)


def test_scene_eval_examples():
    np.testing.assert_array_equal(scene_eval([], 3.0, 4.0), WHITE)
    black = hline(width=6.0, color=(0, 0, 0, 1))
    np.testing.assert_array_equal(scene_eval([black], 10.0, 16.5), [0, 0, 0, 1])
    red = hline(depth=1.0, width=6.0, color=RED, id=0)
    blue = hline(depth=2.0, width=6.0, color=BLUE, id=1)
    out = scene_eval([blue, red], 10.0, 16.2)
    np.testing.assert_allclose(out[:3], [0.75, 0.25, 0.5], atol=1e-15)
    np.testing.assert_allclose(out[:3], composite_back_to_front([RED, BLUE], WHITE), atol=1e-15)
    assert out[3] == pytest.approx(1.0)


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1),
                          st.floats(0.5, 10)), min_size=1, max_size=5, unique_by=lambda x: x[4]))
def test_compositing_matches_painter(layers):
    curves = [hline(depth=d, width=8.0, color=c, id=i, user_order=i)
              for i, (*c, d) in enumerate(layers)]
    bg = (0.2, 0.4, 0.6, 1.0)
    out = scene_eval(curves, 5.0, 16.0, bg)
    ordered = [c for *c, d in sorted(layers, key=lambda x: x[4])]
    np.testing.assert_allclose(out[:3], composite_back_to_front(ordered, bg), atol=1e-12)


def test_compositing_extremes():
    a = hline(depth=1.0, width=6.0, color=(0.3, 0.6, 0.9, 1.0), id=0)
    b = hline(depth=2.0, width=6.0, color=(0.9, 0.1, 0.1, 1.0), id=1)
    np.testing.assert_array_equal(scene_eval([b, a], 8.0, 16.0), a.color)
    clear = [hline(depth=d, width=6.0, color=(0.5, 0.5, 0.5, 0.0), id=i) for i, d in enumerate((1, 2))]
    np.testing.assert_array_equal(scene_eval(clear, 8.0, 16.0, (0.1, 0.2, 0.3, 1.0)), [0.1, 0.2, 0.3, 1.0])


def test_depth_swap_flips_overlap_color():
    a = flat([[0, 16], [32, 16]], 1.0, width=8.0, color=(1, 0, 0, 1), id=0)
    b = flat([[16, 0], [16, 32]], 2.0, width=8.0, color=(0, 0, 1, 1), id=1)
    img = render_curves([a, b], 32, 32, RenderConfig(16))
    np.testing.assert_array_equal(img.pixels[16, 16], [1, 0, 0, 1])
    a2 = flat(a.points, 2.0, width=8.0, color=a.color, id=0)
    b2 = flat(b.points, 1.0, width=8.0, color=b.color, id=1)
    img2 = render_curves([a2, b2], 32, 32, RenderConfig(16))
    np.testing.assert_array_equal(img2.pixels[16, 16], [0, 0, 1, 1])


def test_depth_ties_follow_user_order():
    def scene(order_a, order_b):
        a = flat([[0, 16], [32, 16]], 1.5, width=8.0, color=(1, 0, 0, 0.6), id=0, user_order=order_a)
        b = flat([[16, 0], [16, 32]], 1.5, width=8.0, color=(0, 0, 1, 0.6), id=1, user_order=order_b)
        return [a, b]

    first = scene_eval(scene(0, 1), 16.0, 16.0)
    np.testing.assert_allclose(first[:3], composite_back_to_front([(1, 0, 0, 0.6), (0, 0, 1, 0.6)], WHITE))
    second = scene_eval(scene(1, 0), 16.0, 16.0)
    np.testing.assert_allclose(second[:3], composite_back_to_front([(0, 0, 1, 0.6), (1, 0, 0, 0.6)], WHITE))
    # list order must not matter, only user_order
    np.testing.assert_array_equal(scene_eval(scene(0, 1)[::-1], 16.0, 16.0), first)
    frs = fragments_at(scene(1, 0), 16.0, 16.0)
    assert [f.curve_id for f in frs] == [1, 0]


def test_fragments_lie_within_half_width():
    c = flat([[2, 3], [20, 30], [29, 4]], 1.0, width=5.0)
    for x, y in [(10, 15), (20, 17), (27, 8)]:
        for fr in fragments_at([c], x, y):
            assert np.linalg.norm(eval2(c, fr.t_star) - [x, y]) < 2.5


def test_empty_and_stroke_render():
    cam = orbit_camera(2.0, 0, 0, 60, (24, 16))
    img = render(Sketch(background_color=(0.1, 0.2, 0.3, 1.0)), cam)
    assert np.all(img.pixels == [0.1, 0.2, 0.3, 1.0])
    stroke = hline(width=6.0, color=(0.2, 0.7, 0.1, 1.0))
    img = render_curves([stroke], 32, 32, RenderConfig(16, seed=3))
    for row in range(13, 18):
        np.testing.assert_allclose(img.pixels[row, 5], stroke.color, atol=1e-12)
    for row in list(range(0, 10)) + list(range(23, 32)):
        np.testing.assert_array_equal(img.pixels[row, 5], WHITE)


def test_render_reference_matches_render():
    sketch = Sketch([RationalBezier3([[-0.5, -0.3, 0], [0.1, 0.6, 0.2], [0.5, -0.2, 0.1]], width=3.0,
                                     color=(0.2, 0.3, 0.8, 0.7))])
    cam = orbit_camera(2.0, 20, 10, 60, (16, 16))
    a = render_reference(sketch, cam, spp=64, seed=5)
    b = render(sketch, cam, RenderConfig(64, seed=5))
    np.testing.assert_array_equal(a.pixels, b.pixels)


def test_culling_does_not_change_output():
    curves = [
        flat([[1, 2], [30, 20], [12, 31], [3, 9]], 1.0 + i, width=2.0 + i, color=(0.1 * i, 0.5, 0.2, 0.7), id=i)
        for i in range(3)
    ]
    curves.append(flat([[40, 40], [50, 45]], 0.5, width=3.0, id=9))
    a = render_curves(curves, 32, 32, RenderConfig(16, cull=True))
    b = render_curves(curves, 32, 32, RenderConfig(16, cull=False))
    np.testing.assert_array_equal(a.pixels, b.pixels)


@given(st.floats(0.5, 30.0), st.floats(0.5, 30.0))
def test_translation_equivariance(x, y):
    c = flat([[3, 4], [14, 28], [27, 6]], 1.0, width=4.0, color=(0.4, 0.2, 0.9, 0.8))
    moved = flat(c.points + [1.0, 0.0], 1.0, width=4.0, color=c.color)
    np.testing.assert_array_equal(scene_eval([c], x, y), scene_eval([moved], x + 1.0, y))


def test_mc_convergence_rate():
    c = flat([[2, 5], [14, 30], [29, 3]], 1.0, width=3.0, color=(0, 0, 0, 1))
    spps = [4, 16, 64]
    variances = []
    for spp in spps:
        imgs = np.stack([render_curves([c], 24, 24, RenderConfig(spp, seed=s)).pixels for s in range(20)])
        variances.append(imgs.var(axis=0, ddof=1).sum())
    slope = np.polyfit(np.log(spps), np.log(variances), 1)[0]
    # stratified sampling should beat the plain Monte Carlo rate of -1
    assert slope <= -0.9


def test_behind_camera_curve_skipped_with_warning():
    cam = orbit_camera(2.0, 0, 0, 60, (8, 8))
    bad = RationalBezier3([[0, 0, 0], [0, 0, 3]], id=1)
    good = RationalBezier3([[-0.2, 0, 0], [0.2, 0, 0]], id=2)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        img = render(Sketch([bad, good]), cam)
    assert any("skipping curve 1" in str(w.message) for w in rec)
    assert isinstance(img, RasterImage)


def test_config_validation():
    with pytest.raises(ValueError):
        RenderConfig(samples_per_pixel=8)
    with pytest.raises(ValueError):
        render_curves([], 0, 4)
    with pytest.raises(ValueError):
        RasterImage(np.zeros((0, 3, 4)))


THREAD_SCRIPT = textwrap.dedent("""
    import hashlib, numpy as np
    from sketch3d.scenes import figure4_scene
    from sketch3d.raster import render, RenderConfig
    sk, cam = figure4_scene()
    img = render(sk, cam, RenderConfig(16, seed=11)).pixels
    print(hashlib.sha256(img.tobytes()).hexdigest())
""")


def test_render_independent_of_thread_count():
    assert run_with_threads(THREAD_SCRIPT, 1) == run_with_threads(THREAD_SCRIPT, 4)
