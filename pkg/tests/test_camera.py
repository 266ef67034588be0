import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sketch3d.camera import (
    Camera,
    CameraSamplerConfig,
    fov_to_focal,
    look_at,
    orbit_camera,
    sample_camera,
    world_to_camera,
)


def test_fov_to_focal():
    assert fov_to_focal(90, 512) == pytest.approx(256.0, rel=1e-15)
    assert fov_to_focal(60, 512) == pytest.approx(443.40500673, rel=1e-9)
    assert fov_to_focal(60, 1024) == pytest.approx(2 * fov_to_focal(60, 512), rel=1e-15)
    for bad in (0, 180, -5):
        with pytest.raises(ValueError):
            fov_to_focal(bad, 512)


def test_world_to_camera_examples():
    ident = Camera(np.eye(3), np.zeros(3), 100.0, 64, 64)
    np.testing.assert_array_equal(world_to_camera(ident, [1, 2, 3]), [1, 2, 3])
    shifted = Camera(np.eye(3), [0, 0, 2], 100.0, 64, 64)
    np.testing.assert_array_equal(world_to_camera(shifted, [0, 0, 0]), [0, 0, 2])
    # yaw by +90 degrees about +y (right-handed)
    yaw = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])
    cam = Camera(yaw, np.zeros(3), 100.0, 64, 64)
    np.testing.assert_allclose(world_to_camera(cam, [1, 0, 0]), [0, 0, -1], atol=1e-15)


@given(st.floats(-180, 180), st.floats(-80, 80), st.floats(0.5, 5))
def test_orbit_camera_is_rigid_and_centred(az, el, r):
    cam = orbit_camera(r, az, el, 60, (64, 48))
    R = cam.rotation
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-10)
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(world_to_camera(cam, [0, 0, 0]), [0, 0, r], atol=1e-12)
    a, b = np.array([0.3, -1.0, 2.0]), np.array([-0.7, 0.4, 0.1])
    d_world = np.linalg.norm(a - b)
    d_cam = np.linalg.norm(world_to_camera(cam, a) - world_to_camera(cam, b))
    assert d_cam == pytest.approx(d_world, abs=1e-12)


def test_orbit_examples():
    cam = orbit_camera(2.0, 0.0, 0.0, 60, (512, 512))
    np.testing.assert_allclose(cam.position, [0, 0, 2], atol=1e-15)
    np.testing.assert_allclose(world_to_camera(cam, [0, 0, 0]), [0, 0, 2], atol=1e-15)
    high = orbit_camera(2.0, 40.0, 30.0)
    assert high.position[1] == pytest.approx(1.0, abs=1e-12)
    # world +y is up, image y is down
    assert world_to_camera(cam, [0, 1, 0])[1] < 0


def test_look_at_rejects_parallel_up():
    with pytest.raises(ValueError):
        look_at([0, 2, 0])


def test_sample_camera_ranges_and_determinism():
    cfg = CameraSamplerConfig(image_size=(32, 32))
    rng = np.random.default_rng(7)
    radii, elevations = [], []
    for _ in range(10_000):
        cam = sample_camera(rng, cfg)
        p = cam.position
        r = np.linalg.norm(p)
        radii.append(r)
        elevations.append(math.degrees(math.asin(p[1] / r)))
    assert 1.8 - 1e-12 <= min(radii) and max(radii) <= 2.0 + 1e-12
    assert -1e-9 <= min(elevations) and max(elevations) <= 30 + 1e-9
    a = sample_camera(np.random.default_rng(3), cfg)
    b = sample_camera(np.random.default_rng(3), cfg)
    assert a == b


def test_fixed_radius_override():
    cfg = CameraSamplerConfig().fixed_radius(2.0)
    cam = sample_camera(np.random.default_rng(0), cfg)
    assert np.linalg.norm(cam.position) == pytest.approx(2.0, abs=1e-12)


def test_camera_validation():
    with pytest.raises(ValueError):
        Camera(np.ones((3, 3)), np.zeros(3), 10.0, 8, 8)
    with pytest.raises(ValueError):
        Camera(np.eye(3), np.zeros(3), -1.0, 8, 8)
    with pytest.raises(ValueError):
        Camera(np.eye(3), np.zeros(3), 1.0, 0, 8)
    with pytest.raises(ValueError):
        CameraSamplerConfig(radius_range=(2.0, 1.0))
    with pytest.raises(ValueError):
        CameraSamplerConfig(fov_deg=180)
