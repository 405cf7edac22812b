import numpy as np
import pytest
from hypothesis import given, strategies as st

from touchsim.geometry import (GeometryError, Plane, SCREEN_PLANE,
                               apply_transform, check_rigid, default_camera,
                               inv_rigid, is_rigid, look_at, rotation_x,
                               rotation_z, rt, translation)

from conftest import random_rotation


def test_rt_composes_rotation_and_translation():
    T = rt(rotation_z(np.pi / 2), [1.0, 2.0, 3.0])
    p = apply_transform(T, np.array([1.0, 0.0, 0.0]))
    assert np.allclose(p, [1.0, 3.0, 3.0])


def test_is_rigid_accepts_rotations_rejects_scales():
    assert is_rigid(rt(rotation_x(0.3), [0, 0, 1]))
    assert not is_rigid(rt(2.0 * np.eye(3), [0, 0, 0]))
    bad = np.eye(4)
    bad[3, 0] = 0.1
    assert not is_rigid(bad)
    assert not is_rigid(np.full((4, 4), np.nan))


def test_check_rigid_raises_with_context():
    with pytest.raises(GeometryError, match="camera pose"):
        check_rigid(np.diag([2.0, 1.0, 1.0, 1.0]), "camera pose")


def test_inv_rigid_is_exact_inverse(rng):
    for _ in range(20):
        T = rt(random_rotation(rng), rng.normal(size=3))
        assert np.allclose(inv_rigid(T) @ T, np.eye(4), atol=1e-12)


@given(st.integers(0, 2 ** 32 - 1))
def test_apply_transform_roundtrip(seed):
    rng = np.random.default_rng(seed)
    T = rt(random_rotation(rng), rng.normal(size=3))
    pts = rng.normal(size=(7, 3))
    back = apply_transform(inv_rigid(T), apply_transform(T, pts))
    assert np.allclose(back, pts, atol=1e-12)


def test_translation_moves_points():
    assert np.allclose(apply_transform(translation([0.1, 0, 0]), np.zeros(3)),
                       [0.1, 0, 0])


def test_look_at_points_camera_forward_at_target():
    cam_from_world = look_at((0.0, 0.0, -0.7), (0.0, 0.0, 0.65))
    target_cam = apply_transform(cam_from_world, np.array([0.0, 0.0, 0.65]))
    # Target lands on the +z camera axis at the eye-target distance.
    assert np.allclose(target_cam, [0.0, 0.0, 1.35], atol=1e-12)


def test_look_at_degenerate_eye_equals_target():
    with pytest.raises(GeometryError):
        look_at((1.0, 2.0, 3.0), (1.0, 2.0, 3.0))


def test_look_at_straight_down_uses_fallback_up():
    T = look_at((0.0, 0.0, 0.0), (0.0, 1.0, 0.0))
    assert is_rigid(T)


def test_plane_signed_distance_sign_convention():
    assert SCREEN_PLANE.signed_distance(np.array([0.0, 0.0, 0.3])) == pytest.approx(0.3)
    assert SCREEN_PLANE.signed_distance(np.array([0.0, 0.0, -0.1])) == pytest.approx(-0.1)
    tilted = Plane([0, 0, 1], [0, 0, 2])  # non-unit normal gets normalized
    assert tilted.signed_distance(np.array([5.0, 5.0, 1.5])) == pytest.approx(0.5)


def test_plane_rejects_degenerate_normal():
    with pytest.raises(GeometryError):
        Plane([0, 0, 0], [0, 0, 0])


def test_camera_project_unproject_roundtrip(rng):
    cam = default_camera(320, 240, 60.0, look_at((0.1, -0.2, -0.5), (0, 0, 0.5)))
    pts = rng.normal(size=(50, 3)) * 0.3 + [0, 0, 0.5]
    px, z = cam.project(pts)
    assert np.all(z > 0)
    back = cam.unproject(px, z)
    assert np.allclose(back, pts, atol=1e-9)


def test_camera_center_matches_pose():
    eye = np.array([0.2, 0.1, -0.4])
    cam = default_camera(64, 48, 70.0, look_at(eye, (0, 0, 1.0)))
    assert np.allclose(cam.center, eye, atol=1e-12)


def test_pixel_rays_are_unit_and_point_forward():
    cam = default_camera(16, 12, 60.0)
    rays = cam.pixel_rays()
    assert rays.shape == (12, 16, 3)
    assert np.allclose(np.linalg.norm(rays, axis=-1), 1.0, atol=1e-12)
    assert np.all(rays[..., 2] > 0)  # identity pose looks along +z


def test_default_camera_field_of_view():
    cam = default_camera(320, 240, 90.0)
    # Horizontal FOV 90 degrees: focal length equals half the width.
    assert cam.fx == pytest.approx(160.0)
    assert cam.cx == pytest.approx(160.0)
    assert cam.cy == pytest.approx(120.0)
