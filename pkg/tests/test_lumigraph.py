import numpy as np
import pytest

from touchsim.geometry import default_camera, look_at, translation
from touchsim.imaging import DEPTH_EMPTY, LayerImage
from touchsim.lumigraph import (THETA_0, CaptureRig, LumigraphError, blend_ulr,
                                fuse_depth_min, render_portrait, select_cameras,
                                warp_view)
from touchsim.raster import checker_texture, render_meshes, textured_plane


def _frontal_cam(width=64, height=48, eye=(0.0, 0.0, 0.0), fov=60.0):
    """Camera at `eye` looking along +z (the scene sits at positive z)."""
    return default_camera(width, height, fov, look_at(eye, (eye[0], eye[1], 10.0)))


def _plane(z, half=1.0, tex=None, center=(0.0, 0.0)):
    tex = checker_texture(32, 4) if tex is None else tex
    return textured_plane((center[0], center[1], z), (1, 0, 0), (0, 1, 0),
                          half, half, tex)


def _two_plane_frames(cams, near_z=0.3, far_z=0.7, near_half=0.08):
    scene = [_plane(far_z, half=2.0),
             _plane(near_z, half=near_half, tex=checker_texture(16, 2,
                                                                (0.8, 0.6, 0.5),
                                                                (0.7, 0.5, 0.4)))]
    return [render_meshes(scene, cam) for cam in cams]


# -- fuse_depth_min ----------------------------------------------------------

def test_fuse_single_identical_source_reproduces_depth():
    cam = _frontal_cam()
    frame = _two_plane_frames([cam])[0]
    fused = fuse_depth_min([frame], cam)
    covered = frame.alpha > 0
    # Splatting to the same grid keeps every covered pixel's depth.
    assert np.allclose(fused[covered], frame.depth[covered], atol=1e-9)


def test_fuse_takes_minimum_of_overlapping_depths():
    cam = _frontal_cam(8, 8)
    near = render_meshes([_plane(1.0, half=2.0)], cam)
    far = render_meshes([_plane(1.2, half=2.0)], cam)
    fused = fuse_depth_min([far, near], cam)
    assert np.allclose(fused, 1.0, atol=1e-9)


def test_fuse_edge_stays_sharp_on_two_plane_fixture():
    # Min-filter fusion must never average across the depth discontinuity:
    # with planes at 0.3 m and 0.7 m no fused value may fall strictly between.
    cams = [_frontal_cam(eye=(-0.05, 0.0, 0.0)), _frontal_cam(eye=(0.05, 0.0, 0.0))]
    frames = _two_plane_frames(cams)
    fused = fuse_depth_min(frames, _frontal_cam())
    valid = fused > DEPTH_EMPTY
    band = valid & (fused > 0.31) & (fused < 0.69)
    assert band.sum() == 0


def test_fuse_requires_sources():
    with pytest.raises(LumigraphError):
        fuse_depth_min([], _frontal_cam())


def test_fuse_marks_uncovered_pixels_empty():
    cam = _frontal_cam()
    tiny = render_meshes([_plane(0.5, half=0.01)], cam)
    fused = fuse_depth_min([tiny], cam)
    assert (fused == DEPTH_EMPTY).sum() > 0


# -- warp_view ---------------------------------------------------------------

def test_warp_identity_camera_reproduces_source():
    cam = _frontal_cam()
    frame = _two_plane_frames([cam])[0]
    proxy = fuse_depth_min([frame], cam)
    warped = warp_view(frame, proxy, cam)
    covered = (proxy > DEPTH_EMPTY) & (frame.alpha > 0)
    assert np.abs(warped.rgb[covered] - frame.rgb[covered]).max() < 1e-6
    assert np.allclose(warped.alpha[covered], 1.0, atol=1e-6)


def test_warp_translation_matches_analytic_shift():
    # Fronto-parallel plane at depth z, source camera shifted by tx: the image
    # shifts by fx * tx / z pixels.
    z, tx = 0.5, 0.03
    target = _frontal_cam(96, 72)
    source = _frontal_cam(96, 72, eye=(tx, 0.0, 0.0))
    tex = checker_texture(64, 8, (1.0, 0.2, 0.2), (0.2, 0.2, 1.0))
    scene = [_plane(z, half=2.0, tex=tex)]
    src_frame = render_meshes(scene, source)
    truth = render_meshes(scene, target)
    proxy = np.full((72, 96), z)
    warped = warp_view(src_frame, proxy, target)
    interior = np.zeros((72, 96), dtype=bool)
    interior[8:-8, 8:-8] = True
    ok = interior & (warped.alpha > 0.99)
    # Nearest-checker-texel rendering quantizes colors; compare a 1 px shift
    # tolerance by checking most interior pixels agree exactly.
    agree = np.abs(warped.rgb - truth.rgb).max(axis=-1) < 1e-6
    assert (agree & ok).sum() / ok.sum() > 0.9


def test_warp_occluded_pixels_get_zero_alpha():
    # The proxy says 0.3 m but the source sees its own geometry at 0.2 m:
    # the proxy point is occluded in the source, alpha must drop to 0.
    cam = _frontal_cam(16, 16)
    source = render_meshes([_plane(0.2, half=2.0)], cam)
    proxy = np.full((16, 16), 0.3)
    warped = warp_view(source, proxy, cam)
    assert np.all(warped.alpha == 0.0)


def test_warp_out_of_frame_pixels_get_zero_alpha():
    target = _frontal_cam(32, 32)
    source = _frontal_cam(32, 32, eye=(5.0, 0.0, 0.0))  # looks elsewhere
    frame = render_meshes([_plane(0.5, half=0.3)], source)
    proxy = np.full((32, 32), 0.5)
    warped = warp_view(frame, proxy, target)
    assert warped.alpha.max() == 0.0


# -- blend_ulr ---------------------------------------------------------------

def _const_layer(cam, color, alpha, depth):
    h, w = cam.height, cam.width
    return LayerImage(np.full((h, w, 3), color), np.full((h, w), alpha),
                      np.full((h, w), depth), cam)


def test_blend_single_contributor_passthrough():
    cam = _frontal_cam(8, 8)
    layer = _const_layer(cam, 0.3, 1.0, 0.5)
    out = blend_ulr([layer], cam, [cam], proxy_depth=layer.depth)
    assert np.allclose(out.rgb, 0.3)
    assert np.allclose(out.alpha, 1.0)
    assert np.allclose(out.depth, 0.5)


def test_blend_symmetric_sources_keep_color():
    target = _frontal_cam(8, 8)
    left = _frontal_cam(8, 8, eye=(-0.1, 0.0, 0.0))
    right = _frontal_cam(8, 8, eye=(0.1, 0.0, 0.0))
    layers = [_const_layer(left, 0.6, 1.0, 0.5), _const_layer(right, 0.6, 1.0, 0.5)]
    proxy = np.full((8, 8), 0.5)
    out = blend_ulr(layers, target, [left, right], proxy_depth=proxy)
    assert np.allclose(out.rgb, 0.6, atol=1e-12)


def test_blend_angular_weight_ratio_matches_formula():
    # Two contributors at 10 deg and 30 deg with colors 1 and 0: the blended
    # color is w1/(w1+w2) with w = exp(-theta/theta0).
    w1 = np.exp(-np.radians(10.0) / THETA_0)
    w2 = np.exp(-np.radians(30.0) / THETA_0)
    expected = w1 / (w1 + w2)
    assert expected == pytest.approx(0.7311, abs=1e-4)

    z = 1.0
    target = _frontal_cam(3, 3, fov=20.0)
    # Place sources so their rays to the on-axis proxy point make the angles.
    def cam_at_angle(deg):
        r = 0.4
        a = np.radians(deg)
        eye = (z * np.tan(a), 0.0, 0.0)
        return default_camera(3, 3, 20.0, look_at(eye, (0.0, 0.0, z)))

    c1, c2 = cam_at_angle(10.0), cam_at_angle(30.0)
    proxy = np.full((3, 3), DEPTH_EMPTY)
    proxy[1, 1] = z  # center pixel only (on the optical axis)
    l1 = _const_layer(c1, 1.0, 1.0, z)
    l2 = _const_layer(c2, 0.0, 1.0, z)
    out = blend_ulr([l1, l2], target, [c1, c2], proxy_depth=proxy)
    assert out.rgb[1, 1, 0] == pytest.approx(expected, abs=1e-3)


def test_blend_ignores_empty_samples():
    cam = _frontal_cam(4, 4)
    good = _const_layer(cam, 0.8, 1.0, 0.5)
    empty = _const_layer(cam, 0.0, 0.0, 0.5)
    proxy = np.full((4, 4), 0.5)
    out = blend_ulr([good, empty], cam, [cam, cam], proxy_depth=proxy)
    assert np.allclose(out.rgb, 0.8)
    assert np.allclose(out.alpha, 1.0)


def test_blend_output_depth_is_proxy():
    cam = _frontal_cam(4, 4)
    layer = _const_layer(cam, 0.5, 1.0, 0.4)
    proxy = np.full((4, 4), 0.4)
    proxy[0, 0] = DEPTH_EMPTY
    out = blend_ulr([layer], cam, [cam], proxy_depth=proxy)
    assert np.array_equal(out.depth, proxy)


# -- render_portrait ---------------------------------------------------------

def test_render_portrait_identity_rig():
    cam = _frontal_cam()
    frame = _two_plane_frames([cam, _frontal_cam(eye=(0.02, 0.0, 0.0))])
    rig = CaptureRig([cam, _frontal_cam(eye=(0.02, 0.0, 0.0))], frame)
    out = render_portrait(rig, cam)
    covered = frame[0].alpha > 0
    # The co-located source dominates; colors match it closely.
    assert np.abs(out.rgb[covered] - frame[0].rgb[covered]).mean() < 0.05


def test_render_portrait_is_deterministic():
    cams = [_frontal_cam(eye=(-0.05, 0.0, 0.0)), _frontal_cam(eye=(0.05, 0.0, 0.0))]
    rig = CaptureRig(cams, _two_plane_frames(cams))
    target = _frontal_cam()
    a = render_portrait(rig, target)
    b = render_portrait(rig, target)
    assert np.array_equal(a.rgb, b.rgb)
    assert np.array_equal(a.alpha, b.alpha)
    assert np.array_equal(a.depth, b.depth)


def test_capture_rig_validation():
    with pytest.raises(LumigraphError):
        CaptureRig([_frontal_cam()])
    with pytest.raises(LumigraphError):
        CaptureRig([_frontal_cam(), _frontal_cam()], [LayerImage.empty(_frontal_cam())])


def test_select_cameras_drops_two_nearest():
    xs = [-0.6, -0.2, 0.2, 0.6]
    cams = [_frontal_cam(eye=(x, 0.0, 0.0)) for x in xs]
    rig = CaptureRig(cams)
    kept = select_cameras(rig, hand_x=-0.5)
    assert len(kept.cameras) == 2
    kept_x = sorted(c.center[0] for c in kept.cameras)
    assert kept_x == [0.2, 0.6]


def test_select_cameras_noop_without_hand_or_small_rig():
    cams = [_frontal_cam(eye=(x, 0.0, 0.0)) for x in (-0.5, 0.5)]
    rig = CaptureRig(cams)
    assert select_cameras(rig, None) is rig
    assert select_cameras(rig, 0.4) is rig  # already at the 2-camera floor
