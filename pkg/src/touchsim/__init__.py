"""Touch-emulation engine for two-site 3D video communication.

Dual hand representation (image-based portrait layer + skeleton-rigged
mesh), shape/appearance adaptation, distance-based fusion, screen-aligned
virtual space, mutual-touch detection, and a deterministic two-site session
simulator.
"""
from .appearance import (ColorTransform, apply_to_texture, fit_color_transform,
                         hand_region_mask, lab_to_rgb, rgb_to_lab)
from .calib import (ScreenGeometry, SiteTransform, Viewpoint, build_global_space,
                    compute_viewpoint, remote_target_camera,
                    solve_rigid_registration)
from .fusion import (FusionParams, HandDistance, compose_background, hand_alpha,
                     hand_distance, overlay_blend)
from .geometry import Camera, Plane, default_camera, look_at
from .imaging import LayerImage
from .lumigraph import CaptureRig, blend_ulr, fuse_depth_min, render_portrait, warp_view
from .mesh import (RiggedHandMesh, adapt_shape, build_template_hand,
                   default_hand_mesh, load_mesh, save_mesh, skin_vertices)
from .scenario import ChannelModel, Scenario, high_five_scenario, load_scenario
from .session import Session, SessionTrace, run_scenario
from .skeleton import (BoneScales, HandSkeleton, compute_bone_scales,
                       pose_from_tracker, template_skeleton,
                       update_bind_transforms)
from .touch import (HapticActuator, TouchDetector, TouchEvent, TouchParams,
                    near_screen_joints, projected_bbox, trigger_haptic)

__all__ = [name for name in dir() if not name.startswith("_")]
