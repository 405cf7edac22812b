"""RGBA + depth raster layers and the binary raster dump used by golden tests."""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .geometry import Camera

#: Depth value marking pixels with no geometry.
DEPTH_EMPTY = 0.0

_RASTER_MAGIC = b"TSRAST1\n"


class RasterError(ValueError):
    pass


@dataclass
class LayerImage:
    """Linear RGB + alpha + metric depth, with the camera that produced it."""

    rgb: np.ndarray    # (H, W, 3) in [0, 1]
    alpha: np.ndarray  # (H, W) in [0, 1]
    depth: np.ndarray  # (H, W) meters, DEPTH_EMPTY where no geometry
    camera: Camera

    def __post_init__(self):
        self.rgb = np.asarray(self.rgb, dtype=float)
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.depth = np.asarray(self.depth, dtype=float)
        self.validate()

    def validate(self):
        h, w = self.alpha.shape
        if self.rgb.shape != (h, w, 3):
            raise RasterError("rgb and alpha rasters must share dimensions")
        if self.depth.shape != (h, w):
            raise RasterError("depth and rgb rasters must share dimensions")
        if not np.all(np.isfinite(self.rgb)):
            raise RasterError("non-finite color values")
        if np.any(self.alpha < -1e-9) or np.any(self.alpha > 1 + 1e-9):
            raise RasterError("alpha outside [0, 1]")
        if np.any(self.depth < 0):
            raise RasterError("negative depth")

    @property
    def width(self) -> int:
        return self.alpha.shape[1]

    @property
    def height(self) -> int:
        return self.alpha.shape[0]

    @property
    def valid_depth(self) -> np.ndarray:
        return self.depth > DEPTH_EMPTY

    @classmethod
    def empty(cls, camera: Camera) -> "LayerImage":
        h, w = camera.height, camera.width
        return cls(np.zeros((h, w, 3)), np.zeros((h, w)), np.zeros((h, w)), camera)

    def copy(self) -> "LayerImage":
        return LayerImage(self.rgb.copy(), self.alpha.copy(), self.depth.copy(),
                          self.camera)


def compose_over_background(rgb: np.ndarray, alpha: np.ndarray,
                            background: np.ndarray) -> np.ndarray:
    """Standard over-composite of a straight-alpha layer onto an opaque RGB raster."""
    return rgb * alpha[..., None] + background * (1.0 - alpha[..., None])


def to_display(rgb_linear: np.ndarray, gamma: float = 2.2) -> np.ndarray:
    """Convert a linear frame to display-gamma u8."""
    out = np.clip(rgb_linear, 0.0, 1.0) ** (1.0 / gamma)
    return (out * 255.0 + 0.5).astype(np.uint8)


def save_raster(path, planes: dict[str, np.ndarray]) -> None:
    """Dump named float32 planes: magic, plane count, then per plane a header
    line ``name channels`` + dimensions and raw little-endian float32 data."""
    with open(path, "wb") as fh:
        fh.write(_RASTER_MAGIC)
        fh.write(struct.pack("<I", len(planes)))
        for name, plane in planes.items():
            arr = np.asarray(plane, dtype="<f4")
            if arr.ndim == 2:
                arr = arr[..., None]
            if arr.ndim != 3:
                raise RasterError(f"plane {name} must be 2D or 3D")
            nb = name.encode()
            fh.write(struct.pack("<I", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<III", arr.shape[0], arr.shape[1], arr.shape[2]))
            fh.write(arr.tobytes())


def load_raster(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(len(_RASTER_MAGIC)) != _RASTER_MAGIC:
            raise RasterError("not a raster dump file")
        (count,) = struct.unpack("<I", fh.read(4))
        out = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<I", fh.read(4))
            name = fh.read(nlen).decode()
            h, w, c = struct.unpack("<III", fh.read(12))
            data = np.frombuffer(fh.read(h * w * c * 4), dtype="<f4")
            arr = data.reshape(h, w, c).astype(float)
            out[name] = arr[..., 0] if c == 1 else arr
        return out


def save_layer(path, layer: LayerImage) -> None:
    save_raster(path, {"rgb": layer.rgb, "alpha": layer.alpha, "depth": layer.depth})
