"""Camera models, rigid transforms, and the ground-aligned virtual frame.

Coordinate conventions used throughout the package:

* Ego frame: right-handed, z-up.  The ground is the exact plane z = 0 with
  unit normal (0, 0, 1); "height above ground" of a point is its ego z.
* Camera frame: x right, y down, z along the optical axis (pinhole model,
  no distortion).  Extrinsics map ego to camera: p_cam = R @ p_ego + t.
* Virtual frame: origin at the camera's optical center, Y axis along the
  downward ground normal (so it points from the camera toward the ground),
  Z axis the projection of the optical axis onto the ground plane
  (renormalized), X = Y x Z to close a right-handed basis.  A point with
  ego height g has virtual Y coordinate ground_height_H - g.

The virtual frame is what makes per-pixel heights liftable: a pixel's
reference point at camera depth 1 is rotated into this frame, and scaling
it so its Y coordinate equals (ground_height_H - h) lands the ray on the
plane of height h.  See lifting.lift_pixel_height.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CameraBelowGround, ConfigError, DegenerateOrientation

_ORTHO_TOL = 1e-9
_DEGENERATE_SIN = 1e-6

UP_EGO = np.array([0.0, 0.0, 1.0])


def _as_matrix(value, shape, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != shape:
        raise ConfigError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    image_w: int
    image_h: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ConfigError("focal lengths must be positive")
        if not (0 <= self.cx < self.image_w and 0 <= self.cy < self.image_h):
            raise ConfigError("principal point must lie inside the image")
        if self.image_w <= 0 or self.image_h <= 0:
            raise ConfigError("image dimensions must be positive")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class Extrinsics:
    """Rigid map from ego to camera coordinates: p_cam = R @ p_ego + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = _as_matrix(self.rotation, (3, 3), "rotation")
        tra = _as_matrix(self.translation, (3,), "translation")
        if np.max(np.abs(rot @ rot.T - np.eye(3))) > _ORTHO_TOL:
            raise ConfigError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(rot) - 1.0) > _ORTHO_TOL:
            raise ConfigError("rotation determinant must be +1 within 1e-9")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tra)

    @property
    def camera_center(self) -> np.ndarray:
        """Optical center in ego coordinates."""
        return -self.rotation.T @ self.translation

    def ego_to_cam(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def cam_to_ego(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return (pts - self.translation) @ self.rotation


@dataclass(frozen=True)
class RigidTransform:
    """Rotation-plus-translation map: p_out = rotation @ p_in + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _as_matrix(self.rotation, (3, 3), "rotation"))
        object.__setattr__(self, "translation", _as_matrix(self.translation, (3,), "translation"))

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)

    def compose(self, inner: "RigidTransform") -> "RigidTransform":
        """Return the map equivalent to applying `inner` first, then self."""
        return RigidTransform(
            self.rotation @ inner.rotation,
            self.rotation @ inner.translation + self.translation,
        )


def transform_point(transform, point: np.ndarray) -> np.ndarray:
    """Apply a RigidTransform or bare 3x3 rotation to one or more points."""
    if isinstance(transform, RigidTransform):
        return transform.apply(point)
    rot = _as_matrix(transform, (3, 3), "transform")
    return np.asarray(point, dtype=np.float64) @ rot.T


@dataclass(frozen=True)
class Box3D:
    """Yaw-oriented box: center (x, y, z), size (l, w, h), heading theta.

    l extends along the box's local x axis (heading direction), w along
    local y, h along z.  theta is normalized into [-pi, pi).
    """

    x: float
    y: float
    z: float
    l: float
    w: float
    h: float
    theta: float

    def __post_init__(self):
        if not (self.l > 0 and self.w > 0 and self.h > 0):
            raise ConfigError("box dimensions must be positive")
        theta = float(np.mod(self.theta + np.pi, 2.0 * np.pi) - np.pi)
        object.__setattr__(self, "theta", theta)

    @property
    def center(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def corners(self) -> np.ndarray:
        """Eight corners in ego coordinates, shape (8, 3)."""
        sx = np.array([1, 1, 1, 1, -1, -1, -1, -1]) * (self.l / 2.0)
        sy = np.array([1, 1, -1, -1, 1, 1, -1, -1]) * (self.w / 2.0)
        sz = np.array([1, -1, 1, -1, 1, -1, 1, -1]) * (self.h / 2.0)
        local = np.stack([sx, sy, sz], axis=1)
        c, s = np.cos(self.theta), np.sin(self.theta)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return local @ rot.T + self.center


def build_virtual_frame(
    extrinsics: Extrinsics, ground_normal_ego: Sequence[float] = UP_EGO
) -> tuple[np.ndarray, RigidTransform, float]:
    """Construct the ground-aligned virtual frame for a camera.

    Returns (t_cam_virt, t_virt_ego, ground_height_H) where t_cam_virt is
    the pure rotation taking camera coordinates into the virtual frame,
    t_virt_ego the rigid map from the virtual frame into ego, and
    ground_height_H the signed distance from the optical center to the
    ground plane along its normal.

    Raises DegenerateOrientation when the optical axis is within ~1e-6 rad
    of the ground normal (the projected Z axis vanishes), and
    CameraBelowGround when the center is on or below the ground plane.
    """
    normal = np.asarray(ground_normal_ego, dtype=np.float64)
    norm = np.linalg.norm(normal)
    if not np.isfinite(norm) or abs(norm - 1.0) > 1e-9:
        raise ConfigError("ground normal must be a unit vector")
    center = extrinsics.camera_center
    height = float(center @ normal)
    if height <= 0.0:
        raise CameraBelowGround(f"camera center height {height:.6g} m is not above ground")
    optical_axis = extrinsics.rotation[2, :]  # camera +z expressed in ego
    z_proj = optical_axis - (optical_axis @ normal) * normal
    z_norm = np.linalg.norm(z_proj)
    if z_norm < _DEGENERATE_SIN:
        raise DegenerateOrientation(
            "optical axis is parallel to the ground normal; virtual Z undefined"
        )
    z_axis = z_proj / z_norm
    y_axis = -normal
    x_axis = np.cross(y_axis, z_axis)
    virt_to_ego_rot = np.stack([x_axis, y_axis, z_axis], axis=1)
    t_cam_virt = virt_to_ego_rot.T @ extrinsics.rotation.T
    t_virt_ego = RigidTransform(virt_to_ego_rot, center)
    return t_cam_virt, t_virt_ego, height


@dataclass(frozen=True)
class CameraRig:
    """A calibrated camera with its precomputed virtual frame.

    t_cam_virt rotates camera coordinates into the virtual frame;
    t_virt_ego maps virtual coordinates into ego; ground_height_H is the
    optical center's height above the ground plane.
    """

    intrinsics: Intrinsics
    extrinsics: Extrinsics
    t_cam_virt: np.ndarray
    t_virt_ego: RigidTransform
    ground_height_H: float
    rig_id: str = ""

    @classmethod
    def build(
        cls,
        intrinsics: Intrinsics,
        extrinsics: Extrinsics,
        ground_normal_ego: Sequence[float] = UP_EGO,
        rig_id: str | None = None,
    ) -> "CameraRig":
        t_cam_virt, t_virt_ego, height = build_virtual_frame(extrinsics, ground_normal_ego)
        if rig_id is None:
            digest = hashlib.sha256()
            digest.update(np.asarray(
                [intrinsics.fx, intrinsics.fy, intrinsics.cx, intrinsics.cy], dtype=np.float64
            ).tobytes())
            digest.update(extrinsics.rotation.tobytes())
            digest.update(extrinsics.translation.tobytes())
            rig_id = "rig-" + digest.hexdigest()[:12]
        return cls(intrinsics, extrinsics, t_cam_virt, t_virt_ego, height, rig_id)

    @property
    def camera_center(self) -> np.ndarray:
        return self.extrinsics.camera_center


def pixel_to_ref_cam(u, v, intrinsics: Intrinsics) -> np.ndarray:
    """Reference point of pixel (u, v) at camera depth 1.

    Evaluates K^-1 @ [u, v, 1]; accepts scalars or equally shaped arrays
    (stacked along the last axis of the result).  Callers are expected to
    pass coordinates inside the image bounds.
    """
    x = (np.asarray(u, dtype=np.float64) - intrinsics.cx) / intrinsics.fx
    y = (np.asarray(v, dtype=np.float64) - intrinsics.cy) / intrinsics.fy
    return np.stack([x, y, np.ones_like(x)], axis=-1)


def project_ego(points: np.ndarray, intrinsics: Intrinsics, extrinsics: Extrinsics):
    """Project ego points into the image.

    Returns (u, v, depth, visible): pixel coordinates, camera-frame z, and
    a mask of points that land inside the image with positive depth.
    """
    pts = np.asarray(points, dtype=np.float64)
    cam = pts @ extrinsics.rotation.T + extrinsics.translation
    depth = cam[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intrinsics.fx * cam[..., 0] / depth + intrinsics.cx
        v = intrinsics.fy * cam[..., 1] / depth + intrinsics.cy
    visible = (
        (depth > 0)
        & (u >= 0)
        & (u < intrinsics.image_w)
        & (v >= 0)
        & (v < intrinsics.image_h)
    )
    return u, v, depth, visible


def _rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def extrinsics_from_pose(
    position: Sequence[float],
    yaw_deg: float = 0.0,
    pitch_deg: float = 0.0,
    roll_deg: float = 0.0,
) -> Extrinsics:
    """Build extrinsics from a camera pose in ego coordinates.

    With all angles zero the camera sits at `position` looking along ego +x
    with image right along ego -y.  yaw rotates the view about ego z,
    positive pitch tilts the optical axis downward, and roll turns the
    camera about its own optical axis.
    """
    yaw = np.deg2rad(yaw_deg)
    pitch = np.deg2rad(pitch_deg)
    roll = np.deg2rad(roll_deg)
    # Columns: camera x (image right), y (image down), z (optical) in ego.
    base = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
    cam_to_ego = _rot_z(yaw) @ base @ _rot_x(-pitch) @ _rot_z(roll)
    position = np.asarray(position, dtype=np.float64)
    return Extrinsics(rotation=cam_to_ego.T, translation=-cam_to_ego.T @ position)


def rig_to_json_dict(rig: CameraRig) -> dict:
    intr = rig.intrinsics
    extr = rig.extrinsics
    return {
        "name": rig.rig_id,
        "intrinsics": {
            "fx": intr.fx,
            "fy": intr.fy,
            "cx": intr.cx,
            "cy": intr.cy,
            "image_w": intr.image_w,
            "image_h": intr.image_h,
        },
        "extrinsics": {
            "rotation": extr.rotation.tolist(),
            "translation": extr.translation.tolist(),
        },
        "ground_normal": UP_EGO.tolist(),
    }


def rig_from_json_dict(doc: dict) -> CameraRig:
    try:
        inode = doc["intrinsics"]
        enode = doc["extrinsics"]
        intr = Intrinsics(
            fx=float(inode["fx"]),
            fy=float(inode["fy"]),
            cx=float(inode["cx"]),
            cy=float(inode["cy"]),
            image_w=int(inode["image_w"]),
            image_h=int(inode["image_h"]),
        )
        extr = Extrinsics(
            rotation=enode["rotation"], translation=enode["translation"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed rig document: {exc}") from exc
    normal = doc.get("ground_normal", UP_EGO.tolist())
    return CameraRig.build(intr, extr, normal, rig_id=doc.get("name"))


def load_rig(path) -> CameraRig:
    """Load a camera rig from a JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read rig config {path}: {exc}") from exc
    return rig_from_json_dict(doc)


def save_rig(rig: CameraRig, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(rig_to_json_dict(rig), handle, indent=2, sort_keys=True)
        handle.write("\n")
