"""Extrinsic-disturbance studies: scatter overlap, localization error, and
the analytic range-error law.

Disturbances rotate the camera about its own optical axis (roll) and
lateral axis (pitch) while keeping the optical center fixed, the way a
pole-mounted camera drifts without leaving its mount.  Angles are sampled
from independent zero-mean normals in degrees, one reproducible substream
per trial.

The scatter study mirrors a row-coordinate-versus-value view of the
scene: for each rig it renders the scene and collects (v, depth) and
(v, height) pairs of every non-sky pixel, then measures how much the
clean and perturbed point sets still overlap, as the intersection of
normalized 2D histograms on a fixed grid.  Depth is tightly coupled to v
(for ground pixels it is an exact function of the row), and its
sensitivity to a rig rotation grows with the square of distance, so a
small disturbance slides the far part of the curve across many cells.
Height occupies the same flat band of cells in every column, so the
shifted set lands back on itself.

The localization study pushes truth-conditioned noisy bin distributions
through the full lift for both parameterizations and compares each
object's estimated camera-origin distance against the distance of the
same estimator fed exact values, isolating parameterization-induced
error from surface-versus-center offsets.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .binning import BinSpec, bin_midpoints
from .errors import ConfigError, InvalidGeometry, NoVisibleObjects
from .geometry import CameraRig, Extrinsics, _rot_x, _rot_z, project_ego
from .lifting import lift_many_depth, lift_many_height
from .rng import substream
from .scene import (
    NoiseModel,
    Scene,
    cast_rays,
    predict_depth_distribution,
    predict_height_distribution,
    render,
)

# Histogram grid of the scatter overlap metric.
V_BIN_PX = 16.0
DEPTH_BIN_M = 2.0
HEIGHT_BIN_M = 0.1

DEFAULT_SIGMA_DEG = 1.67


@dataclass(frozen=True)
class DisturbanceSpec:
    """Zero-mean normal disturbance magnitudes (degrees) and trial plan."""

    sigma_roll_deg: float = DEFAULT_SIGMA_DEG
    sigma_pitch_deg: float = DEFAULT_SIGMA_DEG
    seed: int = 0
    n_trials: int = 100

    def __post_init__(self):
        if self.sigma_roll_deg < 0 or self.sigma_pitch_deg < 0:
            raise ConfigError("disturbance sigmas must be non-negative")
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")

    def to_json_dict(self) -> dict:
        return {
            "sigma_roll_deg": self.sigma_roll_deg,
            "sigma_pitch_deg": self.sigma_pitch_deg,
            "seed": self.seed,
            "n_trials": self.n_trials,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DisturbanceSpec":
        try:
            return cls(
                sigma_roll_deg=float(doc.get("sigma_roll_deg", DEFAULT_SIGMA_DEG)),
                sigma_pitch_deg=float(doc.get("sigma_pitch_deg", DEFAULT_SIGMA_DEG)),
                seed=int(doc.get("seed", 0)),
                n_trials=int(doc.get("n_trials", 100)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed disturbance spec: {exc}") from exc


def perturb_extrinsics(extr: Extrinsics, roll_deg: float, pitch_deg: float) -> Extrinsics:
    """Compose roll (about the optical axis) and pitch (about the lateral
    axis) offsets with the extrinsics, keeping the optical center fixed.

    The offset acts in camera coordinates: p_cam' = D @ (R p + t) with
    D = Rx(pitch) @ Rz(roll), so rotation and translation both pick up D
    and the camera position -R^T t is unchanged.
    """
    delta = _rot_x(np.deg2rad(pitch_deg)) @ _rot_z(np.deg2rad(roll_deg))
    return Extrinsics(delta @ extr.rotation, delta @ extr.translation)


def perturb_rig(rig: CameraRig, roll_deg: float, pitch_deg: float) -> CameraRig:
    """Rebuild a rig around perturbed extrinsics (same ground normal)."""
    normal = -rig.t_virt_ego.rotation[:, 1]
    extr = perturb_extrinsics(rig.extrinsics, roll_deg, pitch_deg)
    return CameraRig.build(rig.intrinsics, extr, normal, rig_id=rig.rig_id + "-perturbed")


def sample_disturbances(spec: DisturbanceSpec) -> np.ndarray:
    """(n_trials, 2) array of (roll_deg, pitch_deg) draws, one substream
    per trial so any trial can be regenerated on its own."""
    out = np.empty((spec.n_trials, 2))
    for k in range(spec.n_trials):
        rng = substream(spec.seed, k)
        out[k, 0] = rng.normal(0.0, spec.sigma_roll_deg)
        out[k, 1] = rng.normal(0.0, spec.sigma_pitch_deg)
    return out


def _pixel_observations(scene: Scene, rig: CameraRig, sample_stride: int):
    maps = render(scene, rig, sample_stride)
    mask = maps.non_sky
    _, vv = maps.pixel_grid()
    return vv[mask], maps.depth[mask], maps.height_above_ground[mask]


def _hist_cells(v_vals: np.ndarray, y_vals: np.ndarray, y_bin: float) -> dict:
    counts: dict[tuple[int, int], int] = {}
    vb = np.floor(v_vals / V_BIN_PX).astype(np.int64)
    yb = np.floor(y_vals / y_bin).astype(np.int64)
    for key in zip(vb.tolist(), yb.tolist()):
        counts[key] = counts.get(key, 0) + 1
    return counts


def _intersection(p: dict, n_p: int, q: dict, n_q: int) -> float:
    shared = 0.0
    for key, count in p.items():
        if key in q:
            shared += min(count / n_p, q[key] / n_q)
    return shared


@dataclass
class OverlapReport:
    """Mean scatter overlaps over trials plus the per-trial breakdown."""

    overlap_depth: float
    overlap_height: float
    n_points: int
    v_bin_px: float = V_BIN_PX
    depth_bin_m: float = DEPTH_BIN_M
    height_bin_m: float = HEIGHT_BIN_M
    rolls_deg: np.ndarray = field(default_factory=lambda: np.empty(0))
    pitches_deg: np.ndarray = field(default_factory=lambda: np.empty(0))
    trial_overlap_depth: np.ndarray = field(default_factory=lambda: np.empty(0))
    trial_overlap_height: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def height_wins(self) -> int:
        """Trials where the height scatter overlaps strictly more."""
        return int(np.count_nonzero(self.trial_overlap_height > self.trial_overlap_depth))


def scatter_overlap(
    scene: Scene, rig: CameraRig, spec: DisturbanceSpec, sample_stride: int = 16
) -> OverlapReport:
    """Clean-versus-perturbed overlap of (v, depth) and (v, height) scatters.

    For every trial the scene is rendered through the clean rig and the
    perturbed one; each parameterization's overlap is the intersection of
    the two normalized 2D histograms over non-sky pixels.  Heights keep
    occupying the same band of cells in every image column, while the
    depth-versus-row curve moves with the rig.
    """
    v0, d0, h0 = _pixel_observations(scene, rig, sample_stride)
    if v0.size == 0:
        raise NoVisibleObjects("the clean rig renders no non-sky pixel")
    p_depth = _hist_cells(v0, d0, DEPTH_BIN_M)
    p_height = _hist_cells(v0, h0, HEIGHT_BIN_M)

    angles = sample_disturbances(spec)
    od = np.empty(spec.n_trials)
    oh = np.empty(spec.n_trials)
    for k, (roll, pitch) in enumerate(angles):
        v1, d1, h1 = _pixel_observations(
            scene, perturb_rig(rig, roll, pitch), sample_stride
        )
        if v1.size == 0:
            raise NoVisibleObjects(f"trial {k} renders no non-sky pixel")
        q_depth = _hist_cells(v1, d1, DEPTH_BIN_M)
        q_height = _hist_cells(v1, h1, HEIGHT_BIN_M)
        od[k] = _intersection(p_depth, v0.size, q_depth, v1.size)
        oh[k] = _intersection(p_height, v0.size, q_height, v1.size)

    return OverlapReport(
        overlap_depth=float(od.mean()),
        overlap_height=float(oh.mean()),
        n_points=int(v0.size),
        rolls_deg=angles[:, 0],
        pitches_deg=angles[:, 1],
        trial_overlap_depth=od,
        trial_overlap_height=oh,
    )


@dataclass
class ErrorReport:
    """Long-format localization errors: one row per (trial, object,
    parameterization)."""

    trials: list
    objects: list
    parameterizations: list
    errors_m: list
    true_distances_m: list
    n_pixels: list
    camera_height_m: float = 0.0
    noise_kind: str = ""
    disturbed: bool = False

    def errors_for(self, parameterization: str) -> np.ndarray:
        mask = [p == parameterization for p in self.parameterizations]
        return np.asarray(self.errors_m)[np.asarray(mask)]

    def summary(self) -> dict:
        out = {
            "camera_height_m": self.camera_height_m,
            "noise_kind": self.noise_kind,
            "disturbed": self.disturbed,
        }
        for param in ("height", "depth"):
            errs = self.errors_for(param)
            out[param] = {
                "n": int(errs.size),
                "mean_m": float(errs.mean()) if errs.size else float("nan"),
                "median_m": float(np.median(errs)) if errs.size else float("nan"),
                "p90_m": float(np.percentile(errs, 90)) if errs.size else float("nan"),
            }
        return out


def _object_rows(
    maps, rig: CameraRig, dist_h, dist_d, mids_h, mids_d, scene: Scene
):
    uu, vv = maps.pixel_grid()
    cam = rig.camera_center
    rows = []
    for k in range(len(scene.boxes)):
        mask = maps.hit_kind == k + 1
        n_px = int(np.count_nonzero(mask))
        if n_px == 0:
            continue
        us, vs = uu[mask], vv[mask]
        true_pts = lift_many_depth(us, vs, maps.depth[mask], rig)
        d_ref = float(np.linalg.norm(true_pts.mean(axis=0) - cam))

        w_h = dist_h.data[mask]  # (n_px, B_h), rows sum to 1
        pos_h = lift_many_height(
            np.repeat(us, mids_h.size),
            np.repeat(vs, mids_h.size),
            np.tile(mids_h, n_px),
            rig,
        ).reshape(n_px, mids_h.size, 3)
        est_h = (w_h[:, :, None] * pos_h).sum(axis=(0, 1)) / n_px
        err_h = abs(float(np.linalg.norm(est_h - cam)) - d_ref)

        w_d = dist_d.data[mask]
        pos_d = lift_many_depth(
            np.repeat(us, mids_d.size),
            np.repeat(vs, mids_d.size),
            np.tile(mids_d, n_px),
            rig,
        ).reshape(n_px, mids_d.size, 3)
        est_d = (w_d[:, :, None] * pos_d).sum(axis=(0, 1)) / n_px
        err_d = abs(float(np.linalg.norm(est_d - cam)) - d_ref)

        rows.append((k, "height", err_h, d_ref, n_px))
        rows.append((k, "depth", err_d, d_ref, n_px))
    return rows


def localization_error(
    scene: Scene,
    rig: CameraRig,
    height_bins: BinSpec,
    depth_bins: BinSpec,
    noise: NoiseModel,
    disturbance: DisturbanceSpec | None = None,
    sample_stride: int = 16,
) -> ErrorReport:
    """Camera-origin distance error of each object's center estimate.

    Per trial the scene is rendered from the (possibly perturbed) rig,
    truth-conditioned height and depth distributions are produced under
    the noise model, and every object's center is estimated as the
    weighted centroid of its lifted surface points.  The reference for an
    object is the camera distance of the exact surface centroid over the
    same pixels, so a noiseless run errs only by bin quantization.
    """
    if not depth_bins.is_depth:
        raise ConfigError("depth_bins must use the DEPTH_UD strategy")
    mids_h = bin_midpoints(height_bins)
    mids_d = bin_midpoints(depth_bins)
    if disturbance is None:
        angle_list = np.zeros((1, 2))
    else:
        angle_list = sample_disturbances(disturbance)

    report = ErrorReport(
        trials=[], objects=[], parameterizations=[], errors_m=[],
        true_distances_m=[], n_pixels=[],
        camera_height_m=rig.ground_height_H,
        noise_kind=noise.kind,
        disturbed=disturbance is not None,
    )
    for trial, (roll, pitch) in enumerate(angle_list):
        rig_t = rig if disturbance is None else perturb_rig(rig, roll, pitch)
        maps = render(scene, rig_t, sample_stride)
        dist_h = predict_height_distribution(maps, height_bins, noise)
        dist_d = predict_depth_distribution(maps, depth_bins, noise)
        for k, param, err, d_ref, n_px in _object_rows(
            maps, rig_t, dist_h, dist_d, mids_h, mids_d, scene
        ):
            report.trials.append(trial)
            report.objects.append(k)
            report.parameterizations.append(param)
            report.errors_m.append(err)
            report.true_distances_m.append(d_ref)
            report.n_pixels.append(n_px)
    if not report.errors_m:
        raise NoVisibleObjects("no object rendered any pixels in any trial")
    return report


def height_error_law(d: float, delta_h: float, H: float, h: float) -> float:
    """Ground-range error caused by a height bias: d * delta_h / (H - h).

    d is the true ground range of the point, h its true height, delta_h
    the bias, H the camera height above ground.  Requires the biased
    height to stay below the camera (H > h + delta_h) and h < H.
    """
    if H <= h or H <= h + delta_h:
        raise InvalidGeometry(
            f"camera height {H} must exceed both h={h} and h+delta_h={h + delta_h}"
        )
    return d * delta_h / (H - h)


def simulate_range_bias(rig: CameraRig, u: float, v: float, h: float, delta_h: float):
    """Lift a pixel at its true height and at a biased height.

    Returns (d_true, simulated_error): the true ground range of the pixel
    at height h and the drop in ground range caused by the bias, measured
    from the camera's ground projection.  Matches height_error_law exactly
    because the lift is linear in the height.
    """
    cam = rig.camera_center
    p_true = lift_many_height([u], [v], [h], rig)[0]
    p_bias = lift_many_height([u], [v], [h + delta_h], rig)[0]
    d_true = float(np.hypot(p_true[0] - cam[0], p_true[1] - cam[1]))
    d_bias = float(np.hypot(p_bias[0] - cam[0], p_bias[1] - cam[1]))
    return d_true, d_true - d_bias


@dataclass
class MatchedPoints:
    """Static surface points observed by two rigs: per-point heights and
    depths under each, restricted to points visible in both."""

    height_a: np.ndarray
    height_b: np.ndarray
    depth_a: np.ndarray
    depth_b: np.ndarray
    n_candidates: int


def matched_surface_points(
    scene: Scene, rig_a: CameraRig, rig_b: CameraRig, sample_stride: int = 16
) -> MatchedPoints:
    """Match surface points of rig_a's render into rig_b by reprojection.

    Each non-sky hit of rig_a is projected into rig_b; a ray cast through
    the exact projected coordinates must reach the same point (no
    occlusion, within 1e-6 m) for the pair to count.  Heights are world
    properties so matched heights agree up to rounding; depths are
    rig-relative and genuinely change.
    """
    maps = render(scene, rig_a, sample_stride)
    mask = maps.non_sky
    uu, vv = maps.pixel_grid()
    us, vs = uu[mask], vv[mask]
    depth_a = maps.depth[mask]
    height_a = maps.height_above_ground[mask]
    pts = lift_many_depth(us, vs, depth_a, rig_a)

    u2, v2, depth_proj, visible = project_ego(pts, rig_b.intrinsics, rig_b.extrinsics)
    n_candidates = int(np.count_nonzero(visible))
    u2, v2, depth_proj = u2[visible], v2[visible], depth_proj[visible]
    d_cast, h_cast, _ = cast_rays(scene, rig_b, u2, v2)
    matched = np.isfinite(d_cast) & (np.abs(d_cast - depth_proj) < 1e-6)
    return MatchedPoints(
        height_a=height_a[visible][matched],
        height_b=h_cast[matched],
        depth_a=depth_a[visible][matched],
        depth_b=d_cast[matched],
        n_candidates=n_candidates,
    )
