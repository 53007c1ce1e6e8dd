"""Artifact serialization: CSV with a provenance comment, canonical JSON,
and a small binary tensor container.

Every CSV starts with one comment line carrying the run's config hash and
seed so artifacts stay traceable without a sidecar file.  Floats are
written with repr, which round-trips float64 exactly and keeps files
byte-stable across runs.  The tensor container is magic + dims + float32
little-endian payload; see write_tensor.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .bevpool import BevGrid
from .errors import PipelineError
from .lifting import WedgeCloud
from .robustness import ErrorReport, OverlapReport
from .scene import Histogram, PixelMaps

TENSOR_MAGIC = b"BTF1"


def fmt(value) -> str:
    """One CSV field: floats via repr(float), everything else via str."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, header, rows, meta: dict | None = None) -> None:
    """Write rows to CSV, preceded by a '# key=value ...' comment when
    meta is given.  Values must not contain commas or newlines."""
    lines = []
    if meta:
        lines.append("# " + " ".join(f"{k}={meta[k]}" for k in meta))
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path):
    """Inverse of write_csv: (meta dict, header list, rows of strings)."""
    text = Path(path).read_text().splitlines()
    meta: dict[str, str] = {}
    if text and text[0].startswith("# "):
        for part in text[0][2:].split():
            key, _, value = part.partition("=")
            meta[key] = value
        text = text[1:]
    if not text:
        raise PipelineError(f"{path}: no header line")
    header = text[0].split(",")
    rows = [line.split(",") for line in text[1:] if line]
    return meta, header, rows


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def write_tensor(path, array: np.ndarray) -> None:
    """Binary tensor: b'BTF1', uint32 ndim, uint32 per-dim sizes, then the
    float32 payload, all little-endian, C order."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(np.uint32(arr.ndim).astype("<u4").tobytes())
        fh.write(np.asarray(arr.shape, dtype="<u4").tobytes())
        fh.write(arr.tobytes())


def read_tensor(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != TENSOR_MAGIC:
        raise PipelineError(f"{path}: bad tensor magic {raw[:4]!r}")
    ndim = int(np.frombuffer(raw, dtype="<u4", count=1, offset=4)[0])
    shape = np.frombuffer(raw, dtype="<u4", count=ndim, offset=8)
    payload = np.frombuffer(raw, dtype="<f4", offset=8 + 4 * ndim)
    expected = int(np.prod(shape)) if ndim else payload.size
    if payload.size != expected:
        raise PipelineError(f"{path}: payload holds {payload.size} values, shape wants {expected}")
    return payload.reshape(tuple(int(s) for s in shape)).astype(np.float64)


def wedge_rows(cloud: WedgeCloud):
    header = ["x", "y", "z", "weight"] + [f"f{c}" for c in range(cloud.features.shape[1])]
    rows = (
        (*cloud.positions[i], cloud.weights[i], *cloud.features[i])
        for i in range(cloud.positions.shape[0])
    )
    return header, rows


def bev_rows(grid: BevGrid):
    """One row per cell in row-major order, with cell centers attached."""
    spec = grid.spec
    header = ["ix", "iy", "cx", "cy", "hits"] + [f"c{c}" for c in range(spec.channels)]

    def gen():
        for ix in range(spec.n_x):
            cx = spec.x_min + (ix + 0.5) * spec.res_x
            for iy in range(spec.n_y):
                cy = spec.y_min + (iy + 0.5) * spec.res_y
                yield (ix, iy, cx, cy, int(grid.hit_count[ix, iy]), *grid.data[ix, iy])

    return header, gen()


def maps_rows(maps: PixelMaps):
    header = ["u", "v", "depth", "height", "hit_kind"]
    uu, vv = maps.pixel_grid()

    def gen():
        for r in range(maps.height):
            for c in range(maps.width):
                yield (
                    uu[r, c],
                    vv[r, c],
                    maps.depth[r, c],
                    maps.height_above_ground[r, c],
                    int(maps.hit_kind[r, c]),
                )

    return header, gen()


def histogram_rows(hist: Histogram):
    header = ["bin_left", "bin_right", "count"]
    rows = (
        (hist.edges[i], hist.edges[i + 1], int(hist.counts[i]))
        for i in range(hist.counts.size)
    )
    return header, rows


def error_report_rows(report: ErrorReport):
    header = ["trial", "object", "parameterization", "error_m", "true_distance_m", "n_pixels"]
    rows = zip(
        report.trials,
        report.objects,
        report.parameterizations,
        report.errors_m,
        report.true_distances_m,
        report.n_pixels,
    )
    return header, rows


def overlap_report_dict(report: OverlapReport) -> dict:
    return {
        "overlap_depth": report.overlap_depth,
        "overlap_height": report.overlap_height,
        "height_wins": report.height_wins,
        "n_trials": int(report.trial_overlap_depth.size),
        "n_points": report.n_points,
        "bins": {
            "v_px": report.v_bin_px,
            "depth_m": report.depth_bin_m,
            "height_m": report.height_bin_m,
        },
        "trials": [
            {
                "roll_deg": float(report.rolls_deg[k]),
                "pitch_deg": float(report.pitches_deg[k]),
                "overlap_depth": float(report.trial_overlap_depth[k]),
                "overlap_height": float(report.trial_overlap_height[k]),
            }
            for k in range(report.trial_overlap_depth.size)
        ],
    }
