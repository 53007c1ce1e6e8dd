"""Sum-pooling of weighted lifted points into a BEV grid.

Cells are half-open intervals: a point with coordinate exactly on the
upper extent falls outside.  Pooling accumulates weight * feature per
cell; points outside the extent are dropped and counted, never fatal.

Two reduction modes exist.  "fixed" accumulates in cloud order in a
single pass and is bit-reproducible run to run; "partitioned" stable-sorts
points by cell and reduces each cell's segment, the layout a parallel
backend would use.  The two agree to floating-point reassociation error.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeMismatch
from .lifting import WedgeCloud

MODES = ("fixed", "partitioned")


@dataclass(frozen=True)
class GridSpec:
    """BEV grid geometry: extents in meters, cell resolution, channels."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    res_x: float
    res_y: float
    channels: int

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ConfigError("grid extents must be non-empty")
        if not (self.res_x > 0 and self.res_y > 0):
            raise ConfigError("grid resolution must be positive")
        if self.channels < 1:
            raise ConfigError("grid needs at least one channel")
        for span, res, name in (
            (self.x_max - self.x_min, self.res_x, "x"),
            (self.y_max - self.y_min, self.res_y, "y"),
        ):
            count = span / res
            if abs(count - round(count)) > 1e-9 or round(count) < 1:
                raise ConfigError(f"{name} extent must be a positive whole number of cells")

    @property
    def n_x(self) -> int:
        return int(round((self.x_max - self.x_min) / self.res_x))

    @property
    def n_y(self) -> int:
        return int(round((self.y_max - self.y_min) / self.res_y))

    def to_json_dict(self) -> dict:
        return {
            "x_min": self.x_min,
            "x_max": self.x_max,
            "y_min": self.y_min,
            "y_max": self.y_max,
            "res_x": self.res_x,
            "res_y": self.res_y,
            "channels": self.channels,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "GridSpec":
        try:
            return cls(
                x_min=float(doc["x_min"]),
                x_max=float(doc["x_max"]),
                y_min=float(doc["y_min"]),
                y_max=float(doc["y_max"]),
                res_x=float(doc["res_x"]),
                res_y=float(doc["res_y"]),
                channels=int(doc["channels"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed grid spec: {exc}") from exc


def grid_cell_of(x: float, y: float, spec: GridSpec):
    """Cell (ix, iy) containing (x, y), or None when outside the extent.

    Cells are half-open, so x == x_max (or y == y_max) is outside.
    """
    ix = int(np.floor((x - spec.x_min) / spec.res_x))
    iy = int(np.floor((y - spec.y_min) / spec.res_y))
    if 0 <= ix < spec.n_x and 0 <= iy < spec.n_y:
        return ix, iy
    return None


@dataclass
class BevGrid:
    """Pooled BEV features: data (n_x, n_y, channels), per-cell hit counts,
    and the number of points dropped outside the extent."""

    spec: GridSpec
    data: np.ndarray
    hit_count: np.ndarray
    dropped_points: int = 0

    def __add__(self, other: "BevGrid") -> "BevGrid":
        if self.spec != other.spec:
            raise ShapeMismatch("cannot add grids with different specs")
        return BevGrid(
            self.spec,
            self.data + other.data,
            self.hit_count + other.hit_count,
            self.dropped_points + other.dropped_points,
        )


def pool(cloud: WedgeCloud, spec: GridSpec, mode: str = "fixed") -> BevGrid:
    """Sum weight * feature of every in-extent point into its BEV cell."""
    if mode not in MODES:
        raise ConfigError(f"unknown pooling mode {mode!r}; expected one of {MODES}")
    if cloud.channels != spec.channels:
        raise ShapeMismatch(
            f"cloud has {cloud.channels} channels but the grid expects {spec.channels}"
        )
    xs = cloud.positions[:, 0]
    ys = cloud.positions[:, 1]
    ix = np.floor((xs - spec.x_min) / spec.res_x).astype(np.int64)
    iy = np.floor((ys - spec.y_min) / spec.res_y).astype(np.int64)
    inside = (ix >= 0) & (ix < spec.n_x) & (iy >= 0) & (iy < spec.n_y)
    dropped = int(np.count_nonzero(~inside))

    data = np.zeros((spec.n_x, spec.n_y, spec.channels))
    hits = np.zeros((spec.n_x, spec.n_y), dtype=np.int64)
    ix, iy = ix[inside], iy[inside]
    contrib = cloud.features[inside] * cloud.weights[inside, None]

    if mode == "fixed":
        np.add.at(data, (ix, iy), contrib)
        np.add.at(hits, (ix, iy), 1)
    else:
        flat = ix * spec.n_y + iy
        order = np.argsort(flat, kind="stable")
        flat = flat[order]
        contrib = contrib[order]
        cells, starts = np.unique(flat, return_index=True)
        sums = np.add.reduceat(contrib, starts, axis=0)
        counts = np.diff(np.append(starts, flat.shape[0]))
        data.reshape(-1, spec.channels)[cells] = sums
        hits.reshape(-1)[cells] = counts

    return BevGrid(spec, data, hits, dropped)
