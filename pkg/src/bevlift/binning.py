"""Discretization strategies for height and depth ranges.

A BinSpec carves [range_min, range_max) into n_bins contiguous intervals.
Strategies:

* UD: uniform intervals.
* SID: geometric (log-space) intervals, computed after shifting the range
  by s = 1 - range_min so the lower edge sits at 1 and logs are defined
  for ranges containing zero or negatives.
* LID: linearly increasing widths; width of bin i is proportional to
  (i + 1), which fixes the base width at 2 * span / (n * (n + 1)).
* DID: alpha-warped intervals, edge(i) = range_min + span * (i/n)**alpha.
  A value maps to bin floor(n * t**(1/alpha)) with t its normalized
  position in the range.  alpha = 1 reduces to UD; larger alpha packs
  bins more densely toward range_min.
* DEPTH_UD: identical arithmetic to UD, tagged as a depth discretization
  so lifting can tell height and depth bin specs apart.

Values outside the configured range raise OutOfRange rather than being
clamped; the exact upper edge maps to the last bin.  Bin representatives
are interval midpoints.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, IndexOutOfRange, OutOfRange

STRATEGIES = ("UD", "SID", "LID", "DID", "DEPTH_UD")
HEIGHT_STRATEGIES = ("UD", "SID", "LID", "DID")


@dataclass(frozen=True)
class BinSpec:
    strategy: str
    n_bins: int
    range_min: float
    range_max: float
    alpha: float | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.n_bins < 1:
            raise ConfigError("n_bins must be >= 1")
        if not (self.range_min < self.range_max):
            raise ConfigError("range_min must be strictly below range_max")
        if self.strategy == "DID":
            if self.alpha is None or not (self.alpha > 0):
                raise ConfigError("DID requires alpha > 0")

    @property
    def span(self) -> float:
        return self.range_max - self.range_min

    @property
    def is_depth(self) -> bool:
        return self.strategy == "DEPTH_UD"

    def to_json_dict(self) -> dict:
        doc = {
            "strategy": self.strategy,
            "n_bins": self.n_bins,
            "range_min": self.range_min,
            "range_max": self.range_max,
        }
        if self.alpha is not None:
            doc["alpha"] = self.alpha
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "BinSpec":
        try:
            return cls(
                strategy=str(doc["strategy"]),
                n_bins=int(doc["n_bins"]),
                range_min=float(doc["range_min"]),
                range_max=float(doc["range_max"]),
                alpha=float(doc["alpha"]) if "alpha" in doc else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed bin spec: {exc}") from exc


def _sid_shift(spec: BinSpec) -> float:
    # Shift making the lower edge exactly 1, so log(lo) == 0.
    return 1.0 - spec.range_min


def bin_edges(spec: BinSpec) -> np.ndarray:
    """All n_bins + 1 edges, strictly increasing, spanning the range."""
    n = spec.n_bins
    i = np.arange(n + 1, dtype=np.float64)
    if spec.strategy in ("UD", "DEPTH_UD"):
        edges = spec.range_min + spec.span * (i / n)
    elif spec.strategy == "DID":
        edges = spec.range_min + spec.span * (i / n) ** spec.alpha
    elif spec.strategy == "SID":
        shift = _sid_shift(spec)
        hi = spec.range_max + shift
        edges = np.exp(np.log(hi) * (i / n)) - shift
    else:  # LID
        base = 2.0 * spec.span / (n * (n + 1.0))
        edges = spec.range_min + base * (i * (i + 1.0) / 2.0)
    edges[0] = spec.range_min
    edges[-1] = spec.range_max
    return edges


def value_to_bin(value, spec: BinSpec):
    """Bin index of a value (scalar or array).

    Raises OutOfRange when any value lies outside [range_min, range_max];
    the upper edge itself maps to the last bin.
    """
    arr = np.asarray(value, dtype=np.float64)
    bad = (arr < spec.range_min) | (arr > spec.range_max) | ~np.isfinite(arr)
    if np.any(bad):
        offender = arr[bad].flat[0] if arr.ndim else float(arr)
        raise OutOfRange(
            f"value {offender!r} outside bin range [{spec.range_min}, {spec.range_max}]"
        )
    n = spec.n_bins
    if spec.strategy in ("UD", "DEPTH_UD"):
        t = (arr - spec.range_min) / spec.span
        idx = np.floor(n * t)
    elif spec.strategy == "DID":
        t = (arr - spec.range_min) / spec.span
        idx = np.floor(n * t ** (1.0 / spec.alpha))
    elif spec.strategy == "SID":
        shift = _sid_shift(spec)
        hi = spec.range_max + shift
        idx = np.floor(n * np.log(arr + shift) / np.log(hi))
    else:  # LID
        base = 2.0 * spec.span / (n * (n + 1.0))
        idx = np.floor(0.5 * (-1.0 + np.sqrt(1.0 + 8.0 * (arr - spec.range_min) / base)))
    idx = np.clip(idx, 0, n - 1).astype(np.int64)
    if arr.ndim == 0:
        return int(idx)
    return idx


def bin_to_value(index, spec: BinSpec):
    """Representative value (interval midpoint) of a bin index."""
    idx = np.asarray(index)
    if np.any((idx < 0) | (idx >= spec.n_bins)):
        raise IndexOutOfRange(f"bin index outside [0, {spec.n_bins})")
    edges = bin_edges(spec)
    mids = 0.5 * (edges[idx] + edges[idx + 1])
    if idx.ndim == 0:
        return float(mids)
    return mids


def bin_midpoints(spec: BinSpec) -> np.ndarray:
    """Midpoints of all bins, ascending."""
    edges = bin_edges(spec)
    return 0.5 * (edges[:-1] + edges[1:])
