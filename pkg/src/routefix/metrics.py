"""Front-quality metrics: normalized hypervolume, IGD and the analysis success rate."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InstanceError


@dataclass(frozen=True)
class NormalizationBounds:
    """Per-objective ideal/nadir used to map fronts into [0, 1]^2.

    The hypervolume reference point in normalized space is (1.1, 1.1).
    """

    ideal: tuple
    nadir: tuple
    reference: tuple = (1.1, 1.1)

    def __post_init__(self):
        for lo, hi in zip(self.ideal, self.nadir):
            if lo > hi:
                raise InstanceError(f"ideal {self.ideal} exceeds nadir {self.nadir}")

    @classmethod
    def from_points(cls, points):
        arr = np.asarray(points, dtype=float)
        if arr.size == 0:
            raise InstanceError("cannot derive bounds from zero points")
        return cls(ideal=tuple(arr.min(axis=0)), nadir=tuple(arr.max(axis=0)))


def normalize(points, bounds):
    """Map objective vectors to [0, 1] per axis: (f - ideal) / (nadir - ideal).

    A degenerate axis (nadir == ideal) maps to 0 and emits a warning.
    """
    arr = np.asarray(points, dtype=float).copy()
    if arr.size == 0:
        return arr
    ideal = np.asarray(bounds.ideal, dtype=float)
    span = np.asarray(bounds.nadir, dtype=float) - ideal
    degenerate = span <= 0.0
    if degenerate.any():
        warnings.warn(
            f"objective axes {np.flatnonzero(degenerate).tolist()} have zero range; "
            "normalized to 0",
            stacklevel=2,
        )
    safe = np.where(degenerate, 1.0, span)
    out = (arr - ideal) / safe
    out[:, degenerate] = 0.0
    return out


def _non_dominated(points):
    """Indices of the non-dominated subset (minimization, duplicates collapsed)."""
    arr = np.asarray(points, dtype=float)
    keep = []
    seen = set()
    for i in range(len(arr)):
        p = arr[i]
        key = (p[0], p[1])
        if key in seen:
            continue
        dominated = False
        for j in range(len(arr)):
            if j == i:
                continue
            q = arr[j]
            if q[0] <= p[0] and q[1] <= p[1] and (q[0] < p[0] or q[1] < p[1]):
                dominated = True
                break
        if not dominated:
            keep.append(i)
            seen.add(key)
    return keep


def hypervolume_2d(points, reference):
    """Exact area dominated by the non-dominated subset, bounded by ``reference``.

    Points at or beyond the reference in any coordinate contribute nothing.
    """
    ref_x, ref_y = float(reference[0]), float(reference[1])
    pts = [(float(p[0]), float(p[1])) for p in points
           if p[0] < ref_x and p[1] < ref_y]
    if not pts:
        return 0.0
    idx = _non_dominated(pts)
    staircase = sorted(pts[i] for i in idx)
    area = 0.0
    prev_y = ref_y
    for x, y in staircase:
        if y < prev_y:
            area += (ref_x - x) * (prev_y - y)
            prev_y = y
    return area


def igd(approx, reference_set):
    """Mean Euclidean distance from each reference point to its nearest approx point."""
    ref = np.asarray(reference_set, dtype=float)
    if ref.size == 0:
        raise InstanceError("reference set must be non-empty")
    app = np.asarray(approx, dtype=float)
    if app.size == 0:
        return math.inf
    diff = ref[:, None, :] - app[None, :, :]
    dists = np.sqrt((diff * diff).sum(axis=2))
    return float(dists.min(axis=1).mean())


def build_reference_set(fronts):
    """Non-dominated subset of the union of fronts, duplicates removed, sorted."""
    union = [tuple(map(float, p)) for front in fronts for p in front]
    if not union:
        raise InstanceError("need at least one front")
    keep = _non_dominated(union)
    return sorted(union[i] for i in keep)


def asr(reports):
    """Fraction of suggestion reports whose adjustments restore feasibility."""
    if not reports:
        return math.nan
    ok = sum(1 for r in reports if r.residual_violation == 0.0)
    return ok / len(reports)


@dataclass(frozen=True)
class MetricReport:
    """One benchmark measurement row."""

    variant: str
    method: str
    seed: int
    hv: float
    igd: float
    runtime_s: float
    front_size: int

    CSV_HEADER = "variant,method,seed,hv,igd,runtime_s,front_size"

    def csv_row(self):
        return (
            f"{self.variant},{self.method},{self.seed},"
            f"{self.hv!r},{self.igd!r},{self.runtime_s!r},{self.front_size}"
        )

    @classmethod
    def from_csv_row(cls, row):
        parts = row.split(",")
        if len(parts) != 7:
            raise InstanceError(f"bad results row: {row!r}")
        return cls(
            variant=parts[0], method=parts[1], seed=int(parts[2]),
            hv=float(parts[3]), igd=float(parts[4]),
            runtime_s=float(parts[5]), front_size=int(parts[6]),
        )
