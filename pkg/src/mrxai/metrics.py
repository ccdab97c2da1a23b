"""Explanation scoring against ground-truth masks.

The headline score combines three unit-interval components per
explanation region: plain dice overlap, a centroid-distance term
d = 1 - E/E_max (1 at coincident centers; E_max is the farthest image
corner from the ground-truth centroid), and a size ratio penalizing
over- and under-sized explanations.  Multi-region explanations score
the mean over their connected regions, and the region count itself is
reported alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BothEmpty, EmptyInput, EmptyMask, InvalidHpe, InvalidParams
from .imaging import BinaryMask, centroid, connected_components


@dataclass(frozen=True)
class PdcParams:
    """Penalty factors: small scales undersized ratios, big oversized ones."""

    small: float = 1.0
    big: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.small <= 1.0 or not 0.0 < self.big <= 1.0:
            raise InvalidParams("penalty factors must be in (0, 1]")


@dataclass(frozen=True)
class PdcBreakdown:
    dc: float
    d: float
    r: float
    pdc: float
    count: int

    def as_dict(self) -> dict:
        return {"dc": self.dc, "d": self.d, "r": self.r,
                "pdc": self.pdc, "count": self.count}


def dice(x: BinaryMask, y: BinaryMask) -> float:
    """2|X n Y| / (|X| + |Y|); undefined (BothEmpty) when both are empty."""
    if x.shape != y.shape:
        raise InvalidParams(f"mask shapes differ: {x.shape} vs {y.shape}")
    ax, ay = x.area, y.area
    if ax == 0 and ay == 0:
        raise BothEmpty("dice of two empty masks is 0/0")
    overlap = int(np.logical_and(x.bits, y.bits).sum())
    return 2.0 * overlap / (ax + ay)


def _max_corner_distance(center: tuple[float, float], shape: tuple[int, int]) -> float:
    h, w = shape
    return max(math.hypot(center[0] - r, center[1] - c)
               for r in (0.0, h - 1.0) for c in (0.0, w - 1.0))


def _distance_term(exp_center, hpe_center, shape) -> float:
    e = math.hypot(exp_center[0] - hpe_center[0], exp_center[1] - hpe_center[1])
    e_max = _max_corner_distance(hpe_center, shape)
    if e_max == 0.0:  # 1x1 image: centers necessarily coincide
        return 1.0 if e == 0.0 else 0.0
    return min(max(1.0 - e / e_max, 0.0), 1.0)


def distance_component(exp: BinaryMask, hpe: BinaryMask,
                       shape: tuple[int, int] | None = None) -> float:
    """1 - E/E_max between mask centroids, clamped into [0, 1].

    E_max is measured from the ground-truth centroid to the farthest of
    the four image corners, so d = 1 exactly when the centroids coincide.
    """
    if exp.shape != hpe.shape:
        raise InvalidParams(f"mask shapes differ: {exp.shape} vs {hpe.shape}")
    if exp.is_empty() or hpe.is_empty():
        raise EmptyMask("distance component needs two non-empty masks")
    return _distance_term(centroid(exp), centroid(hpe), shape or hpe.shape)


def size_ratio(exp_size: int, hpe_size: int, params: PdcParams = PdcParams()) -> float:
    """Area ratio with one-sided penalties; 1 at equal sizes, 0 for empty exp."""
    if hpe_size <= 0:
        raise InvalidHpe("ground-truth mask must be non-empty")
    if exp_size == 0:
        return 0.0
    if exp_size < hpe_size:
        return params.small * exp_size / hpe_size
    if hpe_size < exp_size:
        return params.big * hpe_size / exp_size
    return 1.0


def pdc(exp: BinaryMask, hpe: BinaryMask, params: PdcParams = PdcParams(),
        connectivity: int = 8) -> PdcBreakdown:
    """Penalized dice: mean of (d + r + dc)/3 over the explanation's regions.

    The explanation is decomposed into connected regions; each region is
    scored against the full ground-truth mask (its own centroid and its
    own area).  An empty explanation scores 0 across the board.
    """
    if exp.shape != hpe.shape:
        raise InvalidParams(f"mask shapes differ: {exp.shape} vs {hpe.shape}")
    if hpe.is_empty():
        raise InvalidHpe("ground-truth mask must be non-empty")
    if exp.is_empty():
        return PdcBreakdown(dc=0.0, d=0.0, r=0.0, pdc=0.0, count=0)

    hpe_center = centroid(hpe)
    hpe_area = hpe.area
    shape = hpe.shape
    dcs, ds, rs = [], [], []
    regions = connected_components(exp, connectivity)
    for region in regions:
        overlap = int(hpe.bits[region.pixels[:, 0], region.pixels[:, 1]].sum())
        dcs.append(2.0 * overlap / (region.area + hpe_area))
        ds.append(_distance_term(region.centroid, hpe_center, shape))
        rs.append(size_ratio(region.area, hpe_area, params))
    dc_m, d_m, r_m = (float(np.mean(v)) for v in (dcs, ds, rs))
    return PdcBreakdown(dc=dc_m, d=d_m, r=r_m, pdc=(dc_m + d_m + r_m) / 3.0,
                        count=len(regions))


def summarize(values, sample: bool = True) -> tuple[float, float]:
    """Mean and standard deviation (sample n-1 by default; n=1 gives std 0)."""
    vals = np.asarray(list(values), dtype=np.float64)
    if vals.size == 0:
        raise EmptyInput("summarize needs at least one value")
    if vals.size == 1:
        return float(vals[0]), 0.0
    return float(vals.mean()), float(vals.std(ddof=1 if sample else 0))
