"""Box-counting dimension estimates and the nested-cover lower bound.

The nested-cover bound (McMullen's lemma) turns per-level densities
Delta_l and diameters d_l of a nested family of compact sets into a lower
bound  n - limsup_l (sum_{j<=l} |log Delta_j|) / |log d_l|  on the
dimension of the intersection.  On a finite prefix the limsup is proxied
by the maximum of the ratio over the final third of the available levels;
on exactly geometric data the proxy is exact, which the tests pin to
1e-12.

Diameters are carried in log space internally: the interesting covers
shrink like R^(-c l) and underflow float64 long before the algebra gets
hard.

Box-counting estimates are proxies: the box dimension upper-bounds the
Hausdorff dimension and the two are never asserted equal here.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import dynamics
from .errors import ValidationError
from .geometry import as_point
from .dynamics import Rect

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoverSequence:
    """Per-level densities and diameters of a nested cover family.

    log_diameters holds ln d_l; the diameters property recovers d_l where
    representable.
    """

    deltas: tuple[float, ...]
    log_diameters: tuple[float, ...]
    ambient_dimension: int = 2

    def __post_init__(self):
        if len(self.deltas) == 0 or len(self.deltas) != len(self.log_diameters):
            raise ValidationError("cover needs nonempty, equal-length level data")
        if any(not 0.0 < d <= 1.0 for d in self.deltas):
            raise ValidationError("densities must lie in (0, 1]")
        if any(not ld < 0.0 for ld in self.log_diameters):
            raise ValidationError("diameters must lie in (0, 1)")
        if self.ambient_dimension < 1:
            raise ValidationError("ambient dimension must be >= 1")

    @classmethod
    def from_values(cls, deltas, diameters, ambient_dimension: int = 2) -> "CoverSequence":
        if any(not 0.0 < d < 1.0 for d in diameters):
            raise ValidationError("diameters must lie in (0, 1)")
        return cls(tuple(float(d) for d in deltas),
                   tuple(math.log(d) for d in diameters), ambient_dimension)

    @property
    def diameters(self) -> tuple[float, ...]:
        return tuple(math.exp(ld) for ld in self.log_diameters)

    def __len__(self) -> int:
        return len(self.deltas)


@dataclass(frozen=True)
class DimensionEstimate:
    value: float
    scales_used: tuple[float, ...]
    fit_residual: float
    point_count: int


def running_ratios(cover: CoverSequence) -> list[float]:
    """ratio_l = (sum_{j<=l} |log Delta_j|) / |log d_l| for l = 1..L."""
    num = 0.0
    out = []
    for delta, ld in zip(cover.deltas, cover.log_diameters):
        num += abs(math.log(delta))
        out.append(num / abs(ld))
    return out


def mcmullen_bound(cover: CoverSequence) -> float:
    """Dimension lower bound implied by a finite cover prefix.

    The limsup is proxied by the max ratio over the final third of levels
    (the covers of interest are eventually monotone, so the early levels
    only carry transient bias).
    """
    ratios = running_ratios(cover)
    start = max(0, math.ceil(2 * len(ratios) / 3) - 1)
    return cover.ambient_dimension - max(ratios[start:])


def escape_cover_sequence(rho: float, M: int, R: float, levels: int,
                          scale_const: float = 1.0,
                          density_const: float = 1.0) -> CoverSequence:
    """Cover data for the escape construction at threshold R.

    Level diameters shrink like (scale_const / R^(rho/2 + 1/M))^l and the
    per-level density is the constant density_const / R^(2/M).  The two
    free constants exist but are not pinned by the theory; their effect
    vanishes as R grows, so they default to 1.
    """
    if not rho > 0 or M < 1:
        raise ValidationError("need rho > 0 and M >= 1")
    if levels < 2:
        raise ValidationError(f"need at least 2 levels, got {levels}")
    log_d1 = math.log(scale_const) - (rho / 2.0 + 1.0 / M) * math.log(R)
    delta = density_const / R ** (2.0 / M)
    if not log_d1 < 0.0:
        raise ValidationError("R too small: level-1 diameter is not below 1")
    if not delta <= 1.0:
        raise ValidationError("R too small: level-1 density exceeds 1")
    return CoverSequence(
        deltas=tuple(delta for _ in range(levels)),
        log_diameters=tuple(log_d1 * l for l in range(1, levels + 1)),
    )


def cover_to_csv(cover: CoverSequence, path) -> None:
    ratios = running_ratios(cover)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("level,delta,diameter,log10_diameter,running_ratio\n")
        for i, (delta, ld, ratio) in enumerate(
                zip(cover.deltas, cover.log_diameters, ratios), start=1):
            fh.write(f"{i},{delta!r},{math.exp(ld)!r},{ld / math.log(10.0)!r},{ratio!r}\n")


# ---------------------------------------------------------------------------
# box counting


def _point_array(points) -> np.ndarray:
    pts = np.asarray([complex(as_point(p)) for p in points], dtype=np.complex128)
    if pts.size == 0:
        raise ValidationError("box counting needs at least one point")
    return pts


def box_count(points, box_size: float, region: Rect) -> int:
    """Occupied boxes of side box_size on a grid anchored at the region corner."""
    if not box_size > 0:
        raise ValidationError("box size must be positive")
    pts = _point_array(points)
    xs, ys = pts.real, pts.imag
    eps = 1e-9 * max(region.width, region.height)
    if (xs.min() < region.x0 - eps or xs.max() > region.x0 + region.width + eps
            or ys.min() < region.y0 - eps or ys.max() > region.y0 + region.height + eps):
        raise ValidationError("all points must lie inside the counting region")
    nbx = max(1, math.ceil(region.width / box_size))
    nby = max(1, math.ceil(region.height / box_size))
    ix = np.clip(((xs - region.x0) / box_size).astype(np.int64), 0, nbx - 1)
    iy = np.clip(((ys - region.y0) / box_size).astype(np.int64), 0, nby - 1)
    return int(np.unique(ix * nby + iy).size)


def fit_box_dimension(points, sizes, region: Rect) -> DimensionEstimate:
    """Least-squares slope of log(count) against -log(size)."""
    sizes = sorted(float(s) for s in sizes)
    if len(sizes) < 4:
        raise ValidationError(f"need at least 4 box sizes, got {len(sizes)}")
    pts = _point_array(points)
    counts = [box_count(pts, s, region) for s in sizes]
    x = -np.log(np.array(sizes))
    y = np.log(np.array(counts, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    value = min(2.0, max(0.0, float(slope)))
    return DimensionEstimate(value=value, scales_used=tuple(sizes),
                             fit_residual=resid, point_count=int(pts.size))


def boxes_to_csv(points, sizes, region: Rect, path) -> None:
    pts = _point_array(points)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("box_size,count\n")
        for s in sorted(float(s) for s in sizes):
            fh.write(f"{s!r},{box_count(pts, s, region)}\n")


def measure_densities(grid, refinement: int) -> list[float]:
    """Escaping-cell densities over a 2^refinement x 2^refinement block split.

    Returns densities in row-major block order; an all-returned grid yields
    an empty list (with a logged diagnostic) since no density information
    exists.
    """
    if refinement < 1:
        raise ValidationError(f"refinement must be >= 1, got {refinement}")
    esc = grid.cells == dynamics.ESCAPING
    if not esc.any():
        log.warning("grid has no escaping cells; density list is empty")
        return []
    nblocks = 2**refinement
    ny, nx = esc.shape
    if nblocks > min(nx, ny):
        raise ValidationError(f"refinement {refinement} exceeds grid resolution")
    out = []
    y_edges = np.linspace(0, ny, nblocks + 1).astype(int)
    x_edges = np.linspace(0, nx, nblocks + 1).astype(int)
    for iy in range(nblocks):
        for ix in range(nblocks):
            block = esc[y_edges[iy]:y_edges[iy + 1], x_edges[ix]:x_edges[ix + 1]]
            out.append(float(block.mean()))
    return out
