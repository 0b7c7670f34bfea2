"""Orbit iteration and escape-grid classification.

The escape criterion is a finite-horizon proxy: a start point is recorded
as escaping at threshold R when every iterate modulus from step 1 through
the horizon stays >= R.  No finite horizon can certify true escape, so
every record carries its horizon and threshold explicitly.

Grid cells are classified by their center point only; the uniform grid is
what the box-counting stage downstream expects.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import TOL
from .errors import ValidationError
from .functions import FunctionSpec, SeriesFunctionSpec, evaluate_many
from .geometry import PlanePoint, as_point

# classification codes (also the CSV encoding)
ESCAPING = 0
RETURNED = 1
POLE_HIT = 2
UNDETERMINED = 3

CLASS_NAMES = {ESCAPING: "escaping", RETURNED: "returned",
               POLE_HIT: "pole_hit", UNDETERMINED: "undetermined"}

# fixed PNG palette, one pixel per cell
PALETTE = {ESCAPING: (255, 255, 255), RETURNED: (0, 0, 0),
           POLE_HIT: (255, 0, 0), UNDETERMINED: (128, 128, 128)}


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle given by its lower-left corner and extents."""

    x0: float
    y0: float
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValidationError("rectangle extents must be positive")

    def contains(self, z: complex, slack: float = 0.0) -> bool:
        return (self.x0 - slack <= z.real <= self.x0 + self.width + slack
                and self.y0 - slack <= z.imag <= self.y0 + self.height + slack)


@dataclass(frozen=True)
class OrbitRecord:
    start: PlanePoint
    moduli: tuple[float, ...]
    classification: str
    steps_taken: int
    escape_threshold: float
    horizon: int
    diagnostic: str | None = None


def _overflow_cutoff(spec: FunctionSpec) -> float:
    cut = TOL.overflow_modulus
    if isinstance(spec, SeriesFunctionSpec):
        cut = min(cut, spec.modulus_cap)
    return cut


def iterate_orbit(spec: FunctionSpec, z0, R: float, horizon: int) -> OrbitRecord:
    """Iterate z -> f(z), recording |f^n(z0)| until return, pole hit or horizon."""
    if horizon < 1:
        raise ValidationError(f"horizon must be >= 1, got {horizon}")
    if not R > 1.0:
        raise ValidationError(f"escape threshold must exceed 1, got {R}")
    start = as_point(z0)
    if start.at_infinity:
        return OrbitRecord(start, (), "pole_hit", 0, R, horizon)
    cutoff = _overflow_cutoff(spec)
    z = np.array([start.z], dtype=np.complex128)
    moduli: list[float] = []
    for step in range(1, horizon + 1):
        try:
            values, pole_mask = evaluate_many(spec, z)
        except Exception as exc:  # noqa: BLE001 - report, do not crash the sweep
            return OrbitRecord(start, tuple(moduli), "undetermined", step - 1, R,
                               horizon, diagnostic=f"evaluation failed: {exc}")
        v = values[0]
        mod = abs(v)
        if pole_mask[0] or not math.isfinite(mod) or mod > cutoff:
            moduli.append(math.inf)
            return OrbitRecord(start, tuple(moduli), "pole_hit", step, R, horizon)
        if math.isnan(mod):
            return OrbitRecord(start, tuple(moduli), "undetermined", step - 1, R,
                               horizon, diagnostic="non-finite value")
        moduli.append(mod)
        if mod < R:
            return OrbitRecord(start, tuple(moduli), "returned", step, R, horizon)
        z[0] = v
    return OrbitRecord(start, tuple(moduli), "escaping", horizon, R, horizon)


@dataclass
class GridClassification:
    region: Rect
    nx: int
    ny: int
    R: float
    horizon: int
    cells: np.ndarray = field(repr=False)   # (ny, nx) int8 codes
    steps: np.ndarray = field(repr=False)   # (ny, nx) step of decision

    def centers(self) -> np.ndarray:
        xs = self.region.x0 + (np.arange(self.nx) + 0.5) * self.region.width / self.nx
        ys = self.region.y0 + (np.arange(self.ny) + 0.5) * self.region.height / self.ny
        return xs[None, :] + 1j * ys[:, None]

    def counts(self) -> dict[str, int]:
        return {name: int((self.cells == code).sum()) for code, name in CLASS_NAMES.items()}

    def to_csv(self, path) -> None:
        centers = self.centers()
        fmt = "%.17g"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("cell,re,im,code,steps\n")
            for iy in range(self.ny):
                for ix in range(self.nx):
                    c = centers[iy, ix]
                    fh.write(
                        f"{iy * self.nx + ix},{fmt % c.real},{fmt % c.imag},"
                        f"{self.cells[iy, ix]},{self.steps[iy, ix]}\n"
                    )

    def to_png(self, path) -> None:
        from PIL import Image

        rgb = np.zeros((self.ny, self.nx, 3), dtype=np.uint8)
        for code, color in PALETTE.items():
            rgb[self.cells == code] = color
        # image rows run top-down; grid rows run bottom-up
        Image.fromarray(rgb[::-1], mode="RGB").save(path)


def _classify_block(spec: FunctionSpec, points: np.ndarray, R: float,
                    horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Classify a flat array of start points (vectorized over active points)."""
    n = points.size
    codes = np.full(n, UNDETERMINED, dtype=np.int8)
    steps = np.zeros(n, dtype=np.int32)
    cutoff = _overflow_cutoff(spec)

    active = np.arange(n)
    z = points.astype(np.complex128).copy()
    for step in range(1, horizon + 1):
        if active.size == 0:
            break
        try:
            values, pole_mask = evaluate_many(spec, z[active])
        except Exception:  # noqa: BLE001
            codes[active] = UNDETERMINED
            steps[active] = step - 1
            active = active[:0]
            break
        mods = np.abs(values)
        bad = np.isnan(mods)
        hit = (~bad) & (pole_mask | ~np.isfinite(mods) | (mods > cutoff))
        ret = (~bad) & (~hit) & (mods < R)
        codes[active[bad]] = UNDETERMINED
        steps[active[bad]] = step - 1
        codes[active[hit]] = POLE_HIT
        steps[active[hit]] = step
        codes[active[ret]] = RETURNED
        steps[active[ret]] = step
        keep = ~(bad | hit | ret)
        z[active[keep]] = values[keep]
        active = active[keep]
    codes[active] = ESCAPING
    steps[active] = horizon
    return codes, steps


def classify_grid(spec: FunctionSpec, region: Rect, nx: int, ny: int, R: float,
                  horizon: int, jobs: int = 1) -> GridClassification:
    """Classify every cell of an nx-by-ny grid by its center point.

    Deterministic for a given spec and grid regardless of `jobs`: workers
    own disjoint row bands and every cell is computed independently.
    """
    if nx < 2 or ny < 2:
        raise ValidationError(f"grid resolution must be at least 2x2, got {nx}x{ny}")
    if horizon < 1:
        raise ValidationError(f"horizon must be >= 1, got {horizon}")
    if not R > 1.0:
        raise ValidationError(f"escape threshold must exceed 1, got {R}")

    xs = region.x0 + (np.arange(nx) + 0.5) * region.width / nx
    ys = region.y0 + (np.arange(ny) + 0.5) * region.height / ny
    points = (xs[None, :] + 1j * ys[:, None]).ravel()

    if jobs <= 1:
        codes, steps = _classify_block(spec, points, R, horizon)
    else:
        bands = np.array_split(np.arange(points.size), jobs)
        codes = np.empty(points.size, dtype=np.int8)
        steps = np.empty(points.size, dtype=np.int32)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_classify_block, spec, points[b], R, horizon)
                       for b in bands]
            for band, fut in zip(bands, futures):
                c, s = fut.result()
                codes[band] = c
                steps[band] = s
    return GridClassification(region, nx, ny, R, horizon,
                              codes.reshape(ny, nx), steps.reshape(ny, nx))


def escaping_points(grid: GridClassification) -> list[complex]:
    """Centers of escaping cells (the box-counting input)."""
    centers = grid.centers()
    return [complex(c) for c in centers[grid.cells == ESCAPING]]
