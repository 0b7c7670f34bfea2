"""Pole atlas for the series family: locations, residue scales, counting
function, weight sums and the convergence-threshold estimator.

Ring k carries 2k poles of modulus k^mu and residue scale k^(mu-1), so all
modulus-level quantities (counting, weight sums, packing sums) collapse to
per-ring arithmetic.  Entries are materialized lazily, ring by ring, which
is what keeps multi-million-entry atlases cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import NumericalError, ValidationError
from .functions import pole_location, residue_scale

_MIN_THRESHOLD_ENTRIES = 10_000


@dataclass(frozen=True)
class PoleEntry:
    """One pole: rank j (1-based, ordered by modulus), location a_j,
    residue scale b_j, multiplicity, and its (ring, slot) coordinates."""

    j: int
    location: complex
    scale: complex
    multiplicity: int
    ring: int
    slot: int


class PoleAtlas:
    """All poles of modulus <= r_max, ordered by modulus then slot."""

    def __init__(self, rho: float, M: int, ring_count: int, r_max: float):
        self.rho = rho
        self.M = M
        self.mu = 2.0 / rho
        ks = np.arange(1, ring_count + 1, dtype=np.float64)
        self.rings = ks.astype(np.int64)
        self.radii = ks**self.mu
        self.scale_mods = ks ** (self.mu - 1.0)
        # entries in rings 1..k total k(k+1)
        self.offsets = (ks * (ks + 1)).astype(np.int64)
        # completeness holds up to r_max: every pole of modulus <= r_max is here
        self.r_max = r_max

    @property
    def ring_count(self) -> int:
        return int(self.rings.size)

    @property
    def n_entries(self) -> int:
        return int(self.offsets[-1]) if self.rings.size else 0

    def ring_block(self, k: int):
        """Vectorized entries of ring k: (locations, scales, slots)."""
        if not 1 <= k <= self.ring_count:
            raise ValidationError(f"ring {k} outside atlas (1..{self.ring_count})")
        slots = np.arange(2 * k)
        locations = k**self.mu * np.exp(1j * math.pi * slots / k)
        scales = k ** (self.mu - 1.0) * np.exp(1j * math.pi * slots * (1.0 - k) / k)
        return locations, scales, slots

    def entry(self, j: int) -> PoleEntry:
        """Entry by 1-based modulus rank (ties broken by slot)."""
        if not 1 <= j <= self.n_entries:
            raise ValidationError(f"rank {j} outside 1..{self.n_entries}")
        k = int(np.searchsorted(self.offsets, j, side="left")) + 1
        slot = j - 1 - (k * (k - 1))
        return PoleEntry(
            j=j,
            location=complex(pole_location(k, slot, self.mu)),
            scale=complex(residue_scale(k, slot, self.mu)),
            multiplicity=self.M,
            ring=k,
            slot=int(slot),
        )

    def iter_entries(self) -> Iterator[PoleEntry]:
        j = 0
        for k in range(1, self.ring_count + 1):
            locations, scales, slots = self.ring_block(k)
            for s in range(2 * k):
                j += 1
                yield PoleEntry(j, complex(locations[s]), complex(scales[s]),
                                self.M, k, int(slots[s]))

    def to_csv(self, path) -> int:
        """Write `j,re_a,im_a,re_b,im_b,m,ring,slot` rows; returns row count."""
        fmt = "%.17g"
        n = 0
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("j,re_a,im_a,re_b,im_b,m,ring,slot\n")
            j = 0
            for k in range(1, self.ring_count + 1):
                locations, scales, slots = self.ring_block(k)
                for s in range(2 * k):
                    j += 1
                    fh.write(
                        f"{j},{fmt % locations[s].real},{fmt % locations[s].imag},"
                        f"{fmt % scales[s].real},{fmt % scales[s].imag},"
                        f"{self.M},{k},{slots[s]}\n"
                    )
                    n += 1
        return n


def build_atlas(rho: float, M: int, r_max: float,
                max_entries: int | None = None) -> PoleAtlas:
    """Atlas of every pole with k^mu <= r_max (optionally capped in size)."""
    if not rho > 0:
        raise ValidationError(f"rho must be positive, got {rho}")
    if not (isinstance(M, int) and M >= 1):
        raise ValidationError(f"M must be a positive integer, got {M}")
    if r_max < 1.0:
        raise ValidationError(f"r_max must be >= 1, got {r_max}")
    mu = 2.0 / rho
    k = int(math.floor(r_max ** (1.0 / mu)))
    # guard pow rounding at ring radii
    while (k + 1) ** mu <= r_max:
        k += 1
    while k > 1 and k**mu > r_max:
        k -= 1
    effective_r_max = r_max
    if max_entries is not None:
        k_cap = int((math.isqrt(1 + 4 * int(max_entries)) - 1) // 2)
        if k_cap < k:
            # coverage shrinks to the outermost retained ring
            k = max(1, k_cap)
            effective_r_max = float(k) ** mu
    return PoleAtlas(rho, M, k, effective_r_max)


def counting_function(atlas: PoleAtlas, r: float) -> int:
    """Number of atlas poles with modulus <= r."""
    if r > atlas.r_max * (1 + 1e-12):
        raise ValidationError(f"r={r} beyond atlas r_max={atlas.r_max}")
    kr = int(np.searchsorted(atlas.radii, r, side="right"))
    return kr * (kr + 1)


def dimension_bound(rho: float, M: int) -> float:
    """The escaping-set dimension bound 2*M*rho / (2 + M*rho)."""
    if not rho > 0:
        raise ValidationError(f"rho must be positive, got {rho}")
    if M < 1:
        raise ValidationError(f"M must be >= 1, got {M}")
    return 2.0 * M * rho / (2.0 + M * rho)


def pole_weight_sum(atlas: PoleAtlas, t: float, skip_below: float = 0.0) -> float:
    """sum over |a_j| > skip_below of (|b_j| / |a_j|^(1+1/M))^t.

    The summand is the t-th power of the inverse-branch contraction scale
    at pole j; its convergence threshold in t is the dimension bound.
    """
    if not 0.0 < t <= 2.0:
        raise ValidationError(f"t must lie in (0, 2], got {t}")
    mask = atlas.radii > skip_below
    if not mask.any():
        return 0.0
    ks = atlas.rings[mask].astype(np.float64)
    log_term = t * (np.log(atlas.scale_mods[mask])
                    - (1.0 + 1.0 / atlas.M) * np.log(atlas.radii[mask]))
    return float(np.sum(2.0 * ks * np.exp(log_term)))


def tail_weight_slope(atlas: PoleAtlas, t: float) -> float:
    """log2 ratio of weight-sum increments over the top two dyadic windows.

    Negative slope means the tail is flattening (the series converges at
    this t); positive means it still grows.
    """
    r3 = float(atlas.radii[-1])
    r2, r1 = r3 / 2.0, r3 / 4.0
    w1 = pole_weight_sum(atlas, t, skip_below=r1) - pole_weight_sum(atlas, t, skip_below=r2)
    w2 = pole_weight_sum(atlas, t, skip_below=r2)
    if w1 <= 0.0 or w2 <= 0.0:
        raise NumericalError("empty dyadic window; atlas too small for slope test")
    return math.log2(w2 / w1)


def critical_exponent(atlas: PoleAtlas, iterations: int = 30) -> float:
    """Bisection estimate of the convergence threshold t* of the weight sum.

    A trial exponent t counts as convergent when the dyadic tail slope is
    negative.  The slope is monotone decreasing in t for this family; a
    violation signals an atlas too small to classify.
    """
    if atlas.n_entries < _MIN_THRESHOLD_ENTRIES:
        raise ValidationError(
            f"threshold estimation needs >= {_MIN_THRESHOLD_ENTRIES} entries, "
            f"atlas has {atlas.n_entries}"
        )
    lo, hi = 0.01, 2.0
    probes = [tail_weight_slope(atlas, t) for t in np.linspace(lo, hi, 8)]
    if any(b > a + 1e-9 for a, b in zip(probes, probes[1:])):
        raise NumericalError("non-monotone convergence classification; atlas too small")
    if probes[0] < 0.0 or probes[-1] > 0.0:
        raise NumericalError("threshold outside the bisection bracket (0.01, 2)")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if tail_weight_slope(atlas, mid) < 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def convergence_exponent_estimate(atlas: PoleAtlas, min_rings: int = 8) -> float:
    """Exponent of convergence of the pole moduli, from the n(r) slope.

    Fits log n(r) against log r over dyadic radii that still contain at
    least `min_rings` rings (floor effects die off like 1/ring count).
    """
    radii = []
    counts = []
    r = atlas.r_max
    while True:
        kr = int(np.searchsorted(atlas.radii, r, side="right"))
        if kr < min_rings:
            break
        radii.append(r)
        counts.append(kr * (kr + 1))
        r /= 2.0
    if len(radii) < 2:
        raise ValidationError("insufficient data: need >= 2 dyadic scales for the fit")
    slope = np.polyfit(np.log(radii), np.log(counts), 1)[0]
    return float(slope)


def packing_sum(atlas: PoleAtlas, r: float) -> float:
    """sum of |b_j|^2 over poles with modulus <= r."""
    kr = int(np.searchsorted(atlas.radii, r, side="right"))
    if kr == 0:
        return 0.0
    ks = atlas.rings[:kr].astype(np.float64)
    return float(np.sum(2.0 * ks * atlas.scale_mods[:kr] ** 2))
