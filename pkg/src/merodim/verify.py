"""Numerical certification of the two constructions.

Series family: samples the "spider's web" (circles |z| = (n+1/2)^mu joined
by mid-angle radial segments) and checks the uniform bound 4C+4 on |g|,
with C computed from its two geometric series to a 1e-12 tail.

Disk-forest family: picks multiplicities satisfying the five construction
constraints, re-validates them independently, and probes finite-horizon
persistence of orbits inside the disk union with a seeded PRNG (PCG64; the
seed is recorded in every result).

The probe's persistence criterion is strict: an iterate that leaves every
instantiated disk (including by flying beyond the instantiated annuli) is
not persisting.  Per-step survival inside a truncated forest is capped
near (3/32)/R^2 by the annulus-mass constraint itself, so measured
fractions decay geometrically with the horizon; results report per-step
survival so that decay is visible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import TOL
from .errors import NumericalError, ValidationError
from .functions import (
    DiskForestSpec,
    ForestDisk,
    SeriesFunctionSpec,
    eval_f_deriv,
    eval_forest_many,
    eval_g_many,
)

_WEIGHT_SUM_CAP = 0.5       # constraint: sum of disk weights stays below 1/2
_INNER_GAIN_FLOOR = 3.0     # constraint: weight * (r/r')^m exceeds 3
_STEP_GAIN_FLOOR = 2.0      # constraint: weight * m / r exceeds 2
_ANNULUS_MASS_CAP = 3.0 / 32.0
_MULTIPLICITY_CAP = 10**6


# ---------------------------------------------------------------------------
# spider's web


def compute_web_constant(mu: float, tail: float = TOL.web_constant_tail) -> float:
    """C(mu) = sum_k 1/(2^(mu k) - 1) + sum_l 1/(2^(mu (l - 1/2)) - 1).

    Both series are dominated by geometric tails; summation stops once the
    remaining tail is provably below `tail`.
    """
    if not mu > 0:
        raise ValidationError(f"mu must be positive, got {mu}")
    q = 2.0 ** (-mu)

    def series(offset: float) -> float:
        total = 0.0
        k = 1
        while True:
            denom = 2.0 ** (mu * (k - offset)) - 1.0
            term = 1.0 / denom
            total += term
            # remaining terms are below term * q / (1 - q) once denom >= 1
            if denom >= 1.0 and term * q / (1.0 - q) < 0.5 * tail:
                return total
            k += 1
            if k > 10_000_000:
                raise NumericalError("web constant series failed to converge")

    return series(0.0) + series(0.5)


def web_bound(mu: float) -> float:
    """The uniform bound 4*C(mu) + 4 valid on the whole web."""
    return 4.0 * compute_web_constant(mu) + 4.0


@dataclass(frozen=True)
class WebSample:
    """Sampled web points with |g| at each; component tags for membership."""

    points: np.ndarray
    moduli: np.ndarray
    max_ring: int
    component_type: np.ndarray   # 1 = circle, 2 = radial segment
    component_n: np.ndarray
    component_m: np.ndarray

    def __len__(self) -> int:
        return int(self.points.size)

    def max_modulus(self) -> float:
        return float(self.moduli.max())


def sample_web(spec: SeriesFunctionSpec, max_ring: int,
               per_component: int) -> WebSample:
    """Uniform samples on every web circle and segment up to max_ring."""
    if max_ring < 2:
        raise ValidationError(f"max_ring must be >= 2, got {max_ring}")
    if per_component < 1:
        raise ValidationError("per_component must be >= 1")
    mu = spec.mu
    pts, ctype, cn, cm = [], [], [], []
    frac = (np.arange(per_component) + 0.5) / per_component
    for n in range(1, max_ring + 1):
        radius = (n + 0.5) ** mu
        z = radius * np.exp(2j * math.pi * frac)
        pts.append(z)
        ctype.append(np.full(z.size, 1, dtype=np.int8))
        cn.append(np.full(z.size, n, dtype=np.int32))
        cm.append(np.zeros(z.size, dtype=np.int32))
    for n in range(2, max_ring + 1):
        r_lo, r_hi = (n - 0.5) ** mu, (n + 0.5) ** mu
        radii = r_lo + frac * (r_hi - r_lo)
        ms = np.arange(1, 2 * n + 1)
        angles = math.pi * (2 * ms - 1) / (2 * n)
        z = (radii[None, :] * np.exp(1j * angles)[:, None]).ravel()
        pts.append(z)
        ctype.append(np.full(z.size, 2, dtype=np.int8))
        cn.append(np.full(z.size, n, dtype=np.int32))
        cm.append(np.repeat(ms, per_component).astype(np.int32))
    points = np.concatenate(pts)
    values, pole_mask, _ = eval_g_many(points, spec)
    if pole_mask.any():
        raise NumericalError("web sample unexpectedly hit a pole")
    return WebSample(points, np.abs(values), max_ring,
                     np.concatenate(ctype), np.concatenate(cn), np.concatenate(cm))


def web_membership_error(sample: WebSample, spec: SeriesFunctionSpec) -> float:
    """Largest relative deviation of any sampled point from its web component."""
    mu = spec.mu
    z = sample.points
    mods = np.abs(z)
    err = np.zeros(z.size)
    circ = sample.component_type == 1
    if circ.any():
        target = (sample.component_n[circ] + 0.5) ** mu
        err[circ] = np.abs(mods[circ] - target)
    seg = sample.component_type == 2
    if seg.any():
        n = sample.component_n[seg].astype(float)
        lo, hi = (n - 0.5) ** mu, (n + 0.5) ** mu
        radial = np.maximum(lo - mods[seg], mods[seg] - hi)
        angle = math.pi * (2 * sample.component_m[seg] - 1) / (2 * n)
        dtheta = np.abs(np.angle(z[seg] * np.exp(-1j * angle)))
        err[seg] = np.maximum(np.maximum(radial, 0.0), dtheta * mods[seg])
    return float((err / np.maximum(1.0, mods)).max())


def estimate_singular_radius(spec: SeriesFunctionSpec, max_ring: int = 8,
                             per_component: int = 24) -> float:
    """Working estimate of a radius containing the singular values of f.

    Sampled, not proved minimal: twice the largest |f| observed on the web
    (a curve that separates every pole's neighbourhood from infinity).
    """
    sample = sample_web(spec, max_ring, per_component)
    max_g = sample.max_modulus()
    log_f = spec.M * math.log(max(max_g, 1e-300))
    if log_f > 690.0:
        raise NumericalError("singular-radius estimate overflows; rho too small for M")
    return max(2.0, 2.0 * math.exp(log_f))


# ---------------------------------------------------------------------------
# disk-forest parameter selection and validation


@dataclass(frozen=True)
class ConstraintRow:
    name: str
    lhs: float
    comparator: str
    threshold: float
    passed: bool


@dataclass(frozen=True)
class ConstraintReport:
    rows: tuple[ConstraintRow, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list[ConstraintRow]:
        return [r for r in self.rows if not r.passed]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("constraint,lhs,comparator,threshold,pass\n")
            for r in self.rows:
                fh.write(f"{r.name},{r.lhs!r},{r.comparator},{r.threshold!r},"
                         f"{int(r.passed)}\n")


def _normalize_layout(layout) -> list[tuple[complex, float]]:
    disks = []
    for item in layout:
        if hasattr(item, "center") and hasattr(item, "radius"):
            disks.append((complex(item.center), float(item.radius)))
        else:
            c, r = item
            disks.append((complex(c), float(r)))
    return disks


def _clearances(centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """d_k = min over j != k of (|a_k - a_j| - r_j); inf for a lone disk."""
    n = centers.size
    if n <= 1:
        return np.full(n, math.inf)
    dist = np.abs(centers[:, None] - centers[None, :]) - radii[None, :]
    np.fill_diagonal(dist, math.inf)
    return dist.min(axis=1)


def _annulus_membership(centers: np.ndarray, radii: np.ndarray) -> dict[int, list[int]]:
    """I_n = indices of disks meeting the shell 2^n <= |z| < 2^(n+1)."""
    out: dict[int, list[int]] = {}
    for k, (a, r) in enumerate(zip(centers, radii)):
        lo, hi = abs(a) - r, abs(a) + r
        n = max(0, math.floor(math.log2(max(lo, 1e-300))))
        while 2.0**n < hi:
            if lo < 2.0 ** (n + 1) and hi > 2.0**n:
                out.setdefault(n, []).append(k)
            n += 1
    return out


def _validate_layout(disks: list[tuple[complex, float]]) -> None:
    for a, r in disks:
        if not r < 1.0:
            raise ValidationError(f"disk radius must be < 1, got {r}")
        if not abs(a) - r > 2.0:
            raise ValidationError(
                f"disk at {a} with radius {r} is not contained in |z| > 2"
            )
    for i in range(len(disks)):
        for j in range(i + 1, len(disks)):
            ai, ri = disks[i]
            aj, rj = disks[j]
            if abs(ai - aj) <= ri + rj:
                raise ValidationError(f"disks {i} and {j} have intersecting closures")


def _cross_talk_ok(m: int, r: float, d: float) -> bool:
    if math.isinf(d):
        return True
    return math.log(m) - math.log(d) + m * (math.log(r) - math.log(d)) <= 0.0


def choose_forest_params(layout, eps_budget: float = 0.4,
                         m_cap: int = _MULTIPLICITY_CAP) -> DiskForestSpec:
    """Pick weights, inner radii and multiplicities for a disk layout.

    Weights are eps_budget * 2^-k in listing order, inner radii are half
    the disk radii, and each multiplicity is the smallest integer meeting
    the derivative-floor, inner-expansion and cross-talk constraints, then
    raised as needed to keep the per-annulus mass sum r^2/m below 3/32.
    """
    if not 0.0 < eps_budget < _WEIGHT_SUM_CAP:
        raise ValidationError(f"eps_budget must lie in (0, 1/2), got {eps_budget}")
    disks = _normalize_layout(layout)
    if not disks:
        return DiskForestSpec(())
    _validate_layout(disks)

    centers = np.array([a for a, _ in disks], dtype=complex)
    radii = np.array([r for _, r in disks])
    clear = _clearances(centers, radii)
    n_disks = len(disks)
    eps = eps_budget * 0.5 ** np.arange(1, n_disks + 1)
    if eps[-1] <= 0.0:
        raise ValidationError("layout too long: weight sequence underflows")

    def minimal_m(k: int, floor_m: int = 1) -> int:
        r, e, d = radii[k], eps[k], clear[k]
        lo = max(
            floor_m,
            math.floor(_STEP_GAIN_FLOOR * r / e) + 1,
            math.ceil((math.log(_INNER_GAIN_FLOOR) - math.log(e)) / math.log(2.0)),
        )
        m = max(1, lo)
        # inner expansion uses r/r' = 2, monotone in m; only the cross-talk
        # constraint can force extra upward steps
        while m <= m_cap:
            if (e * m / r > _STEP_GAIN_FLOOR
                    and math.log(e) + m * math.log(2.0) > math.log(_INNER_GAIN_FLOOR)
                    and _cross_talk_ok(m, r, d)):
                return m
            m += 1
        raise ValidationError(
            f"no multiplicity <= {m_cap} satisfies the constraints for disk {k}; "
            "layout too crowded"
        )

    ms = [minimal_m(k) for k in range(n_disks)]

    # per-annulus mass repair: give every member an equal share of the cap
    for _ in range(4):
        membership = _annulus_membership(centers, radii)
        dirty = False
        for n, members in membership.items():
            mass = sum(radii[k] ** 2 / ms[k] for k in members)
            if mass <= _ANNULUS_MASS_CAP:
                continue
            dirty = True
            share = _ANNULUS_MASS_CAP / len(members)
            for k in members:
                target = math.ceil(radii[k] ** 2 / share)
                if ms[k] < target:
                    ms[k] = minimal_m(k, floor_m=target)
        if not dirty:
            break
    else:
        raise NumericalError("annulus mass repair failed to converge")

    spec = DiskForestSpec(tuple(
        ForestDisk(center=complex(centers[k]), radius=float(radii[k]),
                   inner_radius=float(radii[k] / 2.0), clearance=float(clear[k]),
                   weight=float(eps[k]), multiplicity=int(ms[k]))
        for k in range(n_disks)
    ))
    report = validate_forest_params(spec)
    if not report.passed:
        raise NumericalError(
            f"chooser output failed validation: {[r.name for r in report.failures()]}"
        )
    return spec


def validate_forest_params(spec: DiskForestSpec) -> ConstraintReport:
    """Independent re-evaluation of every construction constraint."""
    rows: list[ConstraintRow] = []
    disks = spec.disks
    if not disks:
        return ConstraintReport(rows=(ConstraintRow("weight_budget", 0.0, "<",
                                                    _WEIGHT_SUM_CAP, True),))
    centers = np.array([d.center for d in disks], dtype=complex)
    radii = np.array([d.radius for d in disks])
    recomputed_d = _clearances(centers, radii)

    # preconditions
    min_sep = math.inf
    for i in range(len(disks)):
        for j in range(i + 1, len(disks)):
            min_sep = min(min_sep,
                          abs(centers[i] - centers[j]) - (radii[i] + radii[j]))
    rows.append(ConstraintRow("disjoint_closures", min_sep, ">", 0.0,
                              min_sep > 0.0))
    for k, d in enumerate(disks):
        rows.append(ConstraintRow(f"radius_below_one[{k}]", d.radius, "<", 1.0,
                                  d.radius < 1.0))
        margin = abs(d.center) - d.radius
        rows.append(ConstraintRow(f"beyond_two[{k}]", margin, ">", 2.0,
                                  margin > 2.0))
        rows.append(ConstraintRow(f"inner_radius_order[{k}]", d.inner_radius, "<",
                                  d.radius, d.inner_radius < d.radius))
        rows.append(ConstraintRow(f"clearance_exceeds_radius[{k}]", d.clearance,
                                  ">", d.radius, d.clearance > d.radius))
        stored_ok = d.clearance <= recomputed_d[k] * (1.0 + 1e-12) + 1e-12
        rows.append(ConstraintRow(f"clearance_honest[{k}]",
                                  float(d.clearance - recomputed_d[k]), "<=", 0.0,
                                  stored_ok))

    weight_sum = float(sum(d.weight for d in disks))
    rows.append(ConstraintRow("weight_budget", weight_sum, "<", _WEIGHT_SUM_CAP,
                              weight_sum < _WEIGHT_SUM_CAP))

    for k, d in enumerate(disks):
        lhs_f = d.weight * d.multiplicity / d.radius
        rows.append(ConstraintRow(f"derivative_floor[{k}]", lhs_f, ">",
                                  _STEP_GAIN_FLOOR, lhs_f > _STEP_GAIN_FLOOR))
        log_gain = math.log(d.weight) + d.multiplicity * (
            math.log(d.radius) - math.log(d.inner_radius))
        lhs_g = math.exp(log_gain) if log_gain < 700.0 else math.inf
        rows.append(ConstraintRow(f"inner_expansion[{k}]", lhs_g, ">",
                                  _INNER_GAIN_FLOOR,
                                  log_gain > math.log(_INNER_GAIN_FLOOR)))
        dk = recomputed_d[k]
        if math.isinf(dk):
            lhs_h, ok_h = 0.0, True
        else:
            log_h = (math.log(d.multiplicity) - math.log(dk)
                     + d.multiplicity * (math.log(d.radius) - math.log(dk)))
            lhs_h = math.exp(log_h) if log_h < 700.0 else math.inf
            ok_h = log_h <= 0.0
        rows.append(ConstraintRow(f"cross_talk[{k}]", lhs_h, "<=", 1.0, ok_h))

    for n, members in sorted(_annulus_membership(centers, radii).items()):
        mass = float(sum(disks[k].radius ** 2 / disks[k].multiplicity
                         for k in members))
        rows.append(ConstraintRow(f"annulus_mass[{n}]", mass, "<=",
                                  _ANNULUS_MASS_CAP, mass <= _ANNULUS_MASS_CAP))
    return ConstraintReport(rows=tuple(rows))


def ring_layout(n_min: int = 1, n_max: int = 2, disk_radius: float = 0.45,
                clearance: float = 0.3) -> list[tuple[complex, float]]:
    """A ring of equal disks per dyadic annulus (generic demo layout)."""
    out = []
    for n in range(n_min, n_max + 1):
        ring_r = 1.5 * 2.0**n
        count = max(3, math.floor(math.pi / math.asin(
            (disk_radius + clearance) / ring_r)))
        for i in range(count):
            angle = 2.0 * math.pi * (i + 0.5) / count
            out.append((ring_r * complex(math.cos(angle), math.sin(angle)),
                        disk_radius))
    return out


def probe_layout(count: int = 6, ring_modulus: float = 3.6,
                 eps_budget: float = 0.4) -> list[tuple[complex, float]]:
    """Layout tuned so first images of inner-disk points can land in disks.

    Radii shrink so that for each disk the inner-expansion constraint (not
    the derivative floor) fixes the minimal multiplicity; the minimal image
    modulus then stays just above 3 for every disk, inside the annulus the
    disks themselves occupy.
    """
    out = []
    for k in range(1, count + 1):
        # keep the derivative-floor minimum below the inner-expansion one
        r = min(0.45, 0.9 * (k + 3) / (5.0 * 2.0**k) * (eps_budget / 0.4))
        angle = 2.0 * math.pi * (k - 0.5) / count
        out.append((ring_modulus * complex(math.cos(angle), math.sin(angle)), r))
    return out


# ---------------------------------------------------------------------------
# Monte-Carlo area probe


@dataclass(frozen=True)
class AreaProbeResult:
    annulus: int
    samples: int
    fraction_persisting: float
    horizon: int
    rng_seed: int
    survival_by_step: tuple[float, ...]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            headers = ["annulus", "samples", "horizon", "rng_seed",
                       "fraction_persisting"]
            headers += [f"survival_step_{i+1}" for i in range(len(self.survival_by_step))]
            fh.write(",".join(headers) + "\n")
            row = [str(self.annulus), str(self.samples), str(self.horizon),
                   str(self.rng_seed), repr(self.fraction_persisting)]
            row += [repr(s) for s in self.survival_by_step]
            fh.write(",".join(row) + "\n")


def _sample_inner_union(spec: DiskForestSpec, annulus: int, samples: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Uniform points in P_annulus intersected with the inner-disk union."""
    a, _, rp, _, _ = spec.arrays()
    lo, hi = 2.0**annulus, 2.0 ** (annulus + 1)
    mods = np.abs(a)
    cand = np.nonzero((mods - rp < hi) & (mods + rp > lo))[0]
    if cand.size == 0:
        raise ValidationError(f"annulus {annulus} meets no inner disks")
    weights = rp[cand] ** 2
    weights = weights / weights.sum()
    out = np.empty(samples, dtype=np.complex128)
    have = 0
    drawn = 0
    while have < samples:
        batch = max(1024, samples - have)
        drawn += batch
        if drawn > 2000 * samples:
            raise NumericalError("annulus acceptance rate too low for sampling")
        pick = rng.choice(cand, size=batch, p=weights)
        radii = rp[pick] * np.sqrt(rng.random(batch))
        angles = 2.0 * math.pi * rng.random(batch)
        z = a[pick] + radii * np.exp(1j * angles)
        m = np.abs(z)
        good = z[(m >= lo) & (m < hi)]
        take = min(samples - have, good.size)
        out[have : have + take] = good[:take]
        have += take
    return out


def area_probe(spec: DiskForestSpec, annulus: int, samples: int, horizon: int,
               seed: int) -> AreaProbeResult:
    """Fraction of inner-disk starts whose iterates stay inside the disk union.

    Persistence is judged against the instantiated disks only; an iterate
    that lands outside all of them (however large its modulus) has left
    the construction and does not persist.
    """
    if samples < 1000:
        raise ValidationError(f"probe needs >= 1000 samples, got {samples}")
    if horizon < 0:
        raise ValidationError("horizon must be nonnegative")
    report = validate_forest_params(spec)
    if not report.passed:
        raise ValidationError(
            f"probe requires a valid spec; failing: {[r.name for r in report.failures()]}"
        )
    rng = np.random.default_rng(seed)
    z = _sample_inner_union(spec, annulus, samples, rng)

    a, r, _, _, _ = spec.arrays()
    alive = np.ones(samples, dtype=bool)
    survival = []
    current = z.copy()
    for _ in range(horizon):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            survival.append(0.0)
            continue
        values, _ = eval_forest_many(current[idx], spec)
        finite = np.isfinite(values.real) & np.isfinite(values.imag)
        in_disk = np.zeros(idx.size, dtype=bool)
        if finite.any():
            d = np.abs(values[finite, None] - a[None, :])
            in_disk[finite] = (d < r[None, :]).any(axis=1)
        alive[idx] = in_disk
        current[idx[in_disk]] = values[in_disk]
        survival.append(float(alive.sum()) / samples)
    return AreaProbeResult(annulus=annulus, samples=samples,
                           fraction_persisting=float(alive.sum()) / samples,
                           horizon=horizon, rng_seed=seed,
                           survival_by_step=tuple(survival))


# ---------------------------------------------------------------------------
# derivative envelope spot-check


@dataclass(frozen=True)
class DerivativeEnvelopeReport:
    count: int
    ring_lo: int
    ring_hi: int
    empirical_bound: float      # max |f'| / |z|^(rho/2 - 1) near poles
    slope: float                # fitted d log|f'| / d log|z|
    lower_band_max: float
    upper_band_max: float
    web_max: float              # same ratio sampled on the web


def derivative_envelope_spotcheck(spec: SeriesFunctionSpec, count: int,
                                  ring_lo: int = 10, ring_hi: int = 40,
                                  seed: int = 7) -> DerivativeEnvelopeReport:
    """Empirical check that |f'| grows no faster than |z|^(rho/2 - 1).

    Samples points near poles at the preimage-boundary distance
    (4|a|)^(-1/M) * k^(mu-1) from each pole, where a is a fixed low-ring
    target pole, and reports the observed envelope constant.
    """
    if count < 10:
        raise ValidationError(f"need at least 10 samples, got {count}")
    if not 2 <= ring_lo < ring_hi:
        raise ValidationError("need 2 <= ring_lo < ring_hi")
    mu, M, rho = spec.mu, spec.M, spec.rho
    rng = np.random.default_rng(seed)
    target_mod = 3.0**mu
    alpha = rho / 2.0 - 1.0

    rings = rng.integers(ring_lo, ring_hi + 1, size=count)
    ratios = np.empty(count)
    zmods = np.empty(count)
    fmods = np.empty(count)
    for i, k in enumerate(rings):
        k = int(k)
        slot = int(rng.integers(0, 2 * k))
        u = k**mu * np.exp(1j * math.pi * slot / k)
        dist = (4.0 * target_mod) ** (-1.0 / M) * k ** (mu - 1.0)
        z = u + dist * np.exp(2j * math.pi * rng.random())
        df = abs(eval_f_deriv(z, spec).value.z)
        zmods[i] = abs(z)
        fmods[i] = df
        ratios[i] = df / abs(z) ** alpha
    slope = float(np.polyfit(np.log(zmods), np.log(fmods), 1)[0])
    mid = (ring_lo + ring_hi) // 2
    lower = ratios[rings < mid]
    upper = ratios[rings >= mid]
    if lower.size == 0 or upper.size == 0:
        raise NumericalError("ring bands came out empty; increase count")

    web_ratios = []
    for n in (ring_lo, mid, ring_hi):
        radius = (n + 0.5) ** mu
        for theta in (np.arange(16) + 0.5) / 16 * 2.0 * math.pi:
            z = radius * np.exp(1j * theta)
            df = abs(eval_f_deriv(z, spec).value.z)
            web_ratios.append(df / abs(z) ** alpha)
    return DerivativeEnvelopeReport(
        count=count, ring_lo=ring_lo, ring_hi=ring_hi,
        empirical_bound=float(ratios.max()), slope=slope,
        lower_band_max=float(lower.max()), upper_band_max=float(upper.max()),
        web_max=float(max(web_ratios)),
    )
