"""Evaluation of the package's meromorphic function families.

Two families are supported, plus a tiny registry of rational test maps:

* a series family with pole rings on circles of radius k^mu, controlled by
  an order parameter rho (mu = 2/rho) and an outer power M,
* a "disk forest" of finitely many poles with individually chosen
  multiplicities (the positive-area construction).

Numerical strategy for the series family
----------------------------------------
The k-th ring term equals  w^k / (w^{2k} - 1)  with  w = z / k^mu.  That
form never touches k^{mu k} or z^{2k} directly: with  a = w^k  (|w| <= 1)
or  a = w^{-k}  (|w| > 1), the term is  +-a / (1 - a^2)  and a is obtained
from one complex exp, so nothing overflows for any ring index.

Ring k only matters when  k * |log(|z| / k^mu)|  is small: terms decay
like exp(-k |log|w||) on both sides of the active band around
k = |z|^{1/mu}.  For large |z| the evaluator therefore sums a short low
block, the active band, and accounts for every skipped ring with the
rigorous bound  |term| <= e^-T / (1 - e^-2T); the accumulated skip bound
is folded into the reported truncation bound.  This keeps the cost of one
evaluation bounded independently of |z|, which is what makes long orbit
iterations affordable.

Within 0.1 * k^(mu-1) of a pole the direct ring formula loses relative
accuracy like eps/|delta|, so the nearest ring is evaluated through its
exact partial-fraction form (the principal part plus the regular rest of
the ring), which is stable arbitrarily close to the pole.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import TOL
from .errors import NumericalError, ValidationError
from .geometry import PlanePoint, as_point

# rings handled in one vectorized block; larger cutoffs switch to the
# adaptive banded path
_SIMPLE_RING_LIMIT = 4096

# largest ring index that is still exactly representable / enumerable
_MAX_RING_INDEX = 9.0e15


# ---------------------------------------------------------------------------
# specs


@dataclass(frozen=True)
class SeriesFunctionSpec:
    """Series family of order rho with pole multiplicity M (f = g^M)."""

    rho: float
    M: int = 1
    truncation_margin: int = 8

    def __post_init__(self):
        if not self.rho > 0:
            raise ValidationError(f"rho must be positive, got {self.rho}")
        if not (isinstance(self.M, int) and self.M >= 1):
            raise ValidationError(f"M must be a positive integer, got {self.M}")
        if self.truncation_margin < 4:
            raise ValidationError(
                f"truncation_margin must be >= 4, got {self.truncation_margin}"
            )

    @property
    def mu(self) -> float:
        return 2.0 / self.rho

    @property
    def modulus_cap(self) -> float:
        """Largest |z| the evaluator accepts (ring indices stay enumerable)."""
        return min(0.5 * _MAX_RING_INDEX**self.mu, 1e300)


@dataclass(frozen=True)
class ForestDisk:
    """One pole site of the disk-forest family."""

    center: complex
    radius: float          # r_k
    inner_radius: float    # r'_k < r_k
    clearance: float       # d_k = distance to the nearest other disk
    weight: float          # eps_k
    multiplicity: int      # m_k

    def __post_init__(self):
        if not 0 < self.inner_radius < self.radius:
            raise ValidationError(
                f"need 0 < inner_radius < radius, got ({self.inner_radius}, {self.radius})"
            )
        if not self.weight > 0:
            raise ValidationError("disk weight must be positive")
        if not (isinstance(self.multiplicity, int) and self.multiplicity >= 1):
            raise ValidationError("disk multiplicity must be a positive integer")


@dataclass(frozen=True)
class DiskForestSpec:
    """Finite desk-scale instance of the positive-area construction."""

    disks: tuple[ForestDisk, ...]

    def __post_init__(self):
        for d in self.disks:
            if not d.radius < 1.0:
                raise ValidationError(f"disk radius must be < 1, got {d.radius}")
            if not abs(d.center) > 2.0:
                raise ValidationError(
                    f"disk centers must satisfy |a| > 2, got |a|={abs(d.center)}"
                )

    def __len__(self) -> int:
        return len(self.disks)

    def arrays(self):
        """Columnar view (centers, radii, inner radii, weights, orders)."""
        a = np.array([d.center for d in self.disks], dtype=complex)
        r = np.array([d.radius for d in self.disks])
        rp = np.array([d.inner_radius for d in self.disks])
        eps = np.array([d.weight for d in self.disks])
        m = np.array([d.multiplicity for d in self.disks], dtype=np.int64)
        return a, r, rp, eps, m


_RATIONAL_REGISTRY = {
    # name: (numerator coeffs, denominator coeffs), highest degree first
    "reciprocal": ((1.0,), (1.0, 0.0)),          # 1/z
    "inverse_square": ((1.0,), (1.0, 0.0, 0.0)),  # 1/z^2
    "mobius": ((1.0, -1.0), (1.0, 1.0)),          # (z-1)/(z+1)
}


@dataclass(frozen=True)
class RationalFunctionSpec:
    """Hard-coded rational test map from a fixed registry."""

    name: str

    def __post_init__(self):
        if self.name not in _RATIONAL_REGISTRY:
            raise ValidationError(
                f"unknown rational function {self.name!r}; "
                f"available: {sorted(_RATIONAL_REGISTRY)}"
            )

    @property
    def coefficients(self):
        return _RATIONAL_REGISTRY[self.name]

    @property
    def poles(self) -> tuple[complex, ...]:
        _, den = self.coefficients
        roots = np.roots(den)
        return tuple(complex(r) for r in roots)


@dataclass(frozen=True)
class EvalResult:
    """Value plus the truncation-error budget of one evaluation."""

    value: PlanePoint
    truncation_bound: float = 0.0
    is_pole: bool = False


# ---------------------------------------------------------------------------
# pole bookkeeping for the series family


def pole_location(k: int, l: int, mu: float) -> complex:
    """Pole u_{k,l} on ring k (|u| = k^mu, angle pi*l/k)."""
    return k**mu * np.exp(1j * math.pi * l / k)


def residue_scale(k: int, l: int, mu: float) -> complex:
    """Residue of the ring-k partial fraction at slot l (|v| = k^{mu-1})."""
    return k ** (mu - 1.0) * np.exp(1j * math.pi * l * (1.0 - k) / k)


def nearest_pole(z: complex, mu: float):
    """(k, l, u, dist) for the pole closest to z among neighbouring rings."""
    z_mod = abs(z)
    if z_mod == 0.0:
        return 1, 0, pole_location(1, 0, mu), 1.0
    k_guess = min(z_mod ** (1.0 / mu), _MAX_RING_INDEX)
    best = None
    theta = math.atan2(z.imag, z.real)
    for k in {max(1, math.floor(k_guess) - 1), max(1, math.floor(k_guess)),
              math.ceil(k_guess), math.ceil(k_guess) + 1}:
        if k < 1 or k > _MAX_RING_INDEX:
            continue
        l = round(theta * k / math.pi) % (2 * k)
        u = pole_location(k, l, mu)
        dist = abs(z - u)
        if best is None or dist < best[3]:
            best = (k, l, u, dist)
    return best


def is_pole_hit(z: complex, spec: SeriesFunctionSpec) -> bool:
    k, l, u, dist = nearest_pole(z, spec.mu)
    return dist < TOL.pole_hit_rel * max(1.0, abs(u))


def tail_cutoff(z_modulus: float, mu: float, margin: int) -> int:
    """Ring count K after which the series remainder is at most 2*2^(2-K)."""
    if z_modulus < 0:
        raise ValidationError("modulus must be nonnegative")
    base = (2.0 * z_modulus) ** (1.0 / mu)
    if base > _MAX_RING_INDEX:
        raise NumericalError(
            f"modulus {z_modulus} needs ring indices beyond {_MAX_RING_INDEX:.0e}"
        )
    return max(1, math.ceil(base)) + margin


def tail_bound(K: int) -> float:
    """Series remainder bound after K rings: 2 * 2^(2-K)."""
    return 2.0 * 2.0 ** (2 - K) if K < 1070 else 0.0


# ---------------------------------------------------------------------------
# ring selection


def _first_k(lo: int, hi: int, pred) -> int:
    """Smallest k in [lo, hi] with pred(k); hi+1 if none (pred monotone)."""
    if lo > hi:
        return hi + 1
    if not pred(hi):
        return hi + 1
    while lo < hi:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def _ring_blocks(z_mod: float, mu: float, margin: int):
    """Ring indices to sum plus the bound on everything skipped.

    Returns (list of (lo, hi) inclusive int ranges, skip_bound).  Every
    skipped ring k satisfies k*|log(|z|/k^mu)| >= T, so its term is below
    e^-T / (1 - e^-2T) in modulus.
    """
    K = tail_cutoff(z_mod, mu, margin)
    if K <= _SIMPLE_RING_LIMIT:
        return [(1, K)], tail_bound(K)

    ln_z = math.log(z_mod)
    T = 40.0 + math.log(2.0 * K)

    def weight(k: int) -> float:
        return k * abs(ln_z - mu * math.log(k))

    k_ring = max(1, math.floor(z_mod ** (1.0 / mu)))
    # weight(k) increases on [1, k_ring/e], then decreases toward the pole
    # ring, then increases again beyond it
    k_peak = max(1, min(math.floor(k_ring / math.e), k_ring))
    k_a = _first_k(1, k_peak, lambda k: weight(k) >= T)
    k_c = max(k_ring, _first_k(k_ring, K, lambda k: weight(k) >= T) - 1)

    if k_a > k_peak:
        # nothing negligible below the active band
        blocks = [(1, k_c)]
        skipped = K - k_c
    else:
        k_b = _first_k(k_a, k_ring, lambda k: weight(k) < T)
        blocks = []
        if k_a > 1:
            blocks.append((1, k_a - 1))
        blocks.append((min(k_b, k_c), k_c))
        skipped = (k_b - k_a) + (K - k_c)
    bound = 2.0 * (skipped + 2) * math.exp(-T) * 1.02 + tail_bound(K)
    return blocks, bound


# ---------------------------------------------------------------------------
# core ring-term math (shared by scalar and batch paths)


def _ring_terms(z: np.ndarray, ks: np.ndarray, mu: float, deriv: bool):
    """Ring terms t_k (and their z-derivatives) for points x rings.

    z: complex array (N,), nonzero, not near the listed rings' poles.
    ks: float64 array (K,) of ring indices.
    Returns (N, K) arrays: terms[, dterms].
    """
    logz = np.log(z.astype(np.complex128))
    L = ks[None, :] * (logz[:, None] - mu * np.log(ks)[None, :])
    flip = L.real > 0.0
    a = np.exp(np.where(flip, -L, L))
    a2 = a * a
    denom = 1.0 - a2
    t = np.where(flip, 1.0, -1.0) * a / denom
    if not deriv:
        return t, None
    dt = -(ks[None, :] / z[:, None]) * a * (1.0 + a2) / (denom * denom)
    return t, dt


def _ring_partial_fractions(z: complex, k: int, mu: float, deriv: bool):
    """Exact ring-k contribution sum_l v_l / (z - u_l) (stable near poles)."""
    ls = np.arange(2 * k)
    us = k**mu * np.exp(1j * math.pi * ls / k)
    vs = k ** (mu - 1.0) * np.exp(1j * math.pi * ls * (1.0 - k) / k)
    diff = z - us
    value = np.sum(vs / diff)
    if not deriv:
        return complex(value), None
    return complex(value), complex(np.sum(-vs / (diff * diff)))


def _series_core(z: complex, spec: SeriesFunctionSpec, deriv: bool):
    """g(z) (and g'(z)) with the truncation bound; z finite, not a pole hit."""
    mu = spec.mu
    if z == 0:
        return 0.0 + 0.0j, (-2.0 + 0.0j) if deriv else None, 0.0
    z_mod = abs(z)
    if z_mod > spec.modulus_cap:
        raise NumericalError(f"|z|={z_mod:.3e} beyond evaluable cap {spec.modulus_cap:.3e}")

    blocks, skip_bound = _ring_blocks(z_mod, mu, spec.truncation_margin)
    k0, l0, u0, dist = nearest_pole(z, mu)
    near = dist < TOL.near_pole_factor * k0 ** (mu - 1.0)

    zz = np.array([z], dtype=np.complex128)
    total = 0.0 + 0.0j
    dtotal = 0.0 + 0.0j
    for lo, hi in blocks:
        ks = np.arange(lo, hi + 1, dtype=np.float64)
        if near and lo <= k0 <= hi:
            ks = ks[ks != float(k0)]
        if ks.size == 0:
            continue
        t, dt = _ring_terms(zz, ks, mu, deriv)
        total += 2.0 * t.sum()
        if deriv:
            dtotal += 2.0 * dt.sum()
    if near:
        pf, dpf = _ring_partial_fractions(z, k0, mu, deriv)
        total += pf
        if deriv:
            dtotal += dpf
    if deriv:
        # derivative terms carry an extra factor of order K/|z|
        skip_bound = skip_bound * (1.0 + (2.0 * z_mod) ** (1.0 / mu) / z_mod)
    return total, (dtotal if deriv else None), skip_bound


# ---------------------------------------------------------------------------
# public scalar evaluators


def _require_finite(z) -> complex:
    p = as_point(z)
    if p.at_infinity:
        raise ValidationError("evaluation requires a finite point")
    return p.z


def eval_g(z, spec: SeriesFunctionSpec) -> EvalResult:
    """Evaluate the base series g with a rigorous truncation bound."""
    zc = _require_finite(z)
    if is_pole_hit(zc, spec):
        return EvalResult(PlanePoint.infinity(), 0.0, True)
    value, _, bound = _series_core(zc, spec, deriv=False)
    return EvalResult(PlanePoint.from_complex(value), bound, False)


def eval_g_deriv(z, spec: SeriesFunctionSpec) -> EvalResult:
    """Term-wise derivative g' with the same ring selection as eval_g."""
    zc = _require_finite(z)
    if is_pole_hit(zc, spec):
        raise ValidationError("derivative requested within pole tolerance of a pole")
    _, dvalue, bound = _series_core(zc, spec, deriv=True)
    return EvalResult(PlanePoint.from_complex(dvalue), bound, False)


def eval_f(z, spec: SeriesFunctionSpec) -> EvalResult:
    """Evaluate f = g^M; truncation bound propagated to first order."""
    base = eval_g(z, spec)
    if base.is_pole:
        return base
    g = base.value.z
    M = spec.M
    g_abs = abs(g)
    # detect overflow of g^M in log space before exponentiating
    if g_abs > 0 and M * math.log(g_abs) > 700.0:
        return EvalResult(PlanePoint.infinity(), math.inf, False)
    value = g**M
    bound = M * g_abs ** (M - 1) * base.truncation_bound if M > 1 else base.truncation_bound
    return EvalResult(PlanePoint.from_complex(value), bound, False)


def eval_f_deriv(z, spec: SeriesFunctionSpec) -> EvalResult:
    """f' = M g^(M-1) g'."""
    g = eval_g(z, spec)
    if g.is_pole:
        raise ValidationError("derivative requested at a pole")
    dg = eval_g_deriv(z, spec)
    gv = g.value.z
    value = spec.M * gv ** (spec.M - 1) * dg.value.z
    return EvalResult(PlanePoint.from_complex(value), dg.truncation_bound, False)


# ---------------------------------------------------------------------------
# batch evaluators (used by grids, web sampling and the area probe)


def eval_g_many(zs: np.ndarray, spec: SeriesFunctionSpec, chunk: int = 65536):
    """Vectorized g over an array of points.

    Returns (values, pole_mask, bound) where values is complex128 with inf
    entries at pole hits (and bound the worst truncation bound over the
    batch). Points near poles are routed through the stable scalar path.
    """
    zs = np.asarray(zs, dtype=np.complex128).ravel()
    values = np.empty(zs.shape, dtype=np.complex128)
    pole_mask = np.zeros(zs.shape, dtype=bool)
    worst = 0.0

    mu = spec.mu
    mods = np.abs(zs)
    zero = mods == 0.0
    values[zero] = 0.0

    live = ~zero
    idx = np.nonzero(live)[0]
    if idx.size == 0:
        return values, pole_mask, worst

    # nearest-pole distances, vectorized over four candidate rings
    z_live = zs[idx]
    m_live = mods[idx]
    k_guess = np.minimum(m_live ** (1.0 / mu), _MAX_RING_INDEX)
    theta = np.angle(z_live)
    best = np.full(idx.shape, np.inf)
    best_k = np.ones(idx.shape, dtype=np.int64)
    for off in (-1, 0, 1, 2):
        k = np.maximum(1, np.floor(k_guess).astype(np.int64) + off)
        l = np.round(theta * k / math.pi).astype(np.int64) % (2 * k)
        u = k.astype(float) ** mu * np.exp(1j * math.pi * l / k)
        d = np.abs(z_live - u)
        closer = d < best
        best = np.where(closer, d, best)
        best_k = np.where(closer, k, best_k)
    u_mod = best_k.astype(float) ** mu
    hit = best < TOL.pole_hit_rel * np.maximum(1.0, u_mod)
    near = (~hit) & (best < TOL.near_pole_factor * best_k.astype(float) ** (mu - 1.0))

    pole_mask[idx[hit]] = True
    values[idx[hit]] = np.inf

    # individually: near-pole points and points beyond the one-block regime
    K_each = np.maximum(1, np.ceil((2.0 * m_live) ** (1.0 / mu))) + spec.truncation_margin
    simple = (~hit) & (~near) & (K_each <= _SIMPLE_RING_LIMIT)
    single = (~hit) & ~simple

    for i in idx[single]:
        v, _, b = _series_core(complex(zs[i]), spec, deriv=False)
        values[i] = v
        worst = max(worst, b)

    simple_idx = idx[simple]
    if simple_idx.size:
        order = np.argsort(mods[simple_idx])
        simple_idx = simple_idx[order]
        for start in range(0, simple_idx.size, chunk):
            block = simple_idx[start : start + chunk]
            K = tail_cutoff(float(mods[block].max()), mu, spec.truncation_margin)
            ks = np.arange(1, K + 1, dtype=np.float64)
            t, _ = _ring_terms(zs[block], ks, mu, deriv=False)
            values[block] = 2.0 * t.sum(axis=1)
            worst = max(worst, tail_bound(K))
    return values, pole_mask, worst


def eval_f_many(zs: np.ndarray, spec: SeriesFunctionSpec):
    """Vectorized f = g^M; overflow becomes inf (numerically at infinity)."""
    g, pole_mask, bound = eval_g_many(zs, spec)
    M = spec.M
    if M == 1:
        return g, pole_mask, bound
    with np.errstate(over="ignore", invalid="ignore"):
        mag = np.abs(g)
        safe = np.isfinite(mag) & (mag > 0) & (M * np.log(np.where(mag > 0, mag, 1.0)) <= 700.0)
        out = np.where(safe, g, 1.0) ** M
        out = np.where(safe, out, np.inf)
        out = np.where(mag == 0.0, 0.0, out)
    return out, pole_mask, bound


# ---------------------------------------------------------------------------
# disk-forest evaluation


def _forest_terms_log(zs: np.ndarray, spec: DiskForestSpec, deriv: bool):
    """Forest terms in log space so huge multiplicities cannot overflow."""
    a, r, _, eps, m = spec.arrays()
    diff = zs[:, None] - a[None, :]
    dist = np.abs(diff)
    with np.errstate(divide="ignore"):
        # log magnitude of eps_k (r_k / |z - a_k|)^{m_k}
        logdist = np.log(dist)
        logmag = np.log(eps)[None, :] + m[None, :] * (np.log(r)[None, :] - logdist)
        phase = -m[None, :] * np.angle(diff)
        if deriv:
            logmag = logmag + np.log(m)[None, :] - logdist
            phase = phase - np.angle(diff)
    return logmag, phase


def eval_forest_many(zs: np.ndarray, spec: DiskForestSpec, deriv: bool = False):
    """Vectorized forest evaluation; returns (values, pole_mask)."""
    zs = np.asarray(zs, dtype=np.complex128).ravel()
    if len(spec) == 0:
        return np.zeros(zs.shape, dtype=np.complex128), np.zeros(zs.shape, dtype=bool)
    a, *_ = spec.arrays()
    dist = np.abs(zs[:, None] - a[None, :])
    pole_mask = (dist < TOL.pole_hit_rel * np.maximum(1.0, np.abs(a))[None, :]).any(axis=1)

    logmag, phase = _forest_terms_log(zs, spec, deriv)
    overflow = (logmag > 700.0).any(axis=1)
    with np.errstate(over="ignore", invalid="ignore"):
        terms = np.exp(np.clip(logmag, -745.0, 700.0)) * np.exp(1j * phase)
        values = terms.sum(axis=1)
    sign = -1.0 if deriv else 1.0
    values = sign * values
    values[overflow | pole_mask] = np.inf
    return values, pole_mask


def eval_forest(z, spec: DiskForestSpec) -> EvalResult:
    """Scalar forest evaluation (the finite sum is exact, no truncation)."""
    zc = _require_finite(z)
    values, pole_mask = eval_forest_many(np.array([zc]), spec)
    if pole_mask[0]:
        return EvalResult(PlanePoint.infinity(), 0.0, True)
    v = values[0]
    if not (math.isfinite(v.real) and math.isfinite(v.imag)):
        return EvalResult(PlanePoint.infinity(), 0.0, False)
    return EvalResult(PlanePoint.from_complex(v), 0.0, False)


def eval_forest_deriv(z, spec: DiskForestSpec) -> EvalResult:
    zc = _require_finite(z)
    values, pole_mask = eval_forest_many(np.array([zc]), spec, deriv=True)
    if pole_mask[0]:
        raise ValidationError("derivative requested at a forest pole")
    return EvalResult(PlanePoint.from_complex(values[0]), 0.0, False)


# ---------------------------------------------------------------------------
# unified dispatch (what the dynamics module iterates)

FunctionSpec = SeriesFunctionSpec | DiskForestSpec | RationalFunctionSpec


def evaluate(spec: FunctionSpec, z) -> EvalResult:
    """Apply the dynamical map of `spec` once."""
    if isinstance(spec, SeriesFunctionSpec):
        return eval_f(z, spec)
    if isinstance(spec, DiskForestSpec):
        return eval_forest(z, spec)
    if isinstance(spec, RationalFunctionSpec):
        return _eval_rational(z, spec)
    raise ValidationError(f"unsupported function spec {type(spec).__name__}")


def evaluate_many(spec: FunctionSpec, zs: np.ndarray):
    """Batch version of evaluate(): (values, pole_mask), inf at infinity."""
    if isinstance(spec, SeriesFunctionSpec):
        values, pole_mask, _ = eval_f_many(zs, spec)
        return values, pole_mask
    if isinstance(spec, DiskForestSpec):
        return eval_forest_many(zs, spec)
    if isinstance(spec, RationalFunctionSpec):
        return _eval_rational_many(np.asarray(zs, dtype=np.complex128), spec)
    raise ValidationError(f"unsupported function spec {type(spec).__name__}")


def _eval_rational_many(zs: np.ndarray, spec: RationalFunctionSpec):
    num, den = spec.coefficients
    pole_mask = np.zeros(zs.shape, dtype=bool)
    for p in spec.poles:
        pole_mask |= np.abs(zs - p) < TOL.pole_hit_rel * max(1.0, abs(p))
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.polyval(np.array(num, dtype=complex), zs) / np.polyval(
            np.array(den, dtype=complex), zs
        )
    values = np.where(pole_mask, np.inf, values)
    return values, pole_mask


def _eval_rational(z, spec: RationalFunctionSpec) -> EvalResult:
    zc = _require_finite(z)
    values, pole_mask = _eval_rational_many(np.array([zc], dtype=complex), spec)
    if pole_mask[0]:
        return EvalResult(PlanePoint.infinity(), 0.0, True)
    return EvalResult(PlanePoint.from_complex(values[0]), 0.0, False)
