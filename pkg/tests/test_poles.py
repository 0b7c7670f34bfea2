import math

import numpy as np
import pytest

from merodim.errors import NumericalError, ValidationError
from merodim.poles import (
    build_atlas,
    convergence_exponent_estimate,
    counting_function,
    critical_exponent,
    dimension_bound,
    packing_sum,
    pole_weight_sum,
    tail_weight_slope,
)


def brute_force_poles(rho, r_max):
    """Independent enumeration oracle straight from the defining formulas.

    Sorted by exact modulus (the ring radius k^mu) with slot tiebreak;
    the floating |u| of different slots on one ring differs in the last
    ulp, so it cannot serve as the tie key.
    """
    mu = 2.0 / rho
    poles = []
    k = 1
    while k**mu <= r_max:
        for l in range(2 * k):
            u = k**mu * np.exp(1j * math.pi * l / k)
            v = k ** (mu - 1.0) * np.exp(1j * math.pi * l * (1.0 - k) / k)
            poles.append((complex(u), complex(v), k, l))
        k += 1
    poles.sort(key=lambda p: (p[2] ** mu, p[3]))
    return poles


class TestBuildAtlas:
    def test_rho2_rmax_3p5(self):
        atlas = build_atlas(2.0, 1, 3.5)
        assert atlas.ring_count == 3
        assert atlas.n_entries == 12
        assert counting_function(atlas, 3.5) == 12

    def test_first_ring_locations(self):
        atlas = build_atlas(2.0, 1, 3.5)
        e1, e2 = atlas.entry(1), atlas.entry(2)
        assert e1.location == pytest.approx(1 + 0j)
        assert e2.location == pytest.approx(-1 + 0j, abs=1e-15)

    def test_ring2_slot1(self):
        atlas = build_atlas(2.0, 1, 3.5)
        e = atlas.entry(4)  # ring 2, slot 1
        assert (e.ring, e.slot) == (2, 1)
        assert e.location == pytest.approx(2j, abs=1e-14)
        assert abs(e.scale) == pytest.approx(1.0, rel=1e-14)

    def test_matches_brute_force(self):
        atlas = build_atlas(2.0, 1, 25.0)
        oracle = brute_force_poles(2.0, 25.0)
        assert atlas.n_entries == len(oracle)
        for j, (u, v, k, l) in enumerate(oracle, start=1):
            e = atlas.entry(j)
            assert (e.ring, e.slot) == (k, l)
            assert e.location == pytest.approx(u, abs=1e-12)
            assert e.scale == pytest.approx(v, abs=1e-12)

    def test_sorted_by_modulus(self):
        atlas = build_atlas(1.0, 1, 50.0)
        mods = [abs(e.location) for e in atlas.iter_entries()]
        assert all(a <= b + 1e-9 for a, b in zip(mods, mods[1:]))

    def test_conjugation_closure(self):
        atlas = build_atlas(2.0, 1, 10.0)
        for k in range(1, atlas.ring_count + 1):
            locations, _, _ = atlas.ring_block(k)
            for l in range(2 * k):
                partner = locations[(2 * k - l) % (2 * k)]
                assert locations[l].conjugate() == pytest.approx(partner, abs=1e-12)

    def test_rejects_small_rmax(self):
        with pytest.raises(ValidationError):
            build_atlas(2.0, 1, 0.5)

    def test_entry_cap(self):
        atlas = build_atlas(2.0, 1, 1e4, max_entries=10_000)
        assert atlas.n_entries <= 10_000
        assert atlas.r_max < 1e4


class TestCountingFunction:
    def test_below_first_ring(self):
        atlas = build_atlas(2.0, 1, 10.0)
        assert counting_function(atlas, 0.99) == 0

    def test_mu_two(self):
        atlas = build_atlas(1.0, 1, 9.5)
        assert counting_function(atlas, 9.5) == 12

    def test_exact_against_enumeration(self):
        atlas = build_atlas(2.0, 1, 1000.0)
        oracle = brute_force_poles(2.0, 1000.0)
        mu = 1.0
        for r in [1.0, 1.5, 2.0, 3.5, 10.0, 31.4, 100.0, 999.0, 1000.0]:
            # membership by the defining modulus k^mu (a float |u| is off
            # by an ulp for some slots)
            expected = sum(1 for _, _, k, _ in oracle if k**mu <= r)
            assert counting_function(atlas, r) == expected

    def test_nondecreasing_and_right_continuous(self):
        atlas = build_atlas(2.0, 1, 50.0)
        rs = np.linspace(1.0, 50.0, 500)
        ns = [counting_function(atlas, r) for r in rs]
        assert all(a <= b for a, b in zip(ns, ns[1:]))
        # includes the ring exactly at its radius
        for k in (1, 2, 7):
            at = counting_function(atlas, float(k))
            below = counting_function(atlas, float(k) - 1e-9)
            assert at == k * (k + 1)
            assert below == (k - 1) * k

    def test_rejects_beyond_rmax(self):
        atlas = build_atlas(2.0, 1, 10.0)
        with pytest.raises(ValidationError):
            counting_function(atlas, 50.0)


class TestWeightSum:
    def test_single_ring(self):
        atlas = build_atlas(2.0, 1, 1.0)
        assert atlas.n_entries == 2
        for t in (0.3, 1.0, 2.0):
            assert pole_weight_sum(atlas, t) == pytest.approx(2.0, rel=1e-14)

    def test_convergent_tail_flattens(self):
        # t above threshold: window increments shrink like r^(rho - t(rho/2+1/M))
        t = 1.2
        sums = {}
        for r_max in (1e2, 1e3, 1e4):
            atlas = build_atlas(2.0, 1, r_max)
            sums[r_max] = pole_weight_sum(atlas, t)
        d1 = sums[1e3] - sums[1e2]
        d2 = sums[1e4] - sums[1e3]
        predicted = 10.0 ** (2.0 - t * 2.0)  # = 10^-0.4
        assert d2 / d1 == pytest.approx(predicted, rel=0.2)
        assert d2 < d1

    def test_divergent_growth_exponent(self):
        t = 0.8
        rs = np.array([1e2, 1e3, 1e4])
        sums = np.array([pole_weight_sum(build_atlas(2.0, 1, r), t) for r in rs])
        slope = np.polyfit(np.log(rs), np.log(sums), 1)[0]
        assert slope == pytest.approx(2.0 - t * 2.0, abs=0.1)  # = 0.8

    def test_skip_below(self):
        atlas = build_atlas(2.0, 1, 10.0)
        full = pole_weight_sum(atlas, 1.0)
        tail = pole_weight_sum(atlas, 1.0, skip_below=5.0)
        head = pole_weight_sum(build_atlas(2.0, 1, 5.0), 1.0)
        assert full == pytest.approx(head + tail, rel=1e-12)

    def test_rejects_bad_t(self):
        atlas = build_atlas(2.0, 1, 10.0)
        for t in (0.0, -1.0, 2.5):
            with pytest.raises(ValidationError):
                pole_weight_sum(atlas, t)


class TestCriticalExponent:
    @pytest.mark.parametrize("rho,M,expected", [
        (2.0, 1, 1.0), (2.0, 3, 1.5), (1.0, 1, 2.0 / 3.0)])
    def test_threshold_matches_formula(self, rho, M, expected):
        mu = 2.0 / rho
        atlas = build_atlas(rho, M, 2048.0**mu, max_entries=5_000_000)
        assert critical_exponent(atlas) == pytest.approx(expected, abs=0.05)

    def test_requires_large_atlas(self):
        atlas = build_atlas(2.0, 1, 10.0)
        with pytest.raises(ValidationError):
            critical_exponent(atlas)

    def test_threshold_sandwich(self):
        for rho, M in [(1.0, 1), (2.0, 1), (2.0, 2), (0.5, 1), (4.0, 2)]:
            mu = 2.0 / rho
            atlas = build_atlas(rho, M, 1024.0**mu, max_entries=5_000_000)
            t_formula = dimension_bound(rho, M)
            assert tail_weight_slope(atlas, t_formula + 0.1) < -0.02
            assert tail_weight_slope(atlas, t_formula - 0.1) > 0.02


class TestDimensionBound:
    def test_elliptic_order_two(self):
        for M in range(1, 5):
            assert dimension_bound(2.0, M) == pytest.approx(2.0 * M / (1.0 + M))

    def test_small_rho_limit(self):
        assert dimension_bound(1e-9, 1) == pytest.approx(1e-9, rel=1e-6)

    def test_one_one(self):
        assert dimension_bound(1.0, 1) == pytest.approx(2.0 / 3.0)

    def test_monotone_and_below_two(self):
        values = [dimension_bound(r, 1) for r in (0.5, 1.0, 2.0, 4.0, 100.0)]
        assert all(a < b for a, b in zip(values, values[1:]))
        assert all(v < 2.0 for v in values)
        values_m = [dimension_bound(2.0, m) for m in (1, 2, 3, 10)]
        assert all(a < b for a, b in zip(values_m, values_m[1:]))


class TestConvergenceExponent:
    @pytest.mark.parametrize("rho,lo,hi", [(2.0, 1.9, 2.1), (0.5, 0.45, 0.55)])
    def test_order_recovered(self, rho, lo, hi):
        mu = 2.0 / rho
        atlas = build_atlas(rho, 1, 2048.0**mu, max_entries=5_000_000)
        assert lo <= convergence_exponent_estimate(atlas) <= hi

    def test_single_ring_insufficient(self):
        atlas = build_atlas(2.0, 1, 1.0)
        with pytest.raises(ValidationError):
            convergence_exponent_estimate(atlas)


class TestPacking:
    @pytest.mark.parametrize("rho", [0.5, 1.0, 2.0, 4.0])
    def test_scale_mass_inequality(self, rho):
        # sum |b_j|^2 over |a_j| <= r stays below 36 R^2 r^2 at R = 16
        mu = 2.0 / rho
        atlas = build_atlas(rho, 1, 512.0**mu, max_entries=5_000_000)
        r = atlas.r_max
        while r >= 1.0:
            assert packing_sum(atlas, r) <= 36.0 * 16.0**2 * r * r
            r /= 2.0


class TestResidueIdentity:
    @pytest.mark.parametrize("rho", [2.0, 0.5])
    def test_scale_equals_location_power(self, rho):
        mu = 2.0 / rho
        atlas = build_atlas(rho, 1, 64.0**mu)
        for k in range(1, atlas.ring_count + 1):
            locations, scales, _ = atlas.ring_block(k)
            expected = np.abs(locations) ** (1.0 - rho / 2.0)
            err = np.abs(np.abs(scales) - expected) / expected
            assert float(err.max()) <= 1e-12


class TestCsvExport:
    def test_roundtrip_precision(self, tmp_path):
        atlas = build_atlas(2.0, 1, 5.0)
        path = tmp_path / "atlas.csv"
        rows = atlas.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "j,re_a,im_a,re_b,im_b,m,ring,slot"
        assert len(lines) - 1 == rows == atlas.n_entries
        for line, entry in zip(lines[1:], atlas.iter_entries()):
            cells = line.split(",")
            assert int(cells[0]) == entry.j
            # 17 significant digits: exact float round trip
            assert float(cells[1]) == entry.location.real
            assert float(cells[2]) == entry.location.imag
            assert float(cells[3]) == entry.scale.real
            assert int(cells[5]) == entry.multiplicity
