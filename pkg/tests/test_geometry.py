import math

import numpy as np
import pytest

from merodim.errors import ValidationError
from merodim.geometry import (
    Annulus,
    Disk,
    PlanePoint,
    dyadic_annulus,
    koebe_constants,
    spherical_diameter_factor,
    spherical_distance,
)


class TestSphericalDistance:
    def test_identity(self):
        assert spherical_distance(0.0, 0.0) == 0.0
        assert spherical_distance(3 + 4j, 3 + 4j) == 0.0

    def test_zero_one(self):
        assert spherical_distance(0.0, 1.0) == pytest.approx(math.sqrt(2), rel=1e-14)

    def test_three_four(self):
        # 2 / sqrt(10 * 17), frozen from a 40-digit evaluation of the
        # chordal formula
        assert spherical_distance(3.0, 4.0) == pytest.approx(
            0.153392997769474, rel=1e-12)

    def test_infinity(self):
        inf = PlanePoint.infinity()
        assert spherical_distance(inf, inf) == 0.0
        for z in [0.0, 1.0, 3 + 4j, 100j]:
            expected = 2.0 / math.sqrt(1.0 + abs(z) ** 2)
            assert spherical_distance(z, inf) == pytest.approx(expected, rel=1e-14)
            assert spherical_distance(inf, z) == pytest.approx(expected, rel=1e-14)

    def test_distance_to_infinity_decreases_in_modulus(self):
        inf = PlanePoint.infinity()
        values = [spherical_distance(r, inf) for r in [0.1, 1.0, 10.0, 1e3, 1e6]]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_metric_properties_random_triples(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            z = rng.normal(size=3) * 10 + 1j * rng.normal(size=3) * 10
            a, b, c = (complex(v) for v in z)
            dab, dba = spherical_distance(a, b), spherical_distance(b, a)
            assert dab == dba  # symmetry is exact
            assert dab <= 2.0
            dac, dcb = spherical_distance(a, c), spherical_distance(c, b)
            assert dab <= dac + dcb + 1e-12

    def test_bounded_by_two(self):
        assert spherical_distance(-1e12, 1e12) <= 2.0


class TestDiameterFactor:
    def test_unit_modulus(self):
        assert spherical_diameter_factor(1.0, 1) == 8.0

    def test_exponent(self):
        assert spherical_diameter_factor(4.0, 2) == pytest.approx(1.0, rel=1e-14)
        assert spherical_diameter_factor(100.0, 1) == pytest.approx(8e-4, rel=1e-14)

    def test_rejects_small_modulus(self):
        with pytest.raises(ValidationError):
            spherical_diameter_factor(0.5, 1)


class TestKoebeConstants:
    def test_half(self):
        kc = koebe_constants(0.5)
        assert kc.deriv_upper == pytest.approx(12.0, rel=1e-14)
        assert kc.offset_lower == pytest.approx(0.5 / 2.25, rel=1e-14)
        assert kc.offset_upper == pytest.approx(2.0, rel=1e-14)

    def test_small_lambda_limit(self):
        kc = koebe_constants(1e-9)
        assert kc.deriv_lower == pytest.approx(1.0, abs=1e-8)
        assert kc.deriv_upper == pytest.approx(1.0, abs=1e-8)
        assert kc.offset_lower == pytest.approx(1e-9, rel=1e-6)

    def test_three_quarters_distortion_ratio(self):
        kc = koebe_constants(0.75)
        ratio = kc.deriv_lower / kc.deriv_upper
        assert ratio == pytest.approx((1.0 / 7.0) ** 4, rel=1e-12)

    def test_monotonicity(self):
        lams = np.linspace(0.05, 0.95, 19)
        cs = [koebe_constants(l) for l in lams]
        assert all(a.offset_upper < b.offset_upper for a, b in zip(cs, cs[1:]))
        assert all(a.deriv_upper < b.deriv_upper for a, b in zip(cs, cs[1:]))
        assert all(a.deriv_lower > b.deriv_lower for a, b in zip(cs, cs[1:]))

    def test_bounds_ordering(self):
        for lam in (0.1, 0.5, 0.9):
            kc = koebe_constants(lam)
            assert kc.deriv_lower <= 1.0 <= kc.deriv_upper
            assert 0 < kc.offset_lower <= kc.offset_upper

    @pytest.mark.parametrize("lam", [0.0, 1.0, -0.3, 1.5])
    def test_rejects_out_of_range(self, lam):
        with pytest.raises(ValidationError):
            koebe_constants(lam)


class TestPlanePoint:
    def test_polar_roundtrip(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            mod = float(10.0 ** rng.uniform(-8, 8))
            ang = float(rng.uniform(-math.pi, math.pi))
            p = PlanePoint.from_polar(mod, ang)
            mod2, ang2 = p.to_polar()
            assert mod2 == pytest.approx(mod, rel=1e-12)
            q = PlanePoint.from_polar(mod2, ang2)
            assert abs(q.z - p.z) <= 1e-12 * max(1.0, mod)

    def test_infinity_handling(self):
        inf = PlanePoint.infinity()
        assert inf.at_infinity
        assert math.isinf(inf.modulus)
        with pytest.raises(ValidationError):
            inf.to_polar()
        with pytest.raises(ValidationError):
            _ = inf.z

    def test_from_complex_nonfinite(self):
        assert PlanePoint.from_complex(complex(math.inf, 0)).at_infinity
        assert PlanePoint.from_complex(complex(0, math.nan)).at_infinity

    def test_complex_conversion(self):
        p = PlanePoint.from_complex(2 - 3j)
        assert complex(p) == 2 - 3j


class TestShapes:
    def test_disk_contains_center(self):
        d = Disk(1 + 1j, 0.5)
        assert d.contains(d.center)
        assert not d.contains(2 + 2j)

    def test_disk_rejects_bad_radius(self):
        with pytest.raises(ValidationError):
            Disk(0j, 0.0)
        with pytest.raises(ValidationError):
            Disk(0j, -1.0)

    def test_annulus_ordering(self):
        with pytest.raises(ValidationError):
            Annulus(2.0, 1.0)
        a = dyadic_annulus(3)
        assert a.contains(8.0) and a.contains(15.9) and not a.contains(16.0)
        assert not a.contains(7.9)
