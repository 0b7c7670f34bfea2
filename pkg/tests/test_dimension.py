import math

import numpy as np
import pytest

from merodim.dimension import (
    CoverSequence,
    box_count,
    escape_cover_sequence,
    fit_box_dimension,
    mcmullen_bound,
    measure_densities,
    running_ratios,
)
from merodim.dynamics import ESCAPING, RETURNED, GridClassification, Rect
from merodim.errors import ValidationError
from merodim.poles import dimension_bound

UNIT = Rect(0.0, 0.0, 1.0, 1.0)


def cantor_points(level: int) -> list[complex]:
    """Endpoints of the level-n middle-thirds construction (recursive oracle)."""
    intervals = [(0.0, 1.0)]
    for _ in range(level):
        nxt = []
        for a, b in intervals:
            third = (b - a) / 3.0
            nxt.append((a, a + third))
            nxt.append((b - third, b))
        intervals = nxt
    pts = []
    for a, b in intervals:
        pts.append(complex(a, 0.0))
        pts.append(complex(b, 0.0))
    return pts


class TestBoxCount:
    def test_single_point(self):
        for s in (0.5, 0.1, 0.013):
            assert box_count([0.3 + 0.4j], s, UNIT) == 1

    def test_segment_counts(self):
        pts = [complex(x, 0.0) for x in np.linspace(0.0, 1.0, 1000)]
        for j in range(3, 8):
            size = 2.0**-j
            # every box along the segment is hit: the analytic count is 1/size
            assert box_count(pts, size, UNIT) == 2**j

    def test_nonincreasing_in_size(self):
        rng = np.random.default_rng(2)
        pts = rng.random(500) + 1j * rng.random(500)
        counts = [box_count(pts, 2.0**-j, UNIT) for j in range(1, 8)]
        assert all(a <= b for a, b in zip(counts, counts[1:]))

    def test_rejects_outside_points(self):
        with pytest.raises(ValidationError):
            box_count([5.0 + 0j], 0.1, UNIT)

    def test_rejects_empty(self):
        with pytest.raises(ValidationError):
            box_count([], 0.1, UNIT)


class TestFitBoxDimension:
    def test_segment_dimension(self):
        pts = [complex(x, 0.0) for x in np.linspace(0.0, 1.0, 1000)]
        est = fit_box_dimension(pts, [2.0**-j for j in range(3, 8)], UNIT)
        assert est.value == pytest.approx(1.0, abs=0.05)
        assert est.point_count == 1000

    def test_square_dimension(self):
        xs = np.linspace(0.0, 1.0, 200)
        pts = (xs[None, :] + 1j * xs[:, None]).ravel()
        est = fit_box_dimension(pts, [2.0**-j for j in range(2, 7)], UNIT)
        assert est.value == pytest.approx(2.0, abs=0.05)

    def test_cantor_dimension(self):
        pts = cantor_points(10)
        sizes = [3.0**-j for j in range(2, 8)]
        est = fit_box_dimension(pts, sizes, UNIT)
        assert est.value == pytest.approx(math.log(2) / math.log(3), abs=0.05)

    def test_needs_four_sizes(self):
        with pytest.raises(ValidationError):
            fit_box_dimension([0.5 + 0.5j], [0.5, 0.25, 0.125], UNIT)


class TestMcMullenBound:
    def test_geometric_closed_form(self):
        for delta, c in [(0.25, 0.5), (0.9, 0.3), (0.01, 0.9)]:
            cover = CoverSequence.from_values(
                [delta] * 30, [c**l for l in range(1, 31)])
            closed = 2.0 - abs(math.log(delta)) / abs(math.log(c))
            assert mcmullen_bound(cover) == pytest.approx(closed, abs=1e-12)

    def test_full_density_gives_ambient(self):
        cover = CoverSequence.from_values([1.0] * 10,
                                          [0.5**l for l in range(1, 11)])
        assert mcmullen_bound(cover) == pytest.approx(2.0, abs=1e-12)

    def test_scale_covariance(self):
        delta, c = 0.3, 0.4
        base = CoverSequence.from_values([delta] * 20,
                                         [c**l for l in range(1, 21)])
        squared = CoverSequence.from_values([delta] * 20,
                                            [(c**l) ** 2 for l in range(1, 21)])
        gap = 2.0 - mcmullen_bound(base)
        gap2 = 2.0 - mcmullen_bound(squared)
        assert gap2 == pytest.approx(gap / 2.0, abs=1e-12)

    def test_ratio_definition(self):
        cover = CoverSequence.from_values([0.5, 0.25], [0.1, 0.01])
        ratios = running_ratios(cover)
        assert ratios[0] == pytest.approx(math.log(2) / math.log(10))
        assert ratios[1] == pytest.approx(
            (math.log(2) + math.log(4)) / math.log(100))

    def test_validation(self):
        with pytest.raises(ValidationError):
            CoverSequence.from_values([], [])
        with pytest.raises(ValidationError):
            CoverSequence.from_values([0.5], [1.5])
        with pytest.raises(ValidationError):
            CoverSequence.from_values([1.5], [0.5])


class TestEscapeCover:
    @pytest.mark.parametrize("rho,M", [(2.0, 1), (2.0, 3), (1.0, 1), (0.5, 1),
                                       (4.0, 2)])
    def test_limit_matches_formula(self, rho, M):
        cover = escape_cover_sequence(rho, M, 1e12, 50)
        assert mcmullen_bound(cover) == pytest.approx(
            dimension_bound(rho, M), abs=1e-6)

    def test_levels_survive_underflow(self):
        cover = escape_cover_sequence(2.0, 1, 1e12, 50)
        assert cover.log_diameters[-1] < -700  # not representable as a float
        assert math.isfinite(running_ratios(cover)[-1])

    def test_r_too_small_rejected(self):
        with pytest.raises(ValidationError):
            escape_cover_sequence(2.0, 1, 0.5, 10)
        with pytest.raises(ValidationError):
            escape_cover_sequence(2.0, 1, 1e6, 1)

    def test_nondecreasing_in_r(self):
        values = [mcmullen_bound(escape_cover_sequence(2.0, 2, R, 40))
                  for R in (1e3, 1e6, 1e9, 1e12)]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


def synthetic_grid(cells: np.ndarray) -> GridClassification:
    ny, nx = cells.shape
    return GridClassification(Rect(0.0, 0.0, 1.0, 1.0), nx, ny, 10.0, 5,
                              cells.astype(np.int8), np.zeros_like(cells, dtype=np.int32))


class TestMeasureDensities:
    def test_all_escaping(self):
        grid = synthetic_grid(np.full((16, 16), ESCAPING))
        assert measure_densities(grid, 2) == [1.0] * 16

    def test_all_returned_empty(self):
        grid = synthetic_grid(np.full((16, 16), RETURNED))
        assert measure_densities(grid, 1) == []

    def test_checkerboard(self):
        cells = np.indices((16, 16)).sum(axis=0) % 2
        grid = synthetic_grid(np.where(cells == 0, ESCAPING, RETURNED))
        dens = measure_densities(grid, 1)
        assert dens == [0.5, 0.5, 0.5, 0.5]

    def test_refinement_bounds(self):
        grid = synthetic_grid(np.full((8, 8), ESCAPING))
        with pytest.raises(ValidationError):
            measure_densities(grid, 0)
        with pytest.raises(ValidationError):
            measure_densities(grid, 4)
