import numpy as np
import pytest
from PIL import Image

from merodim.dynamics import (
    ESCAPING,
    PALETTE,
    POLE_HIT,
    RETURNED,
    Rect,
    classify_grid,
    escaping_points,
    iterate_orbit,
)
from merodim.errors import ValidationError
from merodim.functions import RationalFunctionSpec, SeriesFunctionSpec
from merodim.verify import choose_forest_params, probe_layout

SERIES = SeriesFunctionSpec(2.0, 1)
REGION = Rect(-5.0, -5.0, 10.0, 10.0)


@pytest.fixture(scope="module")
def forest():
    return choose_forest_params(probe_layout())


class TestIterateOrbit:
    def test_forest_origin_returns_immediately(self, forest):
        rec = iterate_orbit(forest, 0.0, 10.0, 20)
        assert rec.classification == "returned"
        assert rec.steps_taken == 1
        assert rec.moduli[0] < 0.5

    def test_exact_pole_hit(self):
        rec = iterate_orbit(SERIES, 1.0, 10.0, 20)
        assert rec.classification == "pole_hit"
        assert rec.steps_taken == 1

    def test_pole_hit_stable_under_tiny_perturbation(self):
        rec = iterate_orbit(SERIES, 1.0 + 1e-14, 10.0, 20)
        assert rec.classification == "pole_hit"
        assert rec.steps_taken == 1

    def test_deep_disk_first_step_exceeds_two(self, forest):
        d = forest.disks[0]
        rec = iterate_orbit(forest, d.center + d.inner_radius / 2.0, 2.00001, 20)
        assert rec.moduli[0] > 2.0

    def test_horizon_escaping_prefix(self):
        z0 = 1.0 + 2e-3j  # close enough to the first pole to stay big briefly
        rec = iterate_orbit(SERIES, z0, 10.0, 1)
        if rec.classification == "escaping":
            assert rec.steps_taken == 1
            assert all(m >= 10.0 for m in rec.moduli)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValidationError):
            iterate_orbit(SERIES, 0.5, 10.0, 0)
        with pytest.raises(ValidationError):
            iterate_orbit(SERIES, 0.5, 1.0, 5)

    def test_overflow_is_pole_hit(self):
        spec = choose_forest_params([(5.0 + 0j, 0.3)])
        d = spec.disks[0]
        z0 = d.center + d.radius * 1e-4  # deep enough to overflow the power
        rec = iterate_orbit(spec, z0, 2.0, 5)
        if rec.moduli[0] == np.inf:
            assert rec.classification == "pole_hit"

    def test_beyond_cap_is_undetermined_with_diagnostic(self):
        spec = SeriesFunctionSpec(4.0, 1)  # evaluable cap ~ 4.7e7
        rec = iterate_orbit(spec, 1e9, 10.0, 3)
        assert rec.classification == "undetermined"
        assert rec.diagnostic is not None

    def test_rational_map(self):
        rec = iterate_orbit(RationalFunctionSpec("reciprocal"), 4.0, 2.0, 6)
        # orbit alternates 4 -> 1/4: drops below R at step 1
        assert rec.classification == "returned"


class TestClassifyGrid:
    def test_rejects_degenerate(self):
        with pytest.raises(ValidationError):
            classify_grid(SERIES, REGION, 1, 5, 10.0, 5)
        with pytest.raises(ValidationError):
            classify_grid(SERIES, REGION, 10, 10, 10.0, 0)

    def test_deterministic_rerun(self):
        a = classify_grid(SERIES, REGION, 50, 50, 10.0, 10)
        b = classify_grid(SERIES, REGION, 50, 50, 10.0, 10)
        assert np.array_equal(a.cells, b.cells)
        assert np.array_equal(a.steps, b.steps)

    def test_parallel_matches_serial(self):
        a = classify_grid(SERIES, REGION, 40, 40, 10.0, 5, jobs=1)
        b = classify_grid(SERIES, REGION, 40, 40, 10.0, 5, jobs=3)
        assert np.array_equal(a.cells, b.cells)
        assert np.array_equal(a.steps, b.steps)

    def test_r_monotonicity(self):
        lo = classify_grid(SERIES, REGION, 120, 120, 10.0, 1)
        hi = classify_grid(SERIES, REGION, 120, 120, 25.0, 1)
        esc_lo = lo.cells == ESCAPING
        esc_hi = hi.cells == ESCAPING
        assert esc_lo.sum() > esc_hi.sum() > 0
        assert np.all(~esc_hi | esc_lo)

    def test_horizon_monotonicity(self):
        h1 = classify_grid(SERIES, REGION, 120, 120, 10.0, 1)
        h2 = classify_grid(SERIES, REGION, 120, 120, 10.0, 2)
        esc1 = h1.cells == ESCAPING
        esc2 = h2.cells == ESCAPING
        assert np.all(~esc2 | esc1)

    def test_forest_basin_all_returned(self, forest):
        grid = classify_grid(forest, Rect(-0.4, -0.4, 0.8, 0.8), 10, 10, 2.0, 8)
        assert (grid.cells == RETURNED).all()

    def test_pole_cells_marked(self):
        grid = classify_grid(SERIES, Rect(0.9, -0.1, 0.2, 0.2), 21, 21, 10.0, 3)
        assert (grid.cells == POLE_HIT).sum() >= 1


class TestEscapingPoints:
    def test_empty(self):
        grid = classify_grid(SERIES, Rect(-0.4, -0.4, 0.8, 0.8), 8, 8, 10.0, 30)
        assert escaping_points(grid) == []

    def test_count_matches_cells(self):
        grid = classify_grid(SERIES, REGION, 60, 60, 10.0, 1)
        pts = escaping_points(grid)
        assert len(pts) == int((grid.cells == ESCAPING).sum())
        region = grid.region
        assert all(region.contains(p) for p in pts)


class TestArtifacts:
    def test_csv_roundtrip(self, tmp_path):
        grid = classify_grid(SERIES, REGION, 12, 9, 10.0, 3)
        path = tmp_path / "grid.csv"
        grid.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "cell,re,im,code,steps"
        assert len(lines) - 1 == 12 * 9
        cells = lines[1].split(",")
        assert int(cells[0]) == 0
        assert float(cells[1]) == grid.centers()[0, 0].real

    def test_png_palette(self, tmp_path):
        grid = classify_grid(SERIES, REGION, 40, 40, 10.0, 1)
        path = tmp_path / "grid.png"
        grid.to_png(path)
        img = np.asarray(Image.open(path))
        assert img.shape == (40, 40, 3)
        seen = {tuple(c) for c in img.reshape(-1, 3)}
        assert seen <= set(PALETTE.values())
        # image rows are flipped relative to grid rows
        code = grid.cells[-1, 0]
        assert tuple(img[0, 0]) == PALETTE[int(code)]
