"""Ground spaces, cost matrices, and their file formats."""

import numpy as np
import pytest

from wproj.geometry import (
    CostMatrix,
    Grid,
    PointCloud,
    Ring,
    build_cost_matrix,
    load_cost,
    load_points_csv,
    save_cost,
    save_points_csv,
)


class TestRing:
    def test_row_zero_of_ring4(self):
        cm = build_cost_matrix(Ring(4), p=1.0)
        np.testing.assert_array_equal(cm.costs[0], [0.0, 1.0, 2.0, 1.0])

    def test_ring30_squared_by_enumeration(self):
        """Every entry matches min(|i-j|, 30-|i-j|)**2 computed directly."""
        cm = build_cost_matrix(Ring(30), p=2.0)
        for i in range(30):
            for j in range(30):
                d = min(abs(i - j), 30 - abs(i - j))
                assert cm.costs[i, j] == d**2
        assert cm.max_cost == 225.0

    def test_rows_are_cyclic_shifts(self):
        cm = build_cost_matrix(Ring(30), p=2.0)
        for i in range(1, 30):
            np.testing.assert_array_equal(cm.costs[i], np.roll(cm.costs[0], i))

    def test_min_size(self):
        with pytest.raises(ValueError):
            Ring(1)


class TestGrid:
    def test_cell_center_distances(self):
        cm = build_cost_matrix(Grid(2, 3, cell_size=2.0), p=1.0)
        # cell 0 is (1, 1), cell 5 is (3, 5) in scaled coordinates
        assert cm.costs[0, 0] == 0.0
        np.testing.assert_allclose(cm.costs[0, 5], np.hypot(2.0, 4.0))
        np.testing.assert_allclose(cm.costs[0, 1], 2.0)

    def test_scaling_is_linear(self):
        d1 = Grid(3, 3, cell_size=1.0).distance_matrix()
        d4 = Grid(3, 3, cell_size=4.0).distance_matrix()
        np.testing.assert_allclose(d4, 4.0 * d1)


class TestPointCloud:
    def test_euclidean(self):
        pts = np.array([[0.0, 0.0], [3.0, 4.0]])
        cm = build_cost_matrix(PointCloud(points=pts), p=1.0)
        np.testing.assert_allclose(cm.costs, [[0.0, 5.0], [5.0, 0.0]])

    def test_cosine_range_and_diagonal(self, rng):
        pts = rng.normal(size=(20, 6))
        cm = build_cost_matrix(PointCloud(points=pts, metric="cosine"), p=1.0)
        assert np.all(cm.costs >= 0.0) and np.all(cm.costs <= 2.0)
        np.testing.assert_allclose(np.diag(cm.costs), 0.0, atol=1e-12)

    def test_cosine_rejects_zero_vector(self):
        with pytest.raises(ValueError, match="nonzero"):
            PointCloud(points=np.array([[1.0, 0.0], [0.0, 0.0]]), metric="cosine")

    def test_unknown_metric(self):
        with pytest.raises(ValueError):
            PointCloud(points=np.ones((2, 2)), metric="manhattan")


class TestBuildCostMatrix:
    def test_output_subset_columns(self):
        cm = build_cost_matrix(Ring(6), output_subset=[2], p=3.0)
        assert cm.k_v == 1
        assert cm.costs[2, 0] == 0.0
        np.testing.assert_allclose(cm.costs[:, 0], np.array([2, 1, 0, 1, 2, 3.0]) ** 3)

    def test_empty_subset_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            build_cost_matrix(Ring(4), output_subset=[])

    def test_invalid_index_rejected(self):
        with pytest.raises(ValueError, match="indices"):
            build_cost_matrix(Ring(4), output_subset=[4])

    def test_p_below_one_rejected(self):
        with pytest.raises(ValueError, match="p must be"):
            build_cost_matrix(Ring(4), p=0.5)

    @pytest.mark.parametrize("space", [Ring(7), Grid(3, 4), None])
    def test_symmetry_on_matched_support(self, space, rng):
        if space is None:
            space = PointCloud(points=rng.normal(size=(9, 3)))
        cm = build_cost_matrix(space, p=2.0)
        np.testing.assert_allclose(cm.costs, cm.costs.T, atol=1e-12)
        np.testing.assert_allclose(np.diag(cm.costs), 0.0, atol=1e-12)

    @pytest.mark.parametrize("space", [Ring(7), Grid(3, 4)])
    def test_triangle_inequality(self, space):
        d = space.distance_matrix()
        n = d.shape[0]
        lhs = d[:, None, :]  # d(i, k)
        rhs = d[:, :, None] + d[None, :, :]  # d(i, j) + d(j, k)
        assert np.all(lhs <= rhs + 1e-12)

    def test_power_consistency(self, rng):
        """Raising to a different p equals recomputing from raw distances."""
        space = PointCloud(points=rng.normal(size=(6, 2)))
        d = space.distance_matrix()
        for p in (1.0, 2.0, 3.5):
            cm = build_cost_matrix(space, p=p)
            np.testing.assert_allclose(cm.costs, d**p, atol=1e-12)
            np.testing.assert_allclose(cm.distances(), d, atol=1e-10)


class TestFileFormats:
    def test_cost_csv_roundtrip(self, tmp_path, rng):
        cm = CostMatrix(costs=rng.uniform(0, 3, size=(4, 6)), p=2.0)
        path = tmp_path / "c.csv"
        save_cost(cm, path)
        back = load_cost(path)
        assert back.p == cm.p
        np.testing.assert_array_equal(back.costs, cm.costs)

    def test_cost_json_roundtrip(self, tmp_path, rng):
        cm = CostMatrix(costs=rng.uniform(0, 3, size=(3, 2)), p=1.5)
        path = tmp_path / "c.json"
        save_cost(cm, path)
        back = load_cost(path)
        assert back.p == cm.p
        np.testing.assert_array_equal(back.costs, cm.costs)

    def test_csv_header_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("2,3,1.0\n0.0,1.0\n1.0,0.0\n")
        with pytest.raises(ValueError, match="does not match"):
            load_cost(path)

    def test_points_csv_roundtrip(self, tmp_path, rng):
        cloud = PointCloud(points=rng.normal(size=(5, 3)), metric="cosine")
        path = tmp_path / "pts.csv"
        save_points_csv(cloud, path)
        back = load_points_csv(path)
        assert back.metric == "cosine"
        np.testing.assert_array_equal(back.points, cloud.points)


class TestCostMatrixValidation:
    def test_negative_cost_rejected(self):
        with pytest.raises(ValueError):
            CostMatrix(costs=np.array([[-1.0]]), p=1.0)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            CostMatrix(costs=np.array([[np.inf]]), p=1.0)
