import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from twdlasso.data import (
    FormatError,
    Measure,
    PointCloud,
    format_measures,
    format_point_cloud,
    ground_distance,
    paired_distances,
    pairwise_distances,
    parse_measures,
    parse_point_cloud,
)


class TestPointCloudFile:
    def test_two_points(self):
        cloud = parse_point_cloud("2 2\n0 0\n3 4\n")
        assert (cloud.n_points, cloud.dim) == (2, 2)
        np.testing.assert_array_equal(cloud.coords, [[0, 0], [3, 4]])

    def test_single_value(self):
        cloud = parse_point_cloud("1 1\n5\n")
        np.testing.assert_array_equal(cloud.coords, [[5.0]])

    def test_bad_token_reports_line(self):
        with pytest.raises(FormatError) as exc:
            parse_point_cloud("2 2\n0 0\n3 x\n")
        assert exc.value.lineno == 3

    @pytest.mark.parametrize("text, line", [
        ("2\n0 0\n", 1),
        ("2 2\n0 0 1\n3 4\n", 2),
        ("2 2\n0 0\n", None),
        ("1 2\nnan 1\n", 2),
        ("1 2\n1 inf\n", 2),
    ])
    def test_malformed(self, text, line):
        with pytest.raises(FormatError) as exc:
            parse_point_cloud(text)
        if line is not None:
            assert exc.value.lineno == line

    def test_coords_are_read_only(self):
        cloud = parse_point_cloud("1 1\n5\n")
        with pytest.raises(ValueError):
            cloud.coords[0, 0] = 1.0


class TestMeasureFile:
    cloud = PointCloud(np.zeros((3, 1)))

    def test_point_mass(self):
        (m,) = parse_measures("1 0:1.0\n", self.cloud)
        assert m.entries == [(0, 1.0)]

    def test_two_atoms(self):
        (m,) = parse_measures("2 0:0.5 1:0.5\n", self.cloud)
        assert m.entries == [(0, 0.5), (1, 0.5)]

    def test_mass_sum_off(self):
        with pytest.raises(FormatError) as exc:
            parse_measures("1 0:1.0\n2 0:0.5 1:0.6\n", self.cloud)
        assert exc.value.lineno == 2

    @pytest.mark.parametrize("line", ["1 3:1.0", "1 0:0", "1 0:-1", "2 0:1.0", "1 0=1"])
    def test_invalid_entries(self, line):
        with pytest.raises(FormatError):
            parse_measures(line + "\n", self.cloud)

    def test_duplicate_index_rejected(self):
        with pytest.raises((FormatError, ValueError)):
            parse_measures("2 0:0.5 0:0.5\n", self.cloud)

    def test_small_deviation_renormalised(self):
        (m,) = parse_measures("2 0:0.5 1:0.5000005\n", self.cloud)
        assert abs(m.masses.sum() - 1.0) < 1e-15


class TestGroundDistance:
    def test_euclidean_345(self):
        assert ground_distance("euclidean", [0, 0], [3, 4]) == 5.0

    def test_manhattan_345(self):
        assert ground_distance("manhattan", [0, 0], [3, 4]) == 7.0

    def test_identity(self):
        x = np.array([0.3, -1.2, 7.0])
        assert ground_distance("euclidean", x, x) == 0.0

    def test_unknown_metric(self):
        with pytest.raises(ValueError):
            ground_distance("cosine", [0], [1])

    @pytest.mark.parametrize("metric", ["euclidean", "manhattan"])
    def test_batched_forms_agree(self, metric):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(20, 5))
        D = pairwise_distances(metric, X, X)
        i, j = np.triu_indices(20, 1)
        np.testing.assert_allclose(paired_distances(metric, X, i, j), D[i, j], rtol=1e-12)
        ref = [ground_distance(metric, X[a], X[b]) for a, b in zip(i, j)]
        np.testing.assert_allclose(D[i, j], ref, rtol=1e-12)
        np.testing.assert_array_equal(np.diag(D), 0.0)


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=6), elements=finite))
def test_point_cloud_round_trip(coords):
    cloud = PointCloud(coords)
    again = parse_point_cloud(format_point_cloud(cloud))
    np.testing.assert_array_equal(again.coords, cloud.coords)
    assert format_point_cloud(again) == format_point_cloud(cloud)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=8), st.integers(0, 2**32 - 1))
def test_measure_round_trip(raw, seed):
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(20, size=len(raw), replace=False))
    mass = np.array(raw) / np.sum(raw)
    m = Measure(idx, mass)
    cloud = PointCloud(np.zeros((20, 1)))
    (once,) = parse_measures(format_measures([m]), cloud)
    (twice,) = parse_measures(format_measures([once]), cloud)
    np.testing.assert_array_equal(once.indices, m.indices)
    np.testing.assert_array_equal(twice.masses, once.masses)
    np.testing.assert_allclose(once.masses, m.masses, rtol=1e-15, atol=0)
