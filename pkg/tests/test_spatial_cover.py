import numpy as np
import pytest

from data_ingestion.models import PointCloud
from regressors.errors import DataError
from regressors.spatial_cover import (CoverBuilder, NeighborIndex, build_cover, knn, point_distances,
                                      radius_level)


def line_cloud(xs):
    xs = np.asarray(xs, dtype=float)
    return PointCloud(xs[:, None], np.zeros(len(xs)))


@pytest.fixture
def random_cloud():
    X = np.random.default_rng(11).uniform(-1.0, 1.0, size=(500, 2))
    return PointCloud(X, np.zeros(500))


class TestKnn:
    def test_nearest_neighbors(self):
        cloud = line_cloud([0.0, 1.0, 2.0])
        np.testing.assert_array_equal(knn(cloud, np.array([0.1]), 2), [0, 1])

    def test_ties_broken_by_index(self):
        cloud = line_cloud([0.0, 1.0, 2.0])
        np.testing.assert_array_equal(knn(cloud, np.array([1.0]), 3), [1, 0, 2])

    def test_accepts_arrays_and_indexes(self):
        points = np.array([[0.0], [1.0], [2.0]])
        index = NeighborIndex(points)
        np.testing.assert_array_equal(knn(index, np.array([1.9]), 1), [2])
        np.testing.assert_array_equal(knn(points, np.array([1.9]), 1), [2])

    def test_too_many_neighbors(self):
        with pytest.raises(DataError):
            knn(line_cloud([0.0, 1.0]), np.array([0.0]), 3)

    def test_matches_sorted_distances(self, random_cloud, rng):
        index = NeighborIndex(random_cloud.points)
        for q in rng.uniform(-1.0, 1.0, size=(20, 2)):
            dist = point_distances(random_cloud.points, q)
            expected = np.lexsort((np.arange(len(dist)), dist))[:15]
            np.testing.assert_array_equal(index.knn(q, 15), expected)


class TestBuildCover:
    def test_four_points_two_per_region(self):
        cover = build_cover(line_cloud([0.0, 1.0, 2.0, 3.0]), 2)
        assert len(cover) == 2
        first, second = cover.regions
        assert (first.center_index, first.radius) == (0, 1.0)
        np.testing.assert_array_equal(first.member_indices, [0, 1])
        # closed ball of radius 1 around x=2 also holds x=1
        assert (second.center_index, second.radius) == (2, 1.0)
        np.testing.assert_array_equal(second.member_indices, [1, 2, 3])

    def test_h_equal_to_n_gives_single_region(self):
        cover = build_cover(line_cloud([0.0, 1.0, 2.0, 3.0]), 4)
        assert len(cover) == 1
        assert cover.regions[0].radius == 3.0
        np.testing.assert_array_equal(cover.regions[0].member_indices, [0, 1, 2, 3])

    def test_two_clusters(self):
        cover = build_cover(line_cloud([0.0, 0.1, 10.0, 10.1, 10.2]), 3)
        assert len(cover) == 2
        first, second = cover.regions
        assert first.radius == 10.0
        np.testing.assert_array_equal(first.member_indices, [0, 1, 2])
        assert second.center_index == 3
        assert {3, 4} <= set(second.member_indices.tolist())

    def test_h_larger_than_n_degrades(self):
        cover = build_cover(line_cloud([0.0, 1.0, 5.0]), 100)
        assert len(cover) == 1
        assert cover.regions[0].size == 3

    def test_h_must_be_positive(self):
        with pytest.raises(ValueError):
            CoverBuilder(0)

    def test_every_point_covered(self, random_cloud):
        cover = build_cover(random_cloud, 20)
        covered = np.zeros(random_cloud.n, dtype=bool)
        for region in cover.regions:
            covered[region.member_indices] = True
        assert covered.all()

    def test_members_are_exactly_the_points_in_the_ball(self, random_cloud):
        cover = build_cover(random_cloud, 20)
        for region in cover.regions:
            assert region.size >= 20
            inside = np.flatnonzero(point_distances(random_cloud.points, region.center) <= region.radius)
            np.testing.assert_array_equal(region.member_indices, inside)
            assert region.radius > 0

    def test_deterministic(self, random_cloud):
        first = build_cover(random_cloud, 20)
        second = build_cover(random_cloud, 20)
        assert len(first) == len(second)
        for a, b in zip(first.regions, second.regions):
            assert (a.center_index, a.radius, a.level) == (b.center_index, b.radius, b.level)
            np.testing.assert_array_equal(a.member_indices, b.member_indices)

    def test_radius_levels_stay_within_factor_two(self, random_cloud):
        cover = build_cover(random_cloud, 20)
        for ratio in cover.level_ratios().values():
            assert ratio < 2.0
        for region in cover.regions:
            assert 2 ** region.level * cover.r_min <= region.radius < 2 ** (region.level + 1) * cover.r_min

    def test_radius_level_boundaries(self):
        assert radius_level(1.0, 1.0) == 0
        assert radius_level(1.999, 1.0) == 0
        assert radius_level(2.0, 1.0) == 1
        assert radius_level(7.9, 1.0) == 2

    def test_coincident_points_inflate_radius(self):
        cloud = line_cloud([0.0, 0.0, 0.0, 1.0, 3.0])
        cover = build_cover(cloud, 3)
        assert cover.regions[0].radius == 1.0
        np.testing.assert_array_equal(cover.regions[0].member_indices, [0, 1, 2, 3])

    def test_all_coincident_points(self):
        with pytest.raises(DataError):
            build_cover(line_cloud([2.0, 2.0, 2.0]), 2)


class TestRegionsContaining:
    def test_examples(self):
        cover = build_cover(line_cloud([0.0, 1.0, 2.0, 3.0]), 2)
        assert cover.regions_containing(np.array([0.5])) == [0]
        assert cover.regions_containing(np.array([1.0])) == [0, 1]
        assert cover.regions_containing(np.array([100.0])) == []

    def test_matches_brute_force(self, random_cloud):
        cover = build_cover(random_cloud, 20)
        queries = np.random.default_rng(2).uniform(-1.2, 1.2, size=(10000, 2))
        found = cover.regions_containing_many(queries)
        for q, ids in zip(queries, found):
            assert ids == cover.brute_force_containing(q)

    def test_training_points_found_in_their_regions(self, random_cloud):
        cover = build_cover(random_cloud, 20)
        found = cover.regions_containing_many(random_cloud.points)
        for region in cover.regions:
            for i in region.member_indices:
                assert region.id in found[i]

    def test_rejects_non_finite_queries(self, random_cloud):
        cover = build_cover(random_cloud, 50)
        with pytest.raises(DataError):
            cover.regions_containing(np.array([np.nan, 0.0]))


class TestWidenedCover:
    def test_widened_balls_hold_every_original_hit(self, random_cloud):
        cover = build_cover(random_cloud, 20)
        widened = cover.widened(1.25)
        queries = np.random.default_rng(4).uniform(-1.2, 1.2, size=(2000, 2))
        for q, inner, outer in zip(queries, cover.regions_containing_many(queries),
                                   widened.regions_containing_many(queries)):
            assert set(inner) <= set(outer)
            assert outer == widened.brute_force_containing(q)

    def test_scales_radii_only(self, random_cloud):
        cover = build_cover(random_cloud, 20)
        widened = cover.widened(2.0)
        np.testing.assert_array_equal(widened.radii, 2.0 * cover.radii)
        np.testing.assert_array_equal(widened.centers, cover.centers)
        assert widened.r_min == 2.0 * cover.r_min
        assert widened.level_ratios() == cover.level_ratios()

    def test_shrinking_rejected(self, random_cloud):
        with pytest.raises(ValueError):
            build_cover(random_cloud, 20).widened(0.9)
