import math

import numpy as np
import pytest

from data_ingestion.datagen import (cosine_bells, cosine_bells_gradient, default_bell_centers, density_sample,
                                    gen1d_section, gen2d, gen_sphere, keep_probability, lonlat_to_cartesian,
                                    sphere_points, surface_gradient, synth2d, synth2d_grid)
from regressors.errors import DataError


def great_circle(p: np.ndarray, theta: float) -> np.ndarray:
    """Point at angle theta from p, moving toward the north pole."""
    north = np.array([0.0, 0.0, 1.0])
    return math.cos(theta) * p + math.sin(theta) * north


class TestSynth2d:
    def test_origin(self):
        expected = 0.5 * (1 + 9 / (1 + math.exp(12))) * (1 + 10 / (1 + math.exp(24)))
        y, _ = synth2d(0.0, 0.0)
        assert float(y) == pytest.approx(expected, rel=1e-14)
        assert float(y) == pytest.approx(0.500028, abs=1e-6)

    def test_zero_of_second_factor(self):
        y, _ = synth2d(0.0, -math.pi / 2)
        assert abs(float(y)) <= 1e-15

    def test_gradient_matches_finite_differences(self, rng):
        X = rng.uniform(-6.0, 30.0, size=(100, 2))
        _, grad = synth2d(X[:, 0], X[:, 1])
        step = 1e-6
        fd1 = (synth2d(X[:, 0] + step, X[:, 1])[0] - synth2d(X[:, 0] - step, X[:, 1])[0]) / (2 * step)
        fd2 = (synth2d(X[:, 0], X[:, 1] + step)[0] - synth2d(X[:, 0], X[:, 1] - step)[0]) / (2 * step)
        np.testing.assert_allclose(grad, np.column_stack([fd1, fd2]), rtol=1e-6, atol=1e-6)

    def test_grid(self):
        grid = synth2d_grid()
        assert grid.shape == (181 * 181, 2)
        assert grid.min() == -6.0 and grid.max() == 30.0

    def test_gen2d(self):
        train, test = gen2d(50, seed=4)
        assert train.cloud.n == 50 and train.cloud.d == 2
        assert test.cloud.n == 32761
        assert train.has_gradients and test.has_gradients
        assert np.all((train.cloud.points >= -6.0) & (train.cloud.points <= 30.0))

    def test_gen2d_seeded(self):
        first, _ = gen2d(20, seed=1, spacing=3.0)
        second, _ = gen2d(20, seed=1, spacing=3.0)
        third, _ = gen2d(20, seed=2, spacing=3.0)
        np.testing.assert_array_equal(first.cloud.points, second.cloud.points)
        assert not np.array_equal(first.cloud.points, third.cloud.points)

    def test_gen2d_noise(self):
        clean, _ = gen2d(200, seed=0, spacing=3.0)
        noisy, _ = gen2d(200, seed=0, noise_std=0.1, spacing=3.0)
        np.testing.assert_array_equal(clean.cloud.points, noisy.cloud.points)
        assert 0.05 < np.std(noisy.cloud.responses - clean.cloud.responses) < 0.2

    def test_gen2d_needs_points(self):
        with pytest.raises(DataError):
            gen2d(0, seed=0)

    def test_one_dimensional_section(self):
        data = gen1d_section(30, seed=0)
        assert data.cloud.d == 1
        expected, _ = synth2d(data.cloud.points[:, 0], np.zeros(30))
        np.testing.assert_array_equal(data.cloud.responses, expected)


class TestCosineBells:
    def test_values(self):
        p1, _ = default_bell_centers()
        assert cosine_bells(p1) == pytest.approx(1.0, abs=1e-12)
        assert cosine_bells(np.array([0.0, 0.0, 1.0])) == pytest.approx(0.1, abs=1e-15)
        assert cosine_bells(great_circle(p1, 0.25)) == pytest.approx(0.55, abs=1e-12)

    def test_range(self):
        values = cosine_bells(sphere_points(2000, seed=0))
        assert values.min() >= 0.1 - 1e-15 and values.max() <= 1.9 + 1e-12

    def test_rejects_non_unit_points(self):
        with pytest.raises(DataError):
            cosine_bells(np.array([1.0, 1.0, 0.0]))

    def test_smooth_across_bell_edge(self):
        p1, _ = default_bell_centers()
        delta = 1e-6
        at_edge = cosine_bells(great_circle(p1, 0.5))
        inside = (at_edge - cosine_bells(great_circle(p1, 0.5 - delta))) / delta
        outside = (cosine_bells(great_circle(p1, 0.5 + delta)) - at_edge) / delta
        assert abs(inside) < 1e-4 and abs(outside) < 1e-4

    def test_tangential_gradient(self):
        p1, _ = default_bell_centers()
        north = np.array([0.0, 0.0, 1.0])
        step = 1e-6
        for theta in np.linspace(0.05, 0.45, 9):
            x = great_circle(p1, theta)
            tangent = -math.sin(theta) * p1 + math.cos(theta) * north
            fd = (cosine_bells(great_circle(p1, theta + step)) - cosine_bells(great_circle(p1, theta - step))) / (2 * step)
            g = surface_gradient(x, cosine_bells_gradient(x))[0]
            assert g @ tangent == pytest.approx(fd, rel=1e-6, abs=1e-8)
            assert abs(g @ x) < 1e-12

    def test_lonlat(self):
        np.testing.assert_allclose(lonlat_to_cartesian(0.0, 0.0), [1.0, 0.0, 0.0])
        np.testing.assert_allclose(lonlat_to_cartesian(0.0, math.pi / 2), [0.0, 0.0, 1.0], atol=1e-16)


class TestSphereSampling:
    def test_points_on_sphere(self):
        points = sphere_points(500, seed=3)
        np.testing.assert_allclose(np.linalg.norm(points, axis=1), 1.0, atol=1e-12)
        np.testing.assert_array_equal(points, sphere_points(500, seed=3))

    def test_keep_probability(self):
        c = np.zeros(3)
        points = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        np.testing.assert_allclose(keep_probability(points, c, c), [1.0, 0.75, 0.0])

    def test_farthest_point_never_kept(self):
        c1, c2 = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
        points = np.array([c1, c2, [-1.0, -1.0, 0.0]])
        np.testing.assert_allclose(keep_probability(points, c1, c2), [1.0, 1.0, 0.0])
        for seed in range(20):
            assert 2 not in density_sample(points, c1, c2, seed)

    def test_empirical_keep_rate(self):
        # both trials keep with probability 1/2 at the midpoint, so the union keeps 3/4
        c = np.zeros(3)
        n = 100_000
        points = np.vstack([[[2.0, 0.0, 0.0]], np.tile([1.0, 0.0, 0.0], (n, 1))])
        kept = density_sample(points, c, c, seed=9)
        rate = np.sum(kept > 0) / n
        assert abs(rate - 0.75) <= 3 * math.sqrt(0.75 * 0.25 / n)

    def test_gen_sphere_split(self):
        train, test = gen_sphere(1000, seed=2, density_biased=True)
        assert train.cloud.n + test.cloud.n == 1000
        assert train.cloud.d == 3
        assert np.all(train.cloud.responses >= 0.0)
        all_points = np.vstack([train.cloud.points, test.cloud.points])
        assert len(np.unique(all_points, axis=0)) == 1000

    def test_gen_sphere_uniform_split(self):
        train, test = gen_sphere(500, seed=0)
        assert (train.cloud.n, test.cloud.n) == (400, 100)
        np.testing.assert_allclose(train.gradients, -cosine_bells_gradient(train.cloud.points))
