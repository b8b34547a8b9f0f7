import numpy as np
from dataclasses import dataclass
from scipy.spatial.distance import pdist, cdist

from regressors.errors import DataError

PAIRWISE_SAMPLE_LIMIT = 2000
PAIRWISE_SAMPLE_SEED = 12345


@dataclass(frozen=True)
class GaussianKernel:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"Gaussian bandwidth must be positive, got {self.sigma}")

    def __call__(self, x, p) -> np.ndarray:
        return gaussian(x, p, self.sigma)

    def matrix(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return gaussian_matrix(X, Y, self.sigma)


@dataclass(frozen=True)
class WendlandWeight:
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"Wendland support radius must be positive, got {self.radius}")

    def __call__(self, v) -> np.ndarray:
        return wendland(v, self.radius)

    def derivative(self, v) -> np.ndarray:
        return wendland_deriv(v, self.radius)


def gaussian(x, p, sigma: float):
    """exp(-|x - p|^2 / sigma^2); broadcasts over leading axes."""
    diff = np.asarray(x, dtype=float) - np.asarray(p, dtype=float)
    sq = np.sum(diff * diff, axis=-1)
    return np.exp(-sq / sigma ** 2)


def gaussian_grad_q(x, q, sigma: float):
    """Gradient of gaussian(x, q, sigma) with respect to q."""
    x = np.asarray(x, dtype=float)
    q = np.asarray(q, dtype=float)
    k = gaussian(x, q, sigma)
    return np.expand_dims(k, -1) * 2.0 * (x - q) / sigma ** 2


def gaussian_matrix(X: np.ndarray, Y: np.ndarray, sigma: float) -> np.ndarray:
    sq = cdist(np.atleast_2d(X), np.atleast_2d(Y), metric='sqeuclidean')
    return np.exp(-sq / sigma ** 2)


def wendland(v, r: float):
    """C2 Wendland weight (1 - v/r)^4 (1 + 4 v/r) on [0, r), exactly 0 beyond."""
    t = np.asarray(v, dtype=float) / r
    inside = t < 1.0
    s = np.where(inside, 1.0 - t, 0.0)
    out = np.where(inside, s ** 4 * (1.0 + 4.0 * t), 0.0)
    return out if out.ndim else float(out)


def wendland_deriv(v, r: float):
    t = np.asarray(v, dtype=float) / r
    inside = t < 1.0
    s = np.where(inside, 1.0 - t, 0.0)
    out = np.where(inside, -(20.0 / r) * t * s ** 3, 0.0)
    return out if out.ndim else float(out)


def mean_pairwise_distance(points: np.ndarray) -> float:
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    m = points.shape[0]
    if m < 2:
        raise DataError(f"Mean pairwise distance needs at least 2 points, got {m}")

    if m <= PAIRWISE_SAMPLE_LIMIT:
        b = float(np.mean(pdist(points)))
    else:
        # unbiased estimate over sampled ordered pairs with distinct endpoints
        rng = np.random.default_rng(PAIRWISE_SAMPLE_SEED)
        n_pairs = PAIRWISE_SAMPLE_LIMIT ** 2
        i = rng.integers(0, m, size=n_pairs)
        j = rng.integers(0, m - 1, size=n_pairs)
        j = j + (j >= i)
        diff = points[i] - points[j]
        b = float(np.mean(np.sqrt(np.sum(diff * diff, axis=1))))

    if b <= 0.0:
        raise DataError("All points coincide; mean pairwise distance is zero")
    return b
