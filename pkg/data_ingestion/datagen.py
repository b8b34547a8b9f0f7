import numpy as np
from typing import Optional, Sequence, Tuple
from scipy.special import expit
from scipy.spatial.transform import Rotation

from data_ingestion.models import Dataset, PointCloud
from regressors.errors import DataError

SYNTH2D_LOW = -6.0
SYNTH2D_HIGH = 30.0
SYNTH2D_GRID_SPACING = 0.2

BELL_RADIUS = 0.5
UNIT_TOLERANCE = 1e-9
DEFAULT_BELL_CENTERS_LONLAT = ((5 * np.pi / 6, 0.0), (7 * np.pi / 6, 0.0))


def synth2d(x1, x2) -> Tuple[np.ndarray, np.ndarray]:
    """Two-scale test surface y = z1(x1) * (sin x2 + cos x1) and its gradient.

    z1 is a product of three logistic steps, so the response grows in
    plateaus from left to right while z2 oscillates.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    s0, s12, s24 = expit(x1), expit(x1 - 12.0), expit(x1 - 24.0)
    a, b, c = s0, 1.0 + 9.0 * s12, 1.0 + 10.0 * s24
    z1 = a * b * c
    z2 = np.sin(x2) + np.cos(x1)

    da = s0 * (1.0 - s0)
    db = 9.0 * s12 * (1.0 - s12)
    dc = 10.0 * s24 * (1.0 - s24)
    dz1 = da * b * c + a * db * c + a * b * dc

    y = z1 * z2
    grad = np.stack([dz1 * z2 - z1 * np.sin(x1), z1 * np.cos(x2)], axis=-1)
    return y, grad


def synth2d_grid(spacing: float = SYNTH2D_GRID_SPACING) -> np.ndarray:
    n_axis = int(round((SYNTH2D_HIGH - SYNTH2D_LOW) / spacing)) + 1
    axis = np.linspace(SYNTH2D_LOW, SYNTH2D_HIGH, n_axis)
    g1, g2 = np.meshgrid(axis, axis, indexing='ij')
    return np.column_stack([g1.ravel(), g2.ravel()])


def gen2d(n_train: int, seed: int, noise_std: float = 0.0,
          spacing: float = SYNTH2D_GRID_SPACING) -> Tuple[Dataset, Dataset]:
    """Uniform random training set and the noiseless grid test set."""
    if n_train < 1:
        raise DataError(f"n_train must be at least 1, got {n_train}")
    rng = np.random.default_rng(seed)
    X = rng.uniform(SYNTH2D_LOW, SYNTH2D_HIGH, size=(n_train, 2))
    y, grad = synth2d(X[:, 0], X[:, 1])
    if noise_std > 0:
        y = y + rng.normal(0.0, noise_std, size=n_train)
    train = Dataset(PointCloud(X, y), grad, name='synth2d-train')

    G = synth2d_grid(spacing)
    gy, ggrad = synth2d(G[:, 0], G[:, 1])
    test = Dataset(PointCloud(G, gy), ggrad, name='synth2d-grid')
    return train, test


def gen1d_section(n: int, seed: int, noise_std: float = 0.0) -> Dataset:
    """synth2d restricted to x2 = 0, sampled uniformly along x1."""
    if n < 1:
        raise DataError(f"n must be at least 1, got {n}")
    rng = np.random.default_rng(seed)
    x1 = rng.uniform(SYNTH2D_LOW, SYNTH2D_HIGH, size=n)
    y, grad = synth2d(x1, np.zeros(n))
    if noise_std > 0:
        y = y + rng.normal(0.0, noise_std, size=n)
    return Dataset(PointCloud(x1[:, None], y), grad[:, :1], name='synth1d')


def lonlat_to_cartesian(lon: float, lat: float) -> np.ndarray:
    return np.array([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)])


def default_bell_centers() -> Tuple[np.ndarray, np.ndarray]:
    p1, p2 = (lonlat_to_cartesian(lon, lat) for lon, lat in DEFAULT_BELL_CENTERS_LONLAT)
    return p1, p2


def _check_unit(x: np.ndarray):
    norms = np.linalg.norm(np.atleast_2d(x), axis=1)
    if np.any(np.abs(norms - 1.0) > UNIT_TOLERANCE):
        raise DataError(f"Cosine bells need unit vectors; found norm {norms[np.argmax(np.abs(norms - 1.0))]:.12g}")


def _bell(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    theta = np.arccos(np.clip(np.atleast_2d(x) @ p, -1.0, 1.0))
    return np.where(theta < BELL_RADIUS, 0.5 * (1.0 + np.cos(2.0 * np.pi * theta)), 0.0)


def _bell_gradient(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    # d/dx of 0.5 (1 + cos(2 pi arccos(x.p))) = pi sin(2 pi theta) / sin(theta) * p
    theta = np.arccos(np.clip(np.atleast_2d(x) @ p, -1.0, 1.0))
    sin_theta = np.sin(theta)
    small = sin_theta < 1e-12
    ratio = np.full_like(theta, 2.0 * np.pi)
    ratio[~small] = np.sin(2.0 * np.pi * theta[~small]) / sin_theta[~small]
    factor = np.where(theta < BELL_RADIUS, np.pi * ratio, 0.0)
    return factor[:, None] * p[None, :]


def cosine_bells(x: np.ndarray, p1: Optional[np.ndarray] = None, p2: Optional[np.ndarray] = None):
    """0.1 + 0.9 (q1 + q2) for two C1 cosine bells of angular radius 1/2."""
    if p1 is None or p2 is None:
        p1, p2 = default_bell_centers()
    x = np.asarray(x, dtype=float)
    _check_unit(x)
    values = 0.1 + 0.9 * (_bell(x, p1) + _bell(x, p2))
    return float(values[0]) if x.ndim == 1 else values


def cosine_bells_gradient(x: np.ndarray, p1: Optional[np.ndarray] = None,
                          p2: Optional[np.ndarray] = None) -> np.ndarray:
    """Ambient (R^3) gradient of cosine_bells."""
    if p1 is None or p2 is None:
        p1, p2 = default_bell_centers()
    x = np.asarray(x, dtype=float)
    _check_unit(x)
    grads = 0.9 * (_bell_gradient(x, p1) + _bell_gradient(x, p2))
    return grads[0] if x.ndim == 1 else grads


def surface_gradient(x: np.ndarray, ambient: np.ndarray) -> np.ndarray:
    """Project ambient gradients onto the sphere's tangent planes: (I - x x^T) g."""
    x = np.atleast_2d(x)
    g = np.atleast_2d(ambient)
    return g - np.sum(x * g, axis=1)[:, None] * x


def sphere_points(n: int, seed: int = 0) -> np.ndarray:
    """Fibonacci lattice on the unit sphere under a seeded random rotation."""
    if n < 1:
        raise DataError(f"n must be at least 1, got {n}")
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    golden_angle = np.pi * (3.0 - np.sqrt(5.0))
    phi = golden_angle * np.arange(n)
    rho = np.sqrt(1.0 - z * z)
    points = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    points = Rotation.random(random_state=seed).apply(points)
    return points / np.linalg.norm(points, axis=1)[:, None]


def keep_probability(points: np.ndarray, c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(points)
    d1 = np.linalg.norm(points - c1, axis=1)
    d2 = np.linalg.norm(points - c2, axis=1)
    return 1.0 - (d1 / d1.max()) * (d2 / d2.max())


def density_sample(points: np.ndarray, c1: np.ndarray, c2: np.ndarray, seed: int) -> np.ndarray:
    """Indices kept by two independent Bernoulli trials, one per center.

    Trial j keeps x with probability 1 - |x - c_j| / r_j where r_j is the
    distance from c_j to the farthest point; x is kept if either trial keeps it.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] < 1:
        raise DataError("density_sample needs at least one point")
    rng = np.random.default_rng(seed)
    d1 = np.linalg.norm(points - c1, axis=1)
    d2 = np.linalg.norm(points - c2, axis=1)
    r1, r2 = d1.max(), d2.max()
    p1 = 1.0 - d1 / r1 if r1 > 0 else np.ones_like(d1)
    p2 = 1.0 - d2 / r2 if r2 > 0 else np.ones_like(d2)
    first = rng.random(points.shape[0]) < p1
    second = rng.random(points.shape[0]) < p2
    return np.flatnonzero(first | second)


def gen_sphere(n: int, seed: int, density_biased: bool = False,
               centers: Optional[Sequence[np.ndarray]] = None) -> Tuple[Dataset, Dataset]:
    """Shifted cosine-bells field max(q) - q on sphere nodes, split into train/test.

    With density_biased the training set is the density sample and the test
    set is its complement; otherwise a seeded 80/20 split is used.
    """
    p1, p2 = centers if centers is not None else default_bell_centers()
    nodes = sphere_points(n, seed)
    q = cosine_bells(nodes, p1, p2)
    shifted = q.max() - q
    grad = -cosine_bells_gradient(nodes, p1, p2)

    if density_biased:
        train_idx = density_sample(nodes, p1, p2, seed)
    else:
        rng = np.random.default_rng(seed)
        train_idx = np.sort(rng.choice(n, size=max(1, int(round(0.8 * n))), replace=False))
    test_mask = np.ones(n, dtype=bool)
    test_mask[train_idx] = False
    test_idx = np.flatnonzero(test_mask)
    if test_idx.size == 0:
        raise DataError("Sphere split left no test points")

    train = Dataset(PointCloud(nodes[train_idx], shifted[train_idx]), grad[train_idx], name='sphere-train')
    test = Dataset(PointCloud(nodes[test_idx], shifted[test_idx]), grad[test_idx], name='sphere-test')
    return train, test
