import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from data_ingestion.models import PointCloud  # noqa: E402
from regressors.fit_config import FitConfig  # noqa: E402


def smooth_surface(X: np.ndarray) -> np.ndarray:
    return np.sin(3.0 * X[:, 0]) * np.cos(2.0 * X[:, 1]) + X[:, 0]


def quadratic(X: np.ndarray) -> np.ndarray:
    return X[:, 0] ** 2 + 2.0


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def smooth_cloud():
    X = np.random.default_rng(3).uniform(0.0, 1.0, size=(300, 2))
    return PointCloud(X, smooth_surface(X))


@pytest.fixture
def quadratic_cloud():
    X = np.random.default_rng(5).uniform(0.0, 1.0, size=(150, 2))
    return PointCloud(X, quadratic(X))


@pytest.fixture
def small_config():
    return FitConfig(h=25)
