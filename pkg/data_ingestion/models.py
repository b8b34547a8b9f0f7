import hashlib
import numpy as np
from dataclasses import dataclass
from typing import Optional

from regressors.errors import DataError


@dataclass
class PointCloud:
    points: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        responses = np.asarray(self.responses, dtype=float).ravel()

        if points.ndim != 2 or points.shape[0] == 0 or points.shape[1] == 0:
            raise DataError(f"Point cloud needs an n x d matrix with n, d >= 1, got shape {points.shape}")
        if responses.shape[0] != points.shape[0]:
            raise DataError(f"{points.shape[0]} points but {responses.shape[0]} responses")
        if not np.all(np.isfinite(points)):
            raise DataError("Point coordinates must be finite")
        if not np.all(np.isfinite(responses)):
            raise DataError("Responses must be finite")

        self.points = points
        self.responses = responses

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def subset(self, indices) -> 'PointCloud':
        indices = np.asarray(indices, dtype=int)
        return PointCloud(self.points[indices], self.responses[indices])

    def with_responses(self, responses: np.ndarray) -> 'PointCloud':
        return PointCloud(self.points, responses)

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.points).tobytes())
        digest.update(np.ascontiguousarray(self.responses).tobytes())
        return digest.hexdigest()


@dataclass
class Dataset:
    cloud: PointCloud
    gradients: Optional[np.ndarray] = None
    name: str = ''

    def __post_init__(self):
        if self.gradients is not None:
            self.gradients = np.asarray(self.gradients, dtype=float)
            if self.gradients.shape != self.cloud.points.shape:
                raise DataError(f"Gradient matrix shape {self.gradients.shape} does not match "
                                f"points {self.cloud.points.shape}")

    @property
    def has_gradients(self) -> bool:
        return self.gradients is not None
