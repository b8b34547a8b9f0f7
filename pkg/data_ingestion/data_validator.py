from typing import List, Tuple
import numpy as np
from data_ingestion.models import PointCloud


class DataValidator:
    def __init__(self, h: int = 100):
        self.h = h

    def validate_cloud(self, cloud: PointCloud) -> Tuple[bool, List[str]]:
        errors = []
        warnings = []

        if cloud.n < 2:
            errors.append(f"Point cloud has {cloud.n} point(s); at least 2 are needed to set a bandwidth")

        if cloud.n < self.h:
            warnings.append(f"Only {cloud.n} points for h={self.h}; the cover degrades to a single region")

        unique = np.unique(cloud.points, axis=0)
        if len(unique) < cloud.n:
            warnings.append(f"{cloud.n - len(unique)} duplicate point(s) found (kept)")
        if len(unique) == 1 and cloud.n > 1:
            errors.append("All points coincide")

        spread = np.ptp(cloud.points, axis=0)
        flat = np.flatnonzero(spread == 0)
        if flat.size and len(unique) > 1:
            warnings.append(f"Coordinate(s) {', '.join(str(i + 1) for i in flat)} are constant; "
                            f"polynomial terms will be rank-deficient")

        if np.all(cloud.responses == cloud.responses[0]):
            warnings.append("All responses are equal")

        return len(errors) == 0, errors + warnings

    def validate_queries(self, queries: np.ndarray, d: int) -> Tuple[bool, List[str]]:
        errors = []
        if queries.ndim != 2 or queries.shape[1] != d:
            errors.append(f"Dimension mismatch: expected d={d}, got d={queries.shape[-1]}")
        elif not np.all(np.isfinite(queries)):
            errors.append("Query points must be finite")
        return len(errors) == 0, errors
