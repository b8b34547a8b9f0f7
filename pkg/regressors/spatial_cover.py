import logging
import numpy as np
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Union
from scipy.spatial import cKDTree

from data_ingestion.models import PointCloud
from regressors.errors import DataError

logger = logging.getLogger(__name__)

# slack on kd-tree ball radii; candidates are re-filtered with exact distances
_TREE_SLACK = 1e-9


def point_distances(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Euclidean distances from every row of `points` to q.

    Every membership and containment test goes through this one formula so that
    a training point found inside a ball at build time is found inside it again
    at query time.
    """
    diff = np.atleast_2d(points) - np.asarray(q, dtype=float)
    return np.sqrt(np.sum(diff * diff, axis=1))


@dataclass(frozen=True)
class Region:
    id: int
    center_index: int
    center: np.ndarray
    radius: float
    level: int
    member_indices: np.ndarray

    @property
    def size(self) -> int:
        return len(self.member_indices)


@dataclass
class RegionCover:
    regions: List[Region]
    r_min: float
    r_max: float
    level_index: Dict[int, 'LevelIndex'] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.level_index:
            self.level_index = _build_level_index(self.regions)

    def __len__(self) -> int:
        return len(self.regions)

    @property
    def centers(self) -> np.ndarray:
        return np.array([r.center for r in self.regions])

    @property
    def radii(self) -> np.ndarray:
        return np.array([r.radius for r in self.regions])

    def regions_containing(self, q: np.ndarray) -> List[int]:
        q = np.asarray(q, dtype=float).reshape(1, -1)
        return self.regions_containing_many(q)[0]

    def regions_containing_many(self, queries: np.ndarray) -> List[List[int]]:
        """Ids of the closed balls holding each query, ascending.

        One kd-tree per radius level is queried with that level's largest
        radius; within a level radii differ by less than a factor of 2, so the
        candidate set stays tight before the exact per-ball filter.
        """
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        if not np.all(np.isfinite(queries)):
            raise DataError("Query points must be finite")
        hits: List[List[int]] = [[] for _ in range(len(queries))]
        for level in sorted(self.level_index):
            index = self.level_index[level]
            candidates = index.tree.query_ball_point(queries, index.max_radius * (1.0 + _TREE_SLACK))
            for qi, cand in enumerate(candidates):
                if not cand:
                    continue
                ids = index.region_ids[cand]
                dist = point_distances(index.centers[cand], queries[qi])
                hits[qi].extend(ids[dist <= index.radii[cand]].tolist())
        return [sorted(h) for h in hits]

    def brute_force_containing(self, q: np.ndarray) -> List[int]:
        dist = point_distances(self.centers, q)
        return np.flatnonzero(dist <= self.radii).tolist()

    def widened(self, factor: float) -> 'RegionCover':
        """Same balls with every radius scaled by factor; ids and levels are kept."""
        if factor < 1:
            raise ValueError(f"Widening factor must be at least 1, got {factor}")
        regions = [replace(r, radius=r.radius * factor) for r in self.regions]
        return RegionCover(regions=regions, r_min=self.r_min * factor, r_max=self.r_max * factor)

    def level_ratios(self) -> Dict[int, float]:
        return {level: float(idx.radii.max() / idx.radii.min()) for level, idx in self.level_index.items()}


@dataclass
class LevelIndex:
    region_ids: np.ndarray
    centers: np.ndarray
    radii: np.ndarray
    tree: cKDTree

    @property
    def max_radius(self) -> float:
        return float(self.radii.max())


def radius_level(radius: float, r_min: float) -> int:
    # floor(log2(radius / r_min)) without log rounding: x = m * 2**e, m in [0.5, 1)
    _, exponent = np.frexp(radius / r_min)
    return int(exponent) - 1


def _build_level_index(regions: List[Region]) -> Dict[int, LevelIndex]:
    by_level: Dict[int, List[Region]] = {}
    for region in regions:
        by_level.setdefault(region.level, []).append(region)

    index = {}
    for level, members in by_level.items():
        centers = np.array([r.center for r in members])
        index[level] = LevelIndex(
            region_ids=np.array([r.id for r in members], dtype=int),
            centers=centers,
            radii=np.array([r.radius for r in members]),
            tree=cKDTree(centers),
        )
    return index


class NeighborIndex:
    """Exact k-nearest-neighbor search over a fixed point set."""

    def __init__(self, points: np.ndarray):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.tree = cKDTree(self.points)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def knn(self, q: np.ndarray, k: int) -> np.ndarray:
        """Indices of the k nearest points, ordered by distance then index."""
        if k < 1:
            raise ValueError(f"k must be positive, got {k}")
        if k > self.n:
            raise DataError(f"Requested {k} neighbors but only {self.n} points available")
        q = np.asarray(q, dtype=float)

        tree_dist, _ = self.tree.query(q, k=k)
        kth = float(np.atleast_1d(tree_dist)[-1])
        cand = np.array(self.tree.query_ball_point(q, kth * (1.0 + _TREE_SLACK) + 1e-300), dtype=int)
        dist = point_distances(self.points[cand], q)
        order = np.lexsort((cand, dist))
        return cand[order[:k]]

    def smallest_positive_distance(self) -> Optional[float]:
        unique = np.unique(self.points, axis=0)
        if len(unique) < 2:
            return None
        dist, _ = cKDTree(unique).query(unique, k=2)
        return float(dist[:, 1].min())


def knn(source: Union[PointCloud, NeighborIndex, np.ndarray], q: np.ndarray, k: int) -> np.ndarray:
    if isinstance(source, NeighborIndex):
        index = source
    elif isinstance(source, PointCloud):
        index = NeighborIndex(source.points)
    else:
        index = NeighborIndex(source)
    return index.knn(q, k)


class CoverBuilder:
    def __init__(self, h: int = 100):
        if h < 1:
            raise ValueError(f"h must be at least 1, got {h}")
        self.h = h

    def build_cover(self, cloud: PointCloud) -> RegionCover:
        points = cloud.points
        n = cloud.n
        h = self.h
        if h > n:
            logger.warning(f"h={h} exceeds the {n} available points; using h={n}")
            h = n

        index = NeighborIndex(points)
        covered = np.zeros(n, dtype=bool)
        inflated_radius = None
        raw = []

        while not covered.all():
            center_index = int(np.flatnonzero(~covered)[0])
            center = points[center_index]
            neighbors = index.knn(center, h)
            radius = float(point_distances(points[neighbors[-1:]], center)[0])

            if radius == 0.0:
                if inflated_radius is None:
                    inflated_radius = index.smallest_positive_distance()
                    if inflated_radius is None:
                        raise DataError("All training points coincide; no region radius can be formed")
                logger.warning(f"Region at point {center_index} has {h} coincident points; "
                               f"radius inflated to {inflated_radius:.6g}")
                radius = inflated_radius

            members = np.flatnonzero(point_distances(points, center) <= radius)
            covered[members] = True
            raw.append((center_index, radius, members))

        radii = np.array([r for _, r, _ in raw])
        r_min, r_max = float(radii.min()), float(radii.max())
        regions = [
            Region(
                id=j,
                center_index=ci,
                center=points[ci].copy(),
                radius=r,
                level=radius_level(r, r_min),
                member_indices=members,
            )
            for j, (ci, r, members) in enumerate(raw)
        ]
        logger.info(f"Built cover of {len(regions)} regions over {n} points (h={h}, "
                    f"radii {r_min:.4g}..{r_max:.4g})")
        return RegionCover(regions=regions, r_min=r_min, r_max=r_max)


def build_cover(cloud: PointCloud, h: int) -> RegionCover:
    return CoverBuilder(h).build_cover(cloud)
