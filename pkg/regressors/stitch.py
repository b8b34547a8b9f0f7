import logging
import numpy as np
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional, Tuple

from data_ingestion.models import PointCloud
from regressors.errors import DataError, NumericalError
from regressors.fit_config import FitConfig
from regressors.kernel_funcs import mean_pairwise_distance, wendland, wendland_deriv
from regressors.local_fit import LocalFitter, LocalModel, ModelKind
from regressors.spatial_cover import CoverBuilder, Region, RegionCover, point_distances

logger = logging.getLogger(__name__)

# below this fraction of the radius the weight gradient takes its limit value 0
CENTER_CUTOFF = 1e-12


@dataclass
class PUWeights:
    region_ids: List[int]
    raw_weights: np.ndarray
    normalized_weights: np.ndarray
    total: float
    w0: float
    raw_gradients: np.ndarray
    normalized_gradients: np.ndarray
    total_gradient: np.ndarray

    @property
    def fallback_weight(self) -> float:
        return self.w0 / self.total

    @property
    def fallback_gradient(self) -> np.ndarray:
        # w0 is constant, so only the normalization moves it
        return -self.w0 * self.total_gradient / self.total ** 2

    @property
    def weight_sum(self) -> float:
        return float(self.normalized_weights.sum() + self.fallback_weight)


@dataclass
class StitchedModel:
    cover: RegionCover
    local_models: List[LocalModel]
    fallback: LocalModel
    w0: float
    dimension: int
    config: FitConfig

    def __post_init__(self):
        if len(self.local_models) != len(self.cover):
            raise ValueError(f"{len(self.cover)} regions but {len(self.local_models)} local models")

    def pu_weights(self, q: np.ndarray) -> PUWeights:
        q = self._check_queries(q)[0]
        ids = self.cover.regions_containing(q)
        raw = np.zeros(len(ids))
        raw_grad = np.zeros((len(ids), self.dimension))
        for k, j in enumerate(ids):
            region = self.cover.regions[j]
            w, dw = region_weight(region, q[None, :])
            raw[k], raw_grad[k] = w[0], dw[0]

        total = self.w0 + raw.sum()
        total_grad = raw_grad.sum(axis=0)
        normalized = raw / total
        normalized_grad = (raw_grad * total - raw[:, None] * total_grad[None, :]) / total ** 2
        return PUWeights(ids, raw, normalized, float(total), self.w0, raw_grad, normalized_grad, total_grad)

    def predict(self, q: np.ndarray) -> float:
        return float(self.predict_many(np.asarray(q, dtype=float).reshape(1, -1))[0])

    def gradient(self, q: np.ndarray) -> np.ndarray:
        return self.gradient_many(np.asarray(q, dtype=float).reshape(1, -1))[0]

    def predict_many(self, queries: np.ndarray) -> np.ndarray:
        values, _ = self._evaluate(queries, with_gradient=False)
        return values

    def gradient_many(self, queries: np.ndarray) -> np.ndarray:
        _, grads = self._evaluate(queries, with_gradient=True)
        return grads

    @cached_property
    def widened_cover(self) -> Optional[RegionCover]:
        widening = self.config.fallback_widening
        return self.cover.widened(widening) if widening > 0 else None

    def _evaluate(self, queries: np.ndarray, with_gradient: bool) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """Accumulate the weighted sums of every active region, region by region.

        With N = w0 f0 + sum w_j f_j and W = w0 + sum w_j the prediction is N/W and
        its gradient is (sum dw_j f_j + sum w_j df_j + w0 df0 - (N/W) sum dw_j) / W,
        which is the quotient rule applied to the normalized weights.

        The B0 model f0 is built the same way: the local models blended with
        weights on the widened balls over the global polynomial at weight w0.
        Near a ball rim, where W is close to w0, f0 is then still a blend of the
        neighboring local models, and only queries outside every widened ball
        fall through to the polynomial.
        """
        queries = self._check_queries(queries)
        f0 = self.fallback.evaluate(queries)
        df0 = self.fallback.gradient(queries) if with_gradient else None

        # a query inside a ball is also inside its widened ball; one pass of local evaluations serves both sums
        widened = self.widened_cover
        terms = self._region_terms(widened if widened is not None else self.cover, queries, with_gradient)
        if widened is not None:
            blend = _WeightedSum(self.w0, f0, df0)
            for j, rows, f, df in terms:
                blend.add(rows, *region_weight(widened.regions[j], queries[rows]), f, df)
            f0, df0 = blend.values, blend.gradients

        total = _WeightedSum(self.w0, f0, df0)
        for j, rows, f, df in terms:
            total.add(rows, *region_weight(self.cover.regions[j], queries[rows]), f, df)
        return total.values, total.gradients

    def _region_terms(self, cover: RegionCover, queries: np.ndarray, with_gradient: bool) -> List[tuple]:
        """(region id, query rows, local values, local gradients) per ball holding any query."""
        grouped: Dict[int, List[int]] = {}
        for qi, ids in enumerate(cover.regions_containing_many(queries)):
            for j in ids:
                grouped.setdefault(j, []).append(qi)
        terms = []
        for j in sorted(grouped):
            rows = np.array(grouped[j], dtype=int)
            model = self.local_models[j]
            sub = queries[rows]
            terms.append((j, rows, model.evaluate(sub), model.gradient(sub) if with_gradient else None))
        return terms

    def _check_queries(self, queries: np.ndarray) -> np.ndarray:
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        if queries.shape[1] != self.dimension:
            raise DataError(f"Query dimension mismatch: model expects d={self.dimension}, got d={queries.shape[1]}")
        if not np.all(np.isfinite(queries)):
            raise DataError("Query points must be finite")
        return queries


class _WeightedSum:
    """Running N = w0 f0 + sum w_j f_j and W = w0 + sum w_j, with their gradients."""

    def __init__(self, w0: float, base_values: np.ndarray, base_gradients: Optional[np.ndarray]):
        self.numerator = w0 * base_values
        self.total = np.full(base_values.shape[0], w0)
        self.with_gradient = base_gradients is not None
        if self.with_gradient:
            self.grad_numerator = w0 * base_gradients
            self.total_grad = np.zeros_like(base_gradients)

    def add(self, rows: np.ndarray, w: np.ndarray, dw: np.ndarray, f: np.ndarray, df: Optional[np.ndarray]):
        self.numerator[rows] += w * f
        self.total[rows] += w
        if self.with_gradient:
            self.grad_numerator[rows] += dw * f[:, None] + w[:, None] * df
            self.total_grad[rows] += dw

    @property
    def values(self) -> np.ndarray:
        return self.numerator / self.total

    @property
    def gradients(self) -> Optional[np.ndarray]:
        if not self.with_gradient:
            return None
        return (self.grad_numerator - self.values[:, None] * self.total_grad) / self.total[:, None]


def region_weight(region: Region, queries: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Wendland weight of one ball and its gradient in q, for a batch of queries."""
    v = point_distances(queries, region.center)
    w = np.atleast_1d(wendland(v, region.radius))
    slope = np.atleast_1d(wendland_deriv(v, region.radius))
    away = v >= CENTER_CUTOFF * region.radius
    scale = np.zeros_like(v)
    scale[away] = slope[away] / v[away]
    dw = scale[:, None] * (queries - region.center[None, :])
    return w, dw


def default_eta(y: np.ndarray) -> float:
    mean_abs = float(np.mean(np.abs(y)))
    return 1e-4 * mean_abs if mean_abs > 0 else 1e-4


def region_bandwidth(X: np.ndarray, radius: float) -> float:
    try:
        return mean_pairwise_distance(X)
    except DataError:
        # single point or coincident members: fall back to the ball size
        return radius


class PUModelBuilder:
    def __init__(self, config: FitConfig):
        self.config = config
        self.fitter = LocalFitter(svd_threshold=config.svd_threshold)

    def fit(self, cloud: PointCloud, cover: Optional[RegionCover] = None,
            fallback: Optional[LocalModel] = None) -> StitchedModel:
        config = self.config
        if cover is None:
            cover = CoverBuilder(config.h).build_cover(cloud)
        if fallback is None:
            fallback = self.fit_fallback(cloud)

        def fit_region(region: Region) -> LocalModel:
            try:
                return self.fit_region(cloud, region)
            except NumericalError as e:
                raise NumericalError(str(e), region_id=region.id) from e

        if config.n_jobs > 1:
            with ThreadPoolExecutor(max_workers=config.n_jobs) as pool:
                local_models = list(pool.map(fit_region, cover.regions))
        else:
            local_models = [fit_region(region) for region in cover.regions]

        logger.info(f"Fitted {len(local_models)} {config.model_kind.value} local models "
                    f"(sigma_multiplier={config.sigma_multiplier}, eta={config.eta})")
        return StitchedModel(cover, local_models, fallback, config.w0, cloud.d, config)

    def fit_region(self, cloud: PointCloud, region: Region) -> LocalModel:
        X = cloud.points[region.member_indices]
        y = cloud.responses[region.member_indices]
        sigma = self.config.sigma_multiplier * region_bandwidth(X, region.radius)
        eta = self.config.eta if self.config.eta is not None else default_eta(y)
        if self.config.model_kind == ModelKind.KRR_POLY:
            return self.fitter.fit_krr_poly(X, y, sigma, eta, self.config.degree)
        return self.fitter.fit_krr(X, y, sigma, eta)

    def fit_fallback(self, cloud: PointCloud) -> LocalModel:
        return self.fitter.fit_polynomial(cloud.points, cloud.responses, self.config.fallback_degree)


def fit(cloud: PointCloud, config: FitConfig) -> StitchedModel:
    return PUModelBuilder(config).fit(cloud)
