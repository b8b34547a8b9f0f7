import logging
import numpy as np
import pandas as pd
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple
from sklearn.model_selection import train_test_split

from data_ingestion.models import PointCloud
from regressors.errors import DataError
from regressors.fit_config import FitConfig
from regressors.metrics import rmse
from regressors.spatial_cover import CoverBuilder
from regressors.stitch import PUModelBuilder

logger = logging.getLogger(__name__)


@dataclass
class GridResult:
    """Validation scores of every grid cell and the chosen cell.

    `table` holds each RMSE snapped to the tie resolution, so tied cells carry
    equal values and the chosen cell attains the table minimum; `raw_table`
    keeps the unrounded scores.
    """
    table: pd.DataFrame  # snapped validation RMSE, rows eta, columns sigma multiplier
    best_eta: float
    best_sigma_multiplier: float
    tie_rule: str
    train_indices: np.ndarray
    validation_indices: np.ndarray
    raw_table: Optional[pd.DataFrame] = None

    @property
    def best_rmse(self) -> float:
        return float(self.table.loc[self.best_eta, self.best_sigma_multiplier])

    def long_table(self) -> pd.DataFrame:
        long = self.table.stack().reset_index()
        long.columns = ['eta', 'sigma_multiplier', 'validation_rmse']
        if self.raw_table is not None:
            long['raw_validation_rmse'] = self.raw_table.stack().values
        return long


def split_indices(n: int, validation_fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    n_validation = int(round(n * validation_fraction))
    if n_validation < 1:
        raise DataError(f"Validation split of {validation_fraction} over {n} points is empty")
    if n_validation >= n:
        raise DataError(f"Validation split of {validation_fraction} over {n} points leaves no training data")
    train, validation = train_test_split(np.arange(n), test_size=n_validation, random_state=seed, shuffle=True)
    return np.sort(train), np.sort(validation)


def tie_scale(responses: np.ndarray) -> float:
    """Scale that turns the relative tie tolerance into an RMSE difference."""
    scale = float(np.std(responses))
    if scale == 0.0:
        scale = float(np.mean(np.abs(responses)))
    return scale if scale > 0.0 else 1.0


class GridSearchTuner:
    def __init__(self, config: FitConfig):
        self.config = config

    def grid_search(self, cloud: PointCloud) -> GridResult:
        config = self.config
        train_idx, val_idx = split_indices(cloud.n, config.validation_fraction, config.seed)
        train = cloud.subset(train_idx)
        validation = cloud.subset(val_idx)

        # covers depend only on geometry, so every cell shares one cover and fallback
        cover = CoverBuilder(config.h).build_cover(train)
        fallback = PUModelBuilder(config).fit_fallback(train)

        cells = [(eta, mult) for eta in config.eta_grid for mult in config.sigma_multiplier_grid]
        logger.info(f"Grid search over {len(cells)} cells: {len(train_idx)} train / {len(val_idx)} validation points")

        def score(cell: Tuple[float, float]) -> float:
            eta, mult = cell
            cell_config = config.with_overrides(eta=eta, sigma_multiplier=mult, n_jobs=1)
            model = PUModelBuilder(cell_config).fit(train, cover=cover, fallback=fallback)
            value = rmse(validation.responses, model.predict_many(validation.points))
            logger.info(f"  eta={eta:g} sigma_multiplier={mult:g}: validation RMSE {value:.6g}")
            return value

        if config.n_jobs > 1:
            with ThreadPoolExecutor(max_workers=config.n_jobs) as pool:
                scores = list(pool.map(score, cells))
        else:
            scores = [score(cell) for cell in cells]

        shape = (len(config.eta_grid), len(config.sigma_multiplier_grid))
        resolution = config.tie_tolerance * tie_scale(validation.responses)
        snapped = snap_scores(scores, resolution)
        table, raw_table = (
            pd.DataFrame(
                np.asarray(values, dtype=float).reshape(shape),
                index=pd.Index(config.eta_grid, name='eta'),
                columns=pd.Index(config.sigma_multiplier_grid, name='sigma_multiplier'),
            )
            for values in (snapped, scores)
        )
        best_eta, best_mult = self._select(cells, snapped)
        logger.info(f"Best cell: eta={best_eta:g}, sigma_multiplier={best_mult:g}")
        return GridResult(
            table=table,
            best_eta=best_eta,
            best_sigma_multiplier=best_mult,
            tie_rule=(f"RMSE snapped to {config.tie_tolerance:g} x response scale; among cells at the "
                      f"minimum: smaller eta, then smaller sigma multiplier"),
            train_indices=train_idx,
            validation_indices=val_idx,
            raw_table=raw_table,
        )

    @staticmethod
    def _select(cells: List[Tuple[float, float]], scores: np.ndarray) -> Tuple[float, float]:
        scores = np.asarray(scores, dtype=float)
        if not np.any(np.isfinite(scores)):
            raise DataError("Every grid cell produced a non-finite validation error")
        best = np.nanmin(scores)
        return min(cell for cell, s in zip(cells, scores) if s == best)

    def best_config(self, result: GridResult) -> FitConfig:
        return self.config.with_overrides(eta=result.best_eta, sigma_multiplier=result.best_sigma_multiplier)


def snap_scores(scores, resolution: float) -> np.ndarray:
    """Round scores to whole multiples of resolution; non-finite scores pass through."""
    scores = np.asarray(scores, dtype=float)
    snapped = scores.copy()
    finite = np.isfinite(scores)
    snapped[finite] = np.round(scores[finite] / resolution) * resolution
    return snapped


def grid_search(cloud: PointCloud, config: FitConfig) -> GridResult:
    return GridSearchTuner(config).grid_search(cloud)
