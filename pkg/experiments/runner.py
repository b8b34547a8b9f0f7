import logging
import yaml
import numpy as np
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from data_ingestion.datagen import gen1d_section, gen2d, gen_sphere, lonlat_to_cartesian
from data_ingestion.models import PointCloud
from regressors.fit_config import FitConfig
from regressors.local_fit import ModelKind
from regressors.metrics import error_report
from regressors.stitch import PUModelBuilder, StitchedModel
from regressors.tuning import GridSearchTuner

logger = logging.getLogger(__name__)

DEFAULT_EXPERIMENTS_PATH = Path(__file__).resolve().parent.parent / 'config' / 'experiments.yaml'

VARIANTS = ('pu-krr-poly', 'pu-krr', 'global-krr')


@dataclass
class ExperimentRow:
    experiment: str
    variant: str
    seed: int
    n_train: int
    rmse: float
    mse: float
    max_relative_error: float
    mean_relative_error: float
    n_regions: int
    best_eta: Optional[float]
    best_sigma_multiplier: Optional[float]
    mse_slope: Optional[float] = None  # convergence only: log-log slope of mean MSE against n, per variant


def load_experiment_settings(path: Union[str, Path] = DEFAULT_EXPERIMENTS_PATH) -> Dict:
    with open(path, 'r') as f:
        return yaml.safe_load(f)


def loglog_slope(sizes: Sequence[float], errors: Sequence[float]) -> float:
    slope, _ = np.polyfit(np.log(np.asarray(sizes, dtype=float)), np.log(np.asarray(errors, dtype=float)), 1)
    return float(slope)


class ExperimentRunner:
    def __init__(self, base_config: FitConfig, settings: Optional[Dict] = None, tune: bool = True):
        self.base_config = base_config
        self.settings = settings if settings is not None else load_experiment_settings()
        self.tune = tune

    def fit_variant(self, variant: str, train: PointCloud, seed: int,
                    global_subsample: Optional[int] = None) -> StitchedModel:
        config = self.base_config.with_overrides(seed=seed)
        if variant == 'pu-krr-poly':
            config = config.with_overrides(model_kind=ModelKind.KRR_POLY)
        elif variant == 'pu-krr':
            config = config.with_overrides(model_kind=ModelKind.KRR)
        elif variant == 'global-krr':
            # one region over a subsample stands in for a global KRR fit
            if global_subsample is not None and train.n > global_subsample:
                rng = np.random.default_rng(seed)
                train = train.subset(np.sort(rng.choice(train.n, size=global_subsample, replace=False)))
            config = config.with_overrides(model_kind=ModelKind.KRR, h=train.n)
        else:
            raise ValueError(f"Unknown variant '{variant}'; expected one of {', '.join(VARIANTS)}")

        if self.tune:
            tuner = GridSearchTuner(config)
            result = tuner.grid_search(train)
            config = tuner.best_config(result)
        return PUModelBuilder(config).fit(train)

    def evaluate(self, experiment: str, variant: str, seed: int, model: StitchedModel,
                 train: PointCloud, test: PointCloud) -> ExperimentRow:
        report = error_report(test.responses, model.predict_many(test.points))
        logger.info(f"{experiment} {variant} seed={seed} n={train.n}: RMSE {report.rmse:.5g}")
        return ExperimentRow(
            experiment=experiment,
            variant=variant,
            seed=seed,
            n_train=train.n,
            rmse=report.rmse,
            mse=report.rmse ** 2,
            max_relative_error=report.max_relative_error,
            mean_relative_error=report.mean_relative_error,
            n_regions=len(model.cover),
            best_eta=model.config.eta,
            best_sigma_multiplier=model.config.sigma_multiplier,
        )

    def run_synth2d(self) -> List[ExperimentRow]:
        s = self.settings['synth2d']
        rows = []
        for seed in s['seeds']:
            train, test = gen2d(s['n_train'], seed, spacing=s['grid_spacing'])
            for variant in VARIANTS:
                model = self.fit_variant(variant, train.cloud, seed, global_subsample=s['global_subsample'])
                rows.append(self.evaluate('synth2d', variant, seed, model, train.cloud, test.cloud))
        return rows

    def run_convergence(self) -> List[ExperimentRow]:
        s = self.settings['convergence']
        rows = []
        for seed in s['seeds']:
            test = gen1d_section(s['n_test'], seed + 10_000)
            for n in s['train_sizes']:
                train = gen1d_section(n, seed, noise_std=s['noise_std'])
                for variant in ('pu-krr-poly', 'pu-krr'):
                    model = self.fit_variant(variant, train.cloud, seed)
                    rows.append(self.evaluate('convergence', variant, seed, model, train.cloud, test.cloud))
        for variant, slope in convergence_slopes(rows).items():
            logger.info(f"convergence {variant}: log-log MSE slope {slope:.4g}")
            for row in rows:
                if row.variant == variant:
                    row.mse_slope = slope
        return rows

    def run_sphere(self) -> List[ExperimentRow]:
        s = self.settings['sphere']
        p1, p2 = (lonlat_to_cartesian(lon, lat) for lon, lat in s['bell_centers_lonlat'])
        rows = []
        for seed in s['seeds']:
            train_full, test = gen_sphere(s['n_nodes'], seed, density_biased=True, centers=(p1, p2))
            rng = np.random.default_rng(seed)
            for n in s['train_sizes']:
                size = min(n, train_full.cloud.n)
                train = train_full.cloud.subset(np.sort(rng.choice(train_full.cloud.n, size=size, replace=False)))
                for variant in ('pu-krr-poly', 'pu-krr'):
                    model = self.fit_variant(variant, train, seed)
                    rows.append(self.evaluate('sphere', variant, seed, model, train, test.cloud))
        return rows

    def run(self, name: str) -> List[ExperimentRow]:
        runners = {
            'synth2d': self.run_synth2d,
            'convergence': self.run_convergence,
            'sphere': self.run_sphere,
        }
        if name not in runners:
            raise ValueError(f"Unknown experiment '{name}'; expected one of {', '.join(runners)}")
        return runners[name]()


def mean_by(rows: List[ExperimentRow], *keys: str, metric: str = 'rmse') -> Dict[tuple, float]:
    grouped: Dict[tuple, List[float]] = {}
    for row in rows:
        grouped.setdefault(tuple(getattr(row, k) for k in keys), []).append(getattr(row, metric))
    return {k: float(np.mean(v)) for k, v in grouped.items()}


def convergence_slopes(rows: List[ExperimentRow]) -> Dict[str, float]:
    """Least-squares log-log slope of the seed-averaged test MSE against n, per variant."""
    means = mean_by(rows, 'variant', 'n_train', metric='mse')
    slopes = {}
    for variant in sorted({v for v, _ in means}):
        sizes = sorted(n for v, n in means if v == variant)
        if len(sizes) < 2:
            continue
        slopes[variant] = loglog_slope(sizes, [means[(variant, n)] for n in sizes])
    return slopes
