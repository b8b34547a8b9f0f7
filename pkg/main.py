#!/usr/bin/env python3
import logging
from pathlib import Path
from typing import List, Optional, Tuple

import click
import numpy as np

from data_ingestion.csv_loader import PointCloudCSVParser
from data_ingestion.data_validator import DataValidator
from data_ingestion.datagen import gen2d, gen_sphere
from data_ingestion.models import PointCloud
from experiments.runner import ExperimentRunner, load_experiment_settings
from output_generators.model_serializer import ModelSerializer
from output_generators.result_writer import ResultWriter, RunManifest, atomic_write_json
from regressors.errors import DataError, NumericalError
from regressors.fit_config import (DEFAULT_CONFIG_PATH, DEFAULT_ETA_GRID, DEFAULT_SIGMA_MULTIPLIER_GRID,
                                   FitConfig, parse_model_kind)
from regressors.metrics import error_report
from regressors.stitch import PUModelBuilder, StitchedModel
from regressors.tuning import GridSearchTuner, GridResult

logger = logging.getLogger(__name__)

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class PURegressionPipeline:
    def __init__(self, config: FitConfig):
        self.config = config
        self.parser = PointCloudCSVParser()
        self.validator = DataValidator(h=config.h)
        self.serializer = ModelSerializer()
        self.writer = ResultWriter()

    def load_training_data(self, path: str) -> PointCloud:
        logger.info(f"Reading training data from {path}")
        cloud = self.parser.parse_point_cloud(path)
        is_valid, messages = self.validator.validate_cloud(cloud)
        if not is_valid:
            raise DataError(f"{path}: " + "; ".join(messages))
        for msg in messages:
            logger.warning(f"{path}: {msg}")
        logger.info(f"Loaded {cloud.n} points in d={cloud.d}")
        return cloud

    def fit(self, cloud: PointCloud) -> StitchedModel:
        logger.info(f"Fitting {self.config.model_kind.value} with h={self.config.h}")
        return PUModelBuilder(self.config).fit(cloud)

    def tune(self, cloud: PointCloud) -> Tuple[GridResult, FitConfig]:
        tuner = GridSearchTuner(self.config)
        result = tuner.grid_search(cloud)
        return result, tuner.best_config(result)

    def load_queries(self, model: StitchedModel, path: str) -> np.ndarray:
        queries = self.parser.parse_queries(path, model.dimension)
        is_valid, messages = self.validator.validate_queries(queries, model.dimension)
        if not is_valid:
            raise DataError(f"{path}: " + "; ".join(messages))
        return queries


class ExitCodeGroup(click.Group):
    """Maps failures to exit codes: 1 usage, 2 data, 3 numerical."""

    def parse_args(self, ctx, args):
        try:
            return super().parse_args(ctx, args)
        except click.UsageError as e:
            e.exit_code = EXIT_USAGE
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = EXIT_USAGE
            raise
        except NumericalError as e:
            self._fail(ctx, f"numerical failure: {e}", EXIT_NUMERICAL)
        except DataError as e:
            self._fail(ctx, f"data error: {e}", EXIT_DATA)
        except OSError as e:
            self._fail(ctx, f"I/O error: {e}", EXIT_DATA)
        except ValueError as e:
            self._fail(ctx, f"invalid parameter: {e}", EXIT_USAGE)

    @staticmethod
    def _fail(ctx, message: str, code: int):
        logger.debug(message, exc_info=True)
        click.echo(f"error: {' '.join(message.split())}", err=True)
        ctx.exit(code)


def _manifest_path(output: Path) -> Path:
    return output.with_name(output.name + '.manifest.json')


def _build_config(config_path: Optional[str], **overrides) -> FitConfig:
    config = FitConfig.from_yaml(config_path or DEFAULT_CONFIG_PATH)
    if overrides.get('model_kind') is not None:
        overrides['model_kind'] = parse_model_kind(overrides['model_kind'])
    return config.with_overrides(**overrides)


def fit_options(func):
    options = [
        click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
                     help='YAML file with a top-level "fit" section'),
        click.option('--h', type=click.IntRange(min=1), help='Points per region'),
        click.option('--degree', type=click.IntRange(min=0), help='Polynomial degree for pu-krr-poly'),
        click.option('--model', 'model_kind', type=click.Choice(['pu-krr', 'pu-krr-poly']), help='Local model'),
        click.option('--eta', type=float, help='Ridge parameter (default: 1e-4 times region mean |y|)'),
        click.option('--sigma-mult', 'sigma_multiplier', type=float,
                     help='Bandwidth multiplier on region mean pairwise distance'),
        click.option('--seed', type=int, help='Random seed'),
        click.option('--n-jobs', type=click.IntRange(min=1), help='Threads for per-region fits'),
        click.option('--fallback-widening', type=float,
                     help='Ball radius factor for the fallback blend of local models (0: polynomial only)'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group(cls=ExitCodeGroup)
@click.option('--verbose', '-v', is_flag=True, help='Debug logging')
@click.option('--log-file', type=click.Path(dir_okay=False), help='Also write the log to this file')
def cli(verbose, log_file):
    """Partition-of-unity kernel regression: generate, fit, tune, predict, evaluate."""
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


@cli.group(cls=ExitCodeGroup)
def gen():
    """Generate synthetic datasets."""


@gen.command('synth2d')
@click.option('--n-train', type=click.IntRange(min=1), default=20000, show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--noise-std', type=click.FloatRange(min=0), default=0.0, show_default=True)
@click.option('--spacing', type=click.FloatRange(min=0, min_open=True), default=0.2, show_default=True)
@click.option('--out-dir', '-o', type=click.Path(file_okay=False), default='data', show_default=True)
def gen_synth2d(n_train, seed, noise_std, spacing, out_dir):
    """Random training points and the 0.2-spaced grid test set of the 2D surface."""
    out = Path(out_dir)
    manifest = RunManifest(command='gen synth2d', seed=seed,
                           config={'n_train': n_train, 'noise_std': noise_std, 'spacing': spacing})
    train, test = gen2d(n_train, seed, noise_std=noise_std, spacing=spacing)
    writer = ResultWriter(out)
    outputs = [
        writer.write_dataset(train, 'synth2d_train.csv'),
        writer.write_dataset(test, 'synth2d_grid_test.csv'),
        writer.write_gradients(test.gradients, 'synth2d_grid_test_gradients.csv'),
    ]
    for path in outputs:
        manifest.add_output(path)
    manifest.write(out / 'gen_synth2d.manifest.json')
    logger.info(f"Wrote {train.cloud.n} training and {test.cloud.n} grid test points to {out}")


@gen.command('sphere')
@click.option('--n', 'n_nodes', type=click.IntRange(min=2), default=9200, show_default=True)
@click.option('--density-biased', is_flag=True, help='Draw the training set by two-center Bernoulli sampling')
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out-dir', '-o', type=click.Path(file_okay=False), default='data', show_default=True)
def gen_sphere_cmd(n_nodes, density_biased, seed, out_dir):
    """Shifted cosine-bells field on Fibonacci-lattice sphere nodes."""
    out = Path(out_dir)
    manifest = RunManifest(command='gen sphere', seed=seed,
                           config={'n': n_nodes, 'density_biased': density_biased})
    train, test = gen_sphere(n_nodes, seed, density_biased=density_biased)
    writer = ResultWriter(out)
    outputs = [
        writer.write_dataset(train, 'sphere_train.csv'),
        writer.write_dataset(test, 'sphere_test.csv'),
        writer.write_gradients(test.gradients, 'sphere_test_gradients.csv'),
    ]
    for path in outputs:
        manifest.add_output(path)
    manifest.write(out / 'gen_sphere.manifest.json')
    logger.info(f"Wrote {train.cloud.n} training and {test.cloud.n} test sphere points to {out}")


@cli.command()
@click.argument('train_csv', type=click.Path(exists=True, dir_okay=False))
@click.option('--out', '-o', 'output', type=click.Path(dir_okay=False), default='model.json', show_default=True)
@fit_options
def fit(train_csv, output, config_path, **overrides):
    """Fit a stitched model and save it as JSON."""
    config = _build_config(config_path, **overrides)
    pipeline = PURegressionPipeline(config)
    manifest = RunManifest(command='fit', config=config.to_dict(), seed=config.seed)
    manifest.add_input(train_csv)

    cloud = pipeline.load_training_data(train_csv)
    manifest.mark('load')
    model = pipeline.fit(cloud)
    manifest.mark('fit')
    path = pipeline.serializer.save(model, cloud, output)
    manifest.add_output(path)
    manifest.write(_manifest_path(path))
    logger.info(f"Saved model with {len(model.cover)} regions to {path}")


@cli.command()
@click.argument('train_csv', type=click.Path(exists=True, dir_okay=False))
@click.option('--out-dir', '-o', type=click.Path(file_okay=False), default='tuning', show_default=True)
@click.option('--grid-default', is_flag=True, help="Use the 5x5 grid of eta and sigma multipliers")
@fit_options
def tune(train_csv, out_dir, grid_default, config_path, **overrides):
    """Grid-search eta and the bandwidth multiplier on a held-out split."""
    config = _build_config(config_path, **overrides)
    if grid_default:
        config = config.with_overrides(eta_grid=list(DEFAULT_ETA_GRID),
                                       sigma_multiplier_grid=list(DEFAULT_SIGMA_MULTIPLIER_GRID))
    pipeline = PURegressionPipeline(config)
    out = Path(out_dir)
    manifest = RunManifest(command='tune', config=config.to_dict(), seed=config.seed)
    manifest.add_input(train_csv)

    cloud = pipeline.load_training_data(train_csv)
    result, best = pipeline.tune(cloud)
    manifest.mark('grid_search')

    table_path = pipeline.writer.write_table(result.long_table().to_dict('records'), out / 'grid_table.csv')
    best_path = atomic_write_json({
        'config': best.to_dict(),
        'validation_rmse': result.best_rmse,
        'tie_rule': result.tie_rule,
    }, out / 'best-config.json')
    manifest.add_output(table_path)
    manifest.add_output(best_path)
    manifest.write(out / 'tune.manifest.json')
    click.echo(f"best eta={result.best_eta:g} sigma_multiplier={result.best_sigma_multiplier:g} "
               f"validation RMSE={result.best_rmse:.6g}")


@cli.command()
@click.argument('model_json', type=click.Path(exists=True, dir_okay=False))
@click.argument('query_csv', type=click.Path(exists=True, dir_okay=False))
@click.option('--out', '-o', 'output', type=click.Path(dir_okay=False), default='predictions.csv', show_default=True)
def predict(model_json, query_csv, output):
    """Predict at every query row, in order."""
    _evaluate_queries('predict', model_json, query_csv, output, gradients=False)


@cli.command()
@click.argument('model_json', type=click.Path(exists=True, dir_okay=False))
@click.argument('query_csv', type=click.Path(exists=True, dir_okay=False))
@click.option('--out', '-o', 'output', type=click.Path(dir_okay=False), default='gradients.csv', show_default=True)
def gradient(model_json, query_csv, output):
    """Analytic gradient at every query row, one column per dimension."""
    _evaluate_queries('gradient', model_json, query_csv, output, gradients=True)


def _evaluate_queries(command: str, model_json: str, query_csv: str, output: str, gradients: bool):
    serializer = ModelSerializer()
    model = serializer.load(model_json)
    pipeline = PURegressionPipeline(model.config)
    manifest = RunManifest(command=command, config=model.config.to_dict(), seed=model.config.seed)
    manifest.add_input(model_json)
    manifest.add_input(query_csv)

    queries = pipeline.load_queries(model, query_csv)
    if gradients:
        path = pipeline.writer.write_gradients(model.gradient_many(queries), output)
    else:
        path = pipeline.writer.write_predictions(model.predict_many(queries), output)
    manifest.mark(command)
    manifest.add_output(path)
    manifest.write(_manifest_path(Path(path)))
    logger.info(f"Wrote {len(queries)} rows to {path}")


@cli.command('eval')
@click.argument('predictions_csv', type=click.Path(exists=True, dir_okay=False))
@click.argument('truth_csv', type=click.Path(exists=True, dir_okay=False))
@click.option('--out', '-o', 'output', type=click.Path(dir_okay=False), default='report.json', show_default=True)
def evaluate(predictions_csv, truth_csv, output):
    """RMSE and relative errors of predictions against the truth file's last column."""
    parser = PointCloudCSVParser()
    predictions, _ = parser.read_matrix(predictions_csv)
    truth, _ = parser.read_matrix(truth_csv)
    manifest = RunManifest(command='eval', config={}, seed=None)
    manifest.add_input(predictions_csv)
    manifest.add_input(truth_csv)

    report = error_report(truth[:, -1], predictions[:, -1])
    path = atomic_write_json(report.to_dict(), output)
    manifest.add_output(path)
    manifest.write(_manifest_path(Path(path)))
    click.echo(f"rmse={report.rmse:.6g} max_rel={report.max_relative_error:.6g} "
               f"mean_rel={report.mean_relative_error:.6g}")


@cli.command()
@click.argument('name', type=click.Choice(['synth2d', 'convergence', 'sphere']))
@click.option('--out', '-o', 'output', type=click.Path(dir_okay=False), default=None,
              help='Result table (default: <name>_results.csv)')
@click.option('--settings', 'settings_path', type=click.Path(exists=True, dir_okay=False),
              help='Experiment protocol YAML')
@click.option('--no-tune', is_flag=True, help='Use default bandwidth and ridge instead of grid search')
@fit_options
def experiment(name, output, settings_path, no_tune, config_path, **overrides):
    """Run a scaled-down experiment protocol and write a plot-ready table."""
    config = _build_config(config_path, **overrides)
    settings = load_experiment_settings(settings_path) if settings_path else load_experiment_settings()
    manifest = RunManifest(command=f'experiment {name}', config=config.to_dict(), seed=config.seed)
    rows = ExperimentRunner(config, settings, tune=not no_tune).run(name)
    manifest.mark(name)
    path = ResultWriter().write_table([vars(r) for r in rows], output or f'{name}_results.csv')
    manifest.add_output(path)
    manifest.write(_manifest_path(Path(path)))
    logger.info(f"Wrote {len(rows)} result rows to {path}")


def main():
    cli(prog_name='pu-regress')


if __name__ == "__main__":
    main()
