import json
import logging

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner
from scipy.linalg import LinAlgError

from conftest import quadratic
from main import cli
from regressors.errors import NumericalError
from regressors.local_fit import LocalFitter


@pytest.fixture(autouse=True)
def restore_logging():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def train_csv(tmp_path):
    X = np.random.default_rng(8).uniform(size=(80, 2))
    path = tmp_path / 'train.csv'
    pd.DataFrame({'x1': X[:, 0], 'x2': X[:, 1], 'y': quadratic(X)}).to_csv(path, index=False, float_format='%.17g')
    return path


@pytest.fixture
def model_json(runner, train_csv, tmp_path):
    path = tmp_path / 'model.json'
    result = runner.invoke(cli, ['fit', str(train_csv), '--out', str(path), '--h', '20'])
    assert result.exit_code == 0, result.output
    return path


def test_gen_synth2d(runner, tmp_path):
    result = runner.invoke(cli, ['gen', 'synth2d', '--n-train', '40', '--spacing', '3.0',
                                 '--out-dir', str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert len(pd.read_csv(tmp_path / 'synth2d_train.csv')) == 40
    assert len(pd.read_csv(tmp_path / 'synth2d_grid_test.csv')) == 13 * 13
    gradients = pd.read_csv(tmp_path / 'synth2d_grid_test_gradients.csv')
    assert list(gradients.columns) == ['dy_dx1', 'dy_dx2']
    assert (tmp_path / 'gen_synth2d.manifest.json').exists()


def test_gen_sphere(runner, tmp_path):
    result = runner.invoke(cli, ['gen', 'sphere', '--n', '400', '--density-biased', '--out-dir', str(tmp_path)])
    assert result.exit_code == 0, result.output
    train = pd.read_csv(tmp_path / 'sphere_train.csv')
    test = pd.read_csv(tmp_path / 'sphere_test.csv')
    assert len(train) + len(test) == 400
    assert list(train.columns) == ['x1', 'x2', 'x3', 'y']


def test_gen_rejects_empty_training_set(runner, tmp_path):
    result = runner.invoke(cli, ['gen', 'synth2d', '--n-train', '0', '--out-dir', str(tmp_path)])
    assert result.exit_code == 1


def test_unknown_command(runner):
    assert runner.invoke(cli, ['bogus']).exit_code == 1


def test_fit_with_h_above_n(runner, train_csv, tmp_path):
    path = tmp_path / 'model.json'
    result = runner.invoke(cli, ['fit', str(train_csv), '--out', str(path), '--h', '500'])
    assert result.exit_code == 0, result.output
    assert len(json.loads(path.read_text())['cover']['regions']) == 1
    assert (tmp_path / 'model.json.manifest.json').exists()


def test_predict_reproduces_polynomial(runner, model_json, train_csv, tmp_path):
    predictions = tmp_path / 'pred.csv'
    report = tmp_path / 'report.json'
    result = runner.invoke(cli, ['predict', str(model_json), str(train_csv), '--out', str(predictions)])
    assert result.exit_code == 0, result.output
    assert len(pd.read_csv(predictions)) == 80

    result = runner.invoke(cli, ['eval', str(predictions), str(train_csv), '--out', str(report)])
    assert result.exit_code == 0, result.output
    assert json.loads(report.read_text())['rmse'] <= 1e-5


def test_gradient_output(runner, model_json, train_csv, tmp_path):
    output = tmp_path / 'grad.csv'
    result = runner.invoke(cli, ['gradient', str(model_json), str(train_csv), '--out', str(output)])
    assert result.exit_code == 0, result.output
    grads = pd.read_csv(output)
    assert list(grads.columns) == ['dy_dx1', 'dy_dx2']
    X = pd.read_csv(train_csv)[['x1', 'x2']].values
    np.testing.assert_allclose(grads.values, np.column_stack([2 * X[:, 0], np.zeros(80)]), atol=1e-4)


def test_predict_is_deterministic(runner, model_json, train_csv, tmp_path):
    first, second = tmp_path / 'a.csv', tmp_path / 'b.csv'
    for out in (first, second):
        assert runner.invoke(cli, ['predict', str(model_json), str(train_csv), '--out', str(out)]).exit_code == 0
    assert first.read_bytes() == second.read_bytes()


def test_query_dimension_mismatch(runner, model_json, tmp_path):
    queries = tmp_path / 'queries.csv'
    queries.write_text("1,2,3,4\n")
    result = runner.invoke(cli, ['predict', str(model_json), str(queries), '--out', str(tmp_path / 'p.csv')])
    assert result.exit_code == 2
    assert "dimension mismatch" in result.output


def test_malformed_training_file(runner, tmp_path):
    bad = tmp_path / 'bad.csv'
    bad.write_text("1,2,3\n4,five,6\n")
    result = runner.invoke(cli, ['fit', str(bad), '--out', str(tmp_path / 'model.json')])
    assert result.exit_code == 2
    assert "line 2" in result.output


def test_invalid_parameter(runner, train_csv, tmp_path):
    result = runner.invoke(cli, ['fit', str(train_csv), '--eta', '-1', '--out', str(tmp_path / 'm.json')])
    assert result.exit_code == 1


def test_numerical_failure(runner, train_csv, tmp_path, monkeypatch):
    def broken(self, X, y, sigma, eta, degree):
        raise NumericalError("non-finite coefficients")

    monkeypatch.setattr(LocalFitter, 'fit_krr_poly', broken)
    result = runner.invoke(cli, ['fit', str(train_csv), '--out', str(tmp_path / 'm.json')])
    assert result.exit_code == 3
    assert "region 0" in result.output


def test_eval_length_mismatch(runner, tmp_path):
    pred = tmp_path / 'pred.csv'
    truth = tmp_path / 'truth.csv'
    pred.write_text("prediction\n1\n2\n")
    truth.write_text("x,y\n0,1\n")
    result = runner.invoke(cli, ['eval', str(pred), str(truth), '--out', str(tmp_path / 'r.json')])
    assert result.exit_code == 2


def test_tune_default_grid(runner, train_csv, tmp_path):
    out = tmp_path / 'tuning'
    result = runner.invoke(cli, ['tune', str(train_csv), '--grid-default', '--h', '20', '--out-dir', str(out)])
    assert result.exit_code == 0, result.output
    table = pd.read_csv(out / 'grid_table.csv')
    assert len(table) == 25
    best = json.loads((out / 'best-config.json').read_text())
    assert best['config']['eta'] == 1e-5
    assert best['config']['sigma_multiplier'] == 0.25


def test_svd_failure_exits_numerical(runner, train_csv, tmp_path, monkeypatch):
    def no_convergence(*args, **kwargs):
        raise LinAlgError("SVD did not converge")

    monkeypatch.setattr('regressors.local_fit.svd', no_convergence)
    result = runner.invoke(cli, ['fit', str(train_csv), '--out', str(tmp_path / 'm.json')])
    assert result.exit_code == 3
    assert "numerical failure" in result.output
