import numpy as np
from dataclasses import dataclass, asdict
from typing import Dict
from sklearn.metrics import mean_squared_error

from regressors.errors import DataError

ZERO_TRUTH_CUTOFF = 1e-12


@dataclass
class ErrorReport:
    rmse: float
    max_relative_error: float
    mean_relative_error: float
    n_evaluated: int
    n_skipped_zero_truth: int

    @property
    def total(self) -> int:
        return self.n_evaluated + self.n_skipped_zero_truth

    def to_dict(self) -> Dict:
        return asdict(self)


def rmse(truth: np.ndarray, pred: np.ndarray) -> float:
    return float(np.sqrt(mean_squared_error(truth, pred)))


def error_report(truth: np.ndarray, pred: np.ndarray) -> ErrorReport:
    truth = np.asarray(truth, dtype=float).ravel()
    pred = np.asarray(pred, dtype=float).ravel()
    if truth.shape != pred.shape:
        raise DataError(f"Length mismatch: {truth.shape[0]} truth values, {pred.shape[0]} predictions")
    if truth.size == 0:
        raise DataError("Cannot report errors over zero points")

    # zero-truth entries have no relative error; they are counted, not divided by
    usable = np.abs(truth) > ZERO_TRUTH_CUTOFF
    relative = np.abs(truth[usable] - pred[usable]) / np.abs(truth[usable])
    return ErrorReport(
        rmse=rmse(truth, pred),
        max_relative_error=float(relative.max()) if relative.size else 0.0,
        mean_relative_error=float(relative.mean()) if relative.size else 0.0,
        n_evaluated=int(usable.sum()),
        n_skipped_zero_truth=int((~usable).sum()),
    )
