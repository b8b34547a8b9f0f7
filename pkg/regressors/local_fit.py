import logging
import numpy as np
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations_with_replacement
from typing import Optional
from scipy.linalg import cho_factor, cho_solve, LinAlgError, svd

from regressors.errors import DataError, NumericalError
from regressors.kernel_funcs import gaussian_matrix

logger = logging.getLogger(__name__)

SVD_THRESHOLD = 1e-10


class ModelKind(Enum):
    KRR = "krr"
    KRR_POLY = "krr_poly"
    POLYNOMIAL = "polynomial"


@dataclass(frozen=True)
class MonomialBasis:
    """Monomials of total degree <= degree in graded lexicographic order.

    Monomials are evaluated at (q - shift) / scale; a fitted basis is shifted
    and scaled to its region, which changes the coefficients but not the span.
    """
    dimension: int
    degree: int
    exponents: np.ndarray
    shift: np.ndarray
    scale: float = 1.0

    @property
    def size(self) -> int:
        return self.exponents.shape[0]

    def rescaled(self, shift: np.ndarray, scale: float) -> 'MonomialBasis':
        return MonomialBasis(self.dimension, self.degree, self.exponents,
                             np.asarray(shift, dtype=float), float(scale))

    def local_coords(self, q: np.ndarray) -> np.ndarray:
        return (np.asarray(q, dtype=float) - self.shift) / self.scale


def build_basis(d: int, degree: int) -> MonomialBasis:
    if d < 1 or degree < 0:
        raise ValueError(f"Basis needs d >= 1 and degree >= 0, got d={d}, degree={degree}")
    exponents = []
    for total in range(degree + 1):
        for combo in combinations_with_replacement(range(d), total):
            exponents.append(np.bincount(combo, minlength=d) if combo else np.zeros(d, dtype=int))
    return MonomialBasis(d, degree, np.array(exponents, dtype=int), np.zeros(d), 1.0)


def eval_basis(basis: MonomialBasis, q: np.ndarray) -> np.ndarray:
    """Monomial values, shape (s,) for one query or (m, s) for a batch."""
    u = basis.local_coords(q)
    single = u.ndim == 1
    u = np.atleast_2d(u)
    values = np.prod(u[:, None, :] ** basis.exponents[None, :, :], axis=2)
    return values[0] if single else values


def basis_grad(basis: MonomialBasis, q: np.ndarray) -> np.ndarray:
    """Partial derivatives, shape (s, d) for one query or (m, s, d) for a batch."""
    u = basis.local_coords(q)
    single = u.ndim == 1
    u = np.atleast_2d(u)
    exps = basis.exponents
    grads = np.zeros((u.shape[0], basis.size, basis.dimension))
    for k in range(basis.dimension):
        lowered = exps.copy()
        lowered[:, k] = np.maximum(lowered[:, k] - 1, 0)
        grads[:, :, k] = exps[None, :, k] * np.prod(u[:, None, :] ** lowered[None, :, :], axis=2)
    grads /= basis.scale
    return grads[0] if single else grads


@dataclass
class LocalModel:
    kind: ModelKind
    training_points: np.ndarray
    alpha: np.ndarray
    lam: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sigma: float = 1.0
    eta: float = 0.0
    basis: Optional[MonomialBasis] = None

    @property
    def dimension(self) -> int:
        return self.training_points.shape[1]

    def evaluate(self, q: np.ndarray) -> np.ndarray:
        queries = np.atleast_2d(np.asarray(q, dtype=float))
        values = np.zeros(queries.shape[0])
        if self.alpha.size:
            values += gaussian_matrix(queries, self.training_points, self.sigma) @ self.alpha
        if self.basis is not None:
            values += eval_basis(self.basis, queries) @ self.lam
        return values

    def gradient(self, q: np.ndarray) -> np.ndarray:
        queries = np.atleast_2d(np.asarray(q, dtype=float))
        grads = np.zeros(queries.shape)
        if self.alpha.size:
            K = gaussian_matrix(queries, self.training_points, self.sigma)
            weighted = K * self.alpha[None, :]
            # sum_i alpha_i K(x_i, q) 2 (x_i - q) / sigma^2
            grads += 2.0 / self.sigma ** 2 * (weighted @ self.training_points
                                              - weighted.sum(axis=1)[:, None] * queries)
        if self.basis is not None:
            grads += np.einsum('msd,s->md', basis_grad(self.basis, queries), self.lam)
        return grads


def eval_local(model: LocalModel, q: np.ndarray) -> float:
    return float(model.evaluate(q)[0])


def grad_local(model: LocalModel, q: np.ndarray) -> np.ndarray:
    return model.gradient(q)[0]


def thresholded_svd_solve(A: np.ndarray, b: np.ndarray, threshold: float = SVD_THRESHOLD) -> np.ndarray:
    """Least-squares solve with singular values below threshold * s_max zeroed."""
    try:
        U, s, Vh = svd(A, full_matrices=False)
    except LinAlgError as e:
        raise NumericalError(f"SVD of {A.shape[0]}x{A.shape[1]} system did not converge ({e})") from e
    s_inv = np.zeros_like(s)
    if s.size and s[0] > 0:
        keep = s >= threshold * s[0]
        s_inv[keep] = 1.0 / s[keep]
    return Vh.T @ (s_inv * (U.T @ b))


def fitted_basis(X: np.ndarray, degree: int) -> MonomialBasis:
    shift = X.mean(axis=0)
    scale = float(np.sqrt(np.sum((X - shift) ** 2, axis=1)).max())
    return build_basis(X.shape[1], degree).rescaled(shift, scale if scale > 0 else 1.0)


class LocalFitter:
    def __init__(self, svd_threshold: float = SVD_THRESHOLD):
        self.svd_threshold = svd_threshold

    def fit_krr(self, X: np.ndarray, y: np.ndarray, sigma: float, eta: float) -> LocalModel:
        X, y = self._check_inputs(X, y, sigma, eta)
        A = gaussian_matrix(X, X, sigma)
        A[np.diag_indices_from(A)] += eta
        try:
            alpha = cho_solve(cho_factor(A, lower=True), y)
        except LinAlgError:
            logger.warning(f"Cholesky failed on {len(y)}-point KRR system; using thresholded SVD")
            alpha = thresholded_svd_solve(A, y, self.svd_threshold)
        self._check_finite(alpha)
        return LocalModel(ModelKind.KRR, X, alpha, np.zeros(0), sigma, eta, None)

    def fit_krr_poly(self, X: np.ndarray, y: np.ndarray, sigma: float, eta: float,
                     degree: Optional[int]) -> LocalModel:
        if degree is None:
            return self.fit_krr(X, y, sigma, eta)
        X, y = self._check_inputs(X, y, sigma, eta)
        m = X.shape[0]
        basis = fitted_basis(X, degree)
        P = eval_basis(basis, X)
        s = basis.size

        A = np.zeros((m + s, m + s))
        A[:m, :m] = gaussian_matrix(X, X, sigma)
        A[np.arange(m), np.arange(m)] += eta
        A[:m, m:] = P
        A[m:, :m] = P.T
        rhs = np.concatenate([y, np.zeros(s)])

        solution = thresholded_svd_solve(A, rhs, self.svd_threshold)
        self._check_finite(solution)
        return LocalModel(ModelKind.KRR_POLY, X, solution[:m], solution[m:], sigma, eta, basis)

    def fit_polynomial(self, X: np.ndarray, y: np.ndarray, degree: int) -> LocalModel:
        """Global least-squares polynomial; the fallback model on the infinite ball."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float).ravel()
        basis = fitted_basis(X, degree)
        P = eval_basis(basis, X)
        lam = thresholded_svd_solve(P, y, self.svd_threshold)
        self._check_finite(lam)
        return LocalModel(ModelKind.POLYNOMIAL, np.zeros((0, X.shape[1])), np.zeros(0), lam,
                          1.0, 0.0, basis)

    @staticmethod
    def _check_inputs(X, y, sigma, eta):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[0] < 1 or X.shape[0] != y.shape[0]:
            raise DataError(f"Local fit needs matching points and responses, got {X.shape[0]} and {y.shape[0]}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("Local fit inputs must be finite")
        if not (sigma > 0 and eta > 0):
            raise ValueError(f"Bandwidth and ridge must be positive, got sigma={sigma}, eta={eta}")
        return X, y

    @staticmethod
    def _check_finite(coefficients: np.ndarray):
        if not np.all(np.isfinite(coefficients)):
            raise NumericalError("Local solve produced non-finite coefficients")


def fit_krr(X, y, sigma: float, eta: float) -> LocalModel:
    return LocalFitter().fit_krr(X, y, sigma, eta)


def fit_krr_poly(X, y, sigma: float, eta: float, degree: Optional[int]) -> LocalModel:
    return LocalFitter().fit_krr_poly(X, y, sigma, eta, degree)
