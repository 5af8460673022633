"""Gaussian-process regression surrogate over the unit hypercube.

Implements a Matern-5/2 kernel with per-dimension (ARD) lengthscales,
log-marginal-likelihood fitting with analytic gradients and multi-start
quasi-Newton ascent, and Gaussian posterior predictions de-standardised to
raw score units.
"""

import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import linalg, optimize
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from boffin._validation import as_float_array, check_positive_scalar, check_unit_coords

_SQRT5 = math.sqrt(5.0)
_LOG_2PI = math.log(2.0 * math.pi)

# Diagonal jitter, relative to signal variance: always start at the first
# rung, escalate tenfold on factorisation failure, give up past the last.
JITTER_FIRST = 1e-10
JITTER_LAST = 1e-4

# Multi-start fitting schedule. Initial points are drawn log-uniformly from
# the init ranges; the optimiser is bounded by the (wider) search ranges.
N_RESTARTS = 8
MAX_ITER = 200
LENGTHSCALE_INIT = (0.05, 2.0)
SIGNAL_INIT = (0.1, 10.0)
NOISE_INIT = (1e-6, 1e-1)
LENGTHSCALE_RANGE = (1e-3, 1e3)
SIGNAL_RANGE = (1e-8, 1e4)
NOISE_RANGE = (1e-12, 10.0)

_BIG = 1e25  # objective value reported for non-factorisable parameter points


@dataclass(frozen=True)
class KernelParams:
    """Matern-5/2 ARD kernel hyperparameters in standardised-output units.

    Attributes:
        lengthscales: One positive lengthscale per input dimension.
        signal_variance: Positive prior variance of the latent function.
        noise_variance: Non-negative observation-noise variance.
    """

    lengthscales: np.ndarray
    signal_variance: float
    noise_variance: float

    def __post_init__(self) -> None:
        ls = as_float_array(self.lengthscales, "lengthscales", ndim=1)
        if ls.size == 0 or np.any(ls <= 0):
            raise ValueError("lengthscales must be positive")
        ls = ls.copy()
        ls.flags.writeable = False
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(
            self, "signal_variance", check_positive_scalar(self.signal_variance, "signal_variance")
        )
        object.__setattr__(
            self,
            "noise_variance",
            check_positive_scalar(self.noise_variance, "noise_variance", inclusive=True),
        )

    @property
    def dimension(self) -> int:
        return self.lengthscales.size


class PosteriorPrediction(NamedTuple):
    """Gaussian posterior at one query point, in raw score units."""

    mean: float
    variance: float


def kernel_eval(params: KernelParams, a, b) -> float:
    """Evaluate the Matern-5/2 ARD covariance between two points.

    Args:
        params: Kernel hyperparameters; dimension must match the points.
        a: First point, shape (d,).
        b: Second point, shape (d,).

    Returns:
        The covariance value; equals signal_variance when a == b.
    """
    a = as_float_array(a, "a", ndim=1)
    b = as_float_array(b, "b", ndim=1)
    if a.shape != b.shape or a.size != params.dimension:
        raise ValueError(
            f"dimension mismatch: a {a.shape}, b {b.shape}, kernel d={params.dimension}"
        )
    r2 = float(np.sum(((a - b) / params.lengthscales) ** 2))
    r = math.sqrt(r2)
    return params.signal_variance * (1.0 + _SQRT5 * r + (5.0 / 3.0) * r2) * math.exp(-_SQRT5 * r)


def _pairwise_sq_diffs(X: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Per-dimension squared differences, shape (len(X), len(Z), d)."""
    return (X[:, None, :] - Z[None, :, :]) ** 2


def _matern_terms(sq_diffs: np.ndarray, inv_ls2: np.ndarray):
    """Shared Matern-5/2 factors: scaled r^2, r, (1 + sqrt5 r), exp(-sqrt5 r)."""
    r2 = sq_diffs @ inv_ls2
    np.maximum(r2, 0.0, out=r2)
    r = np.sqrt(r2)
    return r2, r, 1.0 + _SQRT5 * r, np.exp(-_SQRT5 * r)


def kernel_matrix(params: KernelParams, X, Z=None) -> np.ndarray:
    """Covariance matrix between two point sets (noise-free).

    Args:
        params: Kernel hyperparameters.
        X: Points of shape (n, d).
        Z: Points of shape (m, d); defaults to X.

    Returns:
        Array of shape (n, m).
    """
    X = np.atleast_2d(as_float_array(X, "X"))
    Z = X if Z is None else np.atleast_2d(as_float_array(Z, "Z"))
    if X.shape[1] != params.dimension or Z.shape[1] != params.dimension:
        raise ValueError("point dimension does not match kernel dimension")
    inv_ls2 = 1.0 / params.lengthscales**2
    r2, _, g, e = _matern_terms(_pairwise_sq_diffs(X, Z), inv_ls2)
    return params.signal_variance * (g + (5.0 / 3.0) * r2) * e


def _factorize(K_noisy: np.ndarray, signal_variance: float):
    """Cholesky-factorise with the escalating jitter ladder.

    Returns:
        (L, jitter) where L is lower triangular and jitter the diagonal
        amount that was added (relative rung times signal variance).

    Raises:
        np.linalg.LinAlgError: If no rung up to the last one factorises.
    """
    rung = JITTER_FIRST
    eye = np.eye(K_noisy.shape[0])
    while True:
        jitter = rung * signal_variance
        try:
            L = linalg.cholesky(K_noisy + jitter * eye, lower=True)
            return L, jitter
        except np.linalg.LinAlgError:
            rung *= 10.0
            if rung > JITTER_LAST * (1.0 + 1e-12):
                raise np.linalg.LinAlgError(
                    "kernel matrix is not positive definite after jitter escalation"
                )


def _lml_terms(theta: np.ndarray, sq_diffs: np.ndarray, y: np.ndarray):
    """Negative-free LML pieces for a log-parameter vector.

    theta packs [log lengthscales (d), log signal_variance, log noise_variance].

    Returns:
        (lml, L, alpha, pieces) where pieces carries the factors reused by
        the gradient.
    """
    d = sq_diffs.shape[2]
    inv_ls2 = np.exp(-2.0 * theta[:d])
    signal = math.exp(theta[d])
    noise = math.exp(theta[d + 1])
    r2, _, g, e = _matern_terms(sq_diffs, inv_ls2)
    Kf = signal * (g + (5.0 / 3.0) * r2) * e
    t = Kf.shape[0]
    K_noisy = Kf + noise * np.eye(t)
    L, _ = _factorize(K_noisy, signal)
    alpha = linalg.cho_solve((L, True), y)
    lml = -0.5 * float(y @ alpha) - float(np.sum(np.log(np.diag(L)))) - 0.5 * t * _LOG_2PI
    return lml, L, alpha, (inv_ls2, signal, noise, g, e, Kf)


def _lml_and_grad(theta: np.ndarray, sq_diffs: np.ndarray, y: np.ndarray):
    """Log marginal likelihood and its gradient in log-parameter space.

    Uses d LML / d theta = 0.5 tr((alpha alpha^T - K^-1) dK/d theta).
    """
    lml, L, alpha, (inv_ls2, signal, noise, g, e, Kf) = _lml_terms(theta, sq_diffs, y)
    t = Kf.shape[0]
    K_inv = linalg.cho_solve((L, True), np.eye(t))
    W = np.outer(alpha, alpha) - K_inv
    # dK/d log ls_j = (5/3) signal (1 + sqrt5 r) e^{-sqrt5 r} sq_diffs_j / ls_j^2
    WGE = W * (g * e)
    grad_ls = 0.5 * (5.0 / 3.0) * signal * inv_ls2 * np.einsum("ik,ikj->j", WGE, sq_diffs)
    grad_signal = 0.5 * float(np.sum(W * Kf))
    grad_noise = 0.5 * noise * float(np.trace(W))
    return lml, np.concatenate([grad_ls, [grad_signal], [grad_noise]])


def _params_to_theta(params: KernelParams) -> np.ndarray:
    with np.errstate(divide="ignore"):  # noise_variance 0 maps to log 0 = -inf
        return np.concatenate(
            [
                np.log(params.lengthscales),
                [math.log(params.signal_variance)],
                [np.log(params.noise_variance)],
            ]
        )


def log_marginal_likelihood(params: KernelParams, X, y, return_grad: bool = False):
    """Log marginal likelihood of standardised targets under the kernel.

    Computes -1/2 y^T K^-1 y - 1/2 log|K| - (t/2) log 2pi with
    K = kernel matrix + noise * I (plus the standard jitter rung).

    Args:
        params: Kernel hyperparameters.
        X: Inputs of shape (t, d).
        y: Standardised targets of shape (t,).
        return_grad: Also return the gradient with respect to the log
            parameters, ordered [log lengthscales..., log signal, log noise].

    Returns:
        The scalar value, or (value, gradient) when return_grad is set.

    Raises:
        np.linalg.LinAlgError: If the kernel matrix is not positive definite
            after jitter escalation.
    """
    X = np.atleast_2d(as_float_array(X, "X"))
    y = as_float_array(y, "y", ndim=1)
    if X.shape[0] != y.size or X.shape[0] < 1:
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if X.shape[1] != params.dimension:
        raise ValueError("input dimension does not match kernel dimension")
    theta = _params_to_theta(params)
    sq_diffs = _pairwise_sq_diffs(X, X)
    if not return_grad:
        return _lml_terms(theta, sq_diffs, y)[0]
    return _lml_and_grad(theta, sq_diffs, y)


class GaussianProcess(RegressorMixin, BaseEstimator):
    """GP regressor with a Matern-5/2 ARD kernel for unit-hypercube inputs.

    Targets are standardised to zero mean and unit variance before fitting
    and predictions are mapped back to raw units. Kernel hyperparameters are
    chosen by multi-start quasi-Newton ascent of the log marginal likelihood
    with analytic gradients; the winner is the restart with the best final
    value, ties broken by the lowest restart index.

    Args:
        n_restarts: Number of optimisation restarts.
        max_iter: Iteration cap per restart.
        random_state: Seed for the restart initialisation draws.
        kernel_params: If given, skip optimisation and use these
            hyperparameters as-is (still standardising the targets).
        standardize: Standardise targets before fitting (default). Disable
            to model raw targets directly, e.g. when they are already
            standardised.

    Attributes (after fit):
        X_: Training inputs, shape (t, d).
        y_: Raw training targets, shape (t,).
        y_mean_, y_scale_: Standardisation constants.
        kernel_: Fitted KernelParams.
        L_: Lower Cholesky factor of the regularised kernel matrix.
        alpha_: Solved weights, K^-1 y_standardised.
        jitter_: Diagonal jitter actually added.
        lml_: Log marginal likelihood at the fitted parameters.
    """

    def __init__(
        self,
        n_restarts: int = N_RESTARTS,
        max_iter: int = MAX_ITER,
        random_state: int | None = None,
        kernel_params: KernelParams | None = None,
        standardize: bool = True,
    ):
        self.n_restarts = n_restarts
        self.max_iter = max_iter
        self.random_state = random_state
        self.kernel_params = kernel_params
        self.standardize = standardize

    def fit(self, X, y) -> "GaussianProcess":
        """Fit the surrogate to raw-score observations.

        Args:
            X: Encoded inputs of shape (t, d), coordinates in [0, 1].
            y: Raw scores of shape (t,), lower is better.

        Returns:
            self.
        """
        X = np.atleast_2d(as_float_array(X, "X"))
        y = as_float_array(y, "y", ndim=1)
        if X.shape[0] != y.size or y.size < 1:
            raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
        if X.min() < 0.0 or X.max() > 1.0:
            raise ValueError("X coordinates must lie in [0, 1]")
        if self.standardize:
            y_mean = float(np.mean(y))
            y_scale = float(np.std(y))
            if y_scale <= 1e-12 * max(1.0, abs(y_mean)):  # degenerate targets
                y_scale = 1.0
        else:
            y_mean, y_scale = 0.0, 1.0
        z = (y - y_mean) / y_scale
        if self.kernel_params is not None:
            if self.kernel_params.dimension != X.shape[1]:
                raise ValueError("kernel_params dimension does not match X")
            params = self.kernel_params
        else:
            params = self._optimize(X, z)
        self._set_model(X, y, y_mean, y_scale, params)
        return self

    def _optimize(self, X: np.ndarray, z: np.ndarray) -> KernelParams:
        """Multi-start L-BFGS-B ascent of the LML over log parameters."""
        t, d = X.shape
        sq_diffs = _pairwise_sq_diffs(X, X)
        rng = np.random.default_rng(self.random_state)
        lo = np.log(np.r_[np.full(d, LENGTHSCALE_INIT[0]), SIGNAL_INIT[0], NOISE_INIT[0]])
        hi = np.log(np.r_[np.full(d, LENGTHSCALE_INIT[1]), SIGNAL_INIT[1], NOISE_INIT[1]])
        starts = rng.uniform(lo, hi, size=(self.n_restarts, d + 2))
        bounds = (
            [(math.log(LENGTHSCALE_RANGE[0]), math.log(LENGTHSCALE_RANGE[1]))] * d
            + [(math.log(SIGNAL_RANGE[0]), math.log(SIGNAL_RANGE[1]))]
            + [(math.log(NOISE_RANGE[0]), math.log(NOISE_RANGE[1]))]
        )

        def objective(theta):
            try:
                lml, grad = _lml_and_grad(theta, sq_diffs, z)
            except np.linalg.LinAlgError:
                return _BIG, np.zeros_like(theta)
            return -lml, -grad

        best_fun = np.inf
        best_theta = None
        for start in starts:
            res = optimize.minimize(
                objective,
                start,
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": self.max_iter},
            )
            if res.fun < best_fun:
                best_fun = res.fun
                best_theta = res.x
        if best_theta is None or best_fun >= _BIG:
            raise np.linalg.LinAlgError("no restart produced a positive-definite kernel matrix")
        return KernelParams(
            lengthscales=np.exp(best_theta[:-2]),
            signal_variance=math.exp(best_theta[-2]),
            noise_variance=math.exp(best_theta[-1]),
        )

    def _set_model(self, X, y, y_mean, y_scale, params: KernelParams) -> None:
        """Store data and factorise the regularised kernel matrix."""
        z = (y - y_mean) / y_scale
        Kf = kernel_matrix(params, X)
        L, jitter = _factorize(Kf + params.noise_variance * np.eye(len(X)), params.signal_variance)
        self.X_ = X
        self.y_ = y
        self.y_mean_ = y_mean
        self.y_scale_ = y_scale
        self.kernel_ = params
        self.L_ = L
        self.alpha_ = linalg.cho_solve((L, True), z)
        self.jitter_ = jitter
        self.lml_ = (
            -0.5 * float(z @ self.alpha_)
            - float(np.sum(np.log(np.diag(L))))
            - 0.5 * len(y) * _LOG_2PI
        )

    def predict(self, X, return_var: bool = False):
        """Posterior mean (and optionally variance) in raw score units.

        Args:
            X: Query points of shape (n, d) or a single (d,) vector.
            return_var: Also return the clamped posterior variance.

        Returns:
            Mean array (or scalar for a single vector); with return_var, a
            (mean, variance) tuple.
        """
        check_is_fitted(self)
        U = check_unit_coords(X, self.X_.shape[1], "X")
        single = U.ndim == 1
        U = np.atleast_2d(U)
        Ks = kernel_matrix(self.kernel_, self.X_, U)
        mean = (Ks.T @ self.alpha_) * self.y_scale_ + self.y_mean_
        if not return_var:
            return float(mean[0]) if single else mean
        v = linalg.solve_triangular(self.L_, Ks, lower=True)
        var_std = self.kernel_.signal_variance - np.sum(v * v, axis=0)
        var = np.maximum(var_std, 0.0) * self.y_scale_**2
        if single:
            return float(mean[0]), float(var[0])
        return mean, var

    def posterior(self, u) -> PosteriorPrediction:
        """Posterior at a single point as a PosteriorPrediction."""
        mean, var = self.predict(u, return_var=True)
        return PosteriorPrediction(mean=mean, variance=var)

    def posterior_gradients(self, U):
        """Posterior mean/variance and their coordinate gradients, batched.

        Args:
            U: Query points of shape (n, d).

        Returns:
            (mean, var, dmean, dvar): arrays of shapes (n,), (n,), (n, d),
            (n, d), all in raw units. Variance is clamped at zero; its
            gradient is the analytic one of the unclamped value.
        """
        check_is_fitted(self)
        U = np.atleast_2d(check_unit_coords(U, self.X_.shape[1], "U"))
        params = self.kernel_
        inv_ls2 = 1.0 / params.lengthscales**2
        diff = U[:, None, :] - self.X_[None, :, :]  # (n, t, d)
        r2, _, g, e = _matern_terms(diff**2, inv_ls2)
        Ks = params.signal_variance * (g + (5.0 / 3.0) * r2) * e  # (n, t)
        ge = g * e
        # d k(u, x_i) / d u_j = -(5/3) signal (1+sqrt5 r) e^{-sqrt5 r} diff_j / ls_j^2
        dKs = (-(5.0 / 3.0) * params.signal_variance) * ge[:, :, None] * diff * inv_ls2
        mean = (Ks @ self.alpha_) * self.y_scale_ + self.y_mean_
        dmean = np.einsum("ntd,t->nd", dKs, self.alpha_) * self.y_scale_
        w = linalg.cho_solve((self.L_, True), Ks.T)  # (t, n) = K^-1 k*
        var_std = params.signal_variance - np.sum(Ks.T * w, axis=0)
        var = np.maximum(var_std, 0.0) * self.y_scale_**2
        dvar = -2.0 * np.einsum("ntd,tn->nd", dKs, w) * self.y_scale_**2
        return mean, var, dmean, dvar

    def to_dict(self) -> dict:
        """JSON-serialisable form: kernel, standardisation, raw data."""
        check_is_fitted(self)
        return {
            "kernel": {
                "lengthscales": self.kernel_.lengthscales.tolist(),
                "signal_variance": self.kernel_.signal_variance,
                "noise_variance": self.kernel_.noise_variance,
            },
            "y_mean": self.y_mean_,
            "y_scale": self.y_scale_,
            "X": self.X_.tolist(),
            "y": self.y_.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GaussianProcess":
        """Rebuild a fitted model; the Cholesky factor is recomputed."""
        params = KernelParams(
            lengthscales=np.asarray(doc["kernel"]["lengthscales"], dtype=float),
            signal_variance=doc["kernel"]["signal_variance"],
            noise_variance=doc["kernel"]["noise_variance"],
        )
        model = cls(kernel_params=params)
        X = np.asarray(doc["X"], dtype=float)
        y = np.asarray(doc["y"], dtype=float)
        model._set_model(X, y, float(doc["y_mean"]), float(doc["y_scale"]), params)
        return model

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "GaussianProcess":
        return cls.from_dict(json.loads(text))
