"""scikit-learn style estimators wrapping the embedding routines."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .dataset import RightCensoredSample, standardize_covariates
from .embedding import (
    RidgeSolveConfig,
    counterfactual_from_fit,
    decompose,
    fit_conditional_coefficients,
)
from .kernels import GaussianKernel, gram, median_heuristic, time_grid
from .survival import build_weighted_arm
from .validation import check_arm, check_survival_data

__all__ = ["CounterfactualMeanEmbedding", "SurvivalEmbeddingDecomposition"]


class _RidgeParamsMixin:
    def _ridge_config(self):
        return RidgeSolveConfig(
            epsilon=self.epsilon,
            constant=self.epsilon_constant,
            exponent=self.epsilon_exponent,
            solver=self.solver,
        )


class CounterfactualMeanEmbedding(_RidgeParamsMixin, BaseEstimator):
    """Conditional mean embedding of a right-censored outcome.

    Fits the IPCW-weighted kernel ridge regression of time-kernel sections on
    covariates for one arm. ``predict`` returns the conditional embedding at
    new covariates, and ``embed`` averages it over a covariate sample to give
    the counterfactual embedding.

    Parameters
    ----------
    epsilon : float or None, default=None
        Fixed ridge regulariser. When None, ``epsilon_constant *
        n ** -epsilon_exponent`` is used.
    epsilon_constant : float, default=0.1
    epsilon_exponent : float, default=1/3
        Must lie in (0, 1/2).
    covariate_sigma2, time_sigma2 : float or None, default=None
        Squared Gaussian bandwidths. None means the median heuristic on the
        training covariates / observed times.
    solver : {"general", "symmetric"}, default="general"
    grid_size : int, default=100
        Size of the default evaluation grid ``grid_`` spanning the training
        times.

    Attributes
    ----------
    weights_ : ndarray of shape (n_samples,)
        IPCW weights, zero for censored rows.
    censor_survival_ : StepFunction
        Reverse Kaplan-Meier estimate used for the weights.
    ridge_ : RidgeFit
    covariate_kernel_, time_kernel_ : GaussianKernel
    epsilon_ : float
    grid_ : ndarray of shape (grid_size,)
    """

    def __init__(
        self,
        epsilon=None,
        epsilon_constant=0.1,
        epsilon_exponent=1.0 / 3.0,
        covariate_sigma2=None,
        time_sigma2=None,
        solver="general",
        grid_size=100,
    ):
        self.epsilon = epsilon
        self.epsilon_constant = epsilon_constant
        self.epsilon_exponent = epsilon_exponent
        self.covariate_sigma2 = covariate_sigma2
        self.time_sigma2 = time_sigma2
        self.solver = solver
        self.grid_size = grid_size

    def fit(self, X, y):
        """Fit on covariates ``X`` and a survival target ``y`` (time, event)."""
        X, time, event = check_survival_data(X, y)
        sample = RightCensoredSample.from_arrays(time, event, X)
        arm = build_weighted_arm(sample)
        self.covariate_kernel_ = GaussianKernel(
            self.covariate_sigma2 if self.covariate_sigma2 is not None else median_heuristic(X)
        )
        self.time_kernel_ = GaussianKernel(
            self.time_sigma2 if self.time_sigma2 is not None else median_heuristic(time)
        )
        self.ridge_ = fit_conditional_coefficients(arm, self.covariate_kernel_, self._ridge_config())
        self.weights_ = arm.weights
        self.censor_survival_ = arm.censor_survival
        self.n_capped_ = arm.n_capped
        self.epsilon_ = self.ridge_.epsilon
        self.grid_ = time_grid(time, self.grid_size)
        self.n_features_in_ = X.shape[1]
        return self

    def _check_X(self, X):
        check_is_fitted(self, "ridge_")
        X = check_array(X, ensure_2d=True, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def predict(self, X, grid=None):
        """Conditional embedding at each row of ``X``, shape ``(len(X), len(grid))``."""
        X = self._check_X(X)
        grid = self.grid_ if grid is None else np.asarray(grid, dtype=float)
        k_cross = gram(self.covariate_kernel_, self.ridge_.support_covariates, X)
        h = gram(self.time_kernel_, self.ridge_.support_times, grid)
        return k_cross.T @ self.ridge_.solution @ h

    def embed(self, X, grid=None, label="mu<0|1>"):
        """Counterfactual embedding averaged over the covariate sample ``X``."""
        X = self._check_X(X)
        grid = self.grid_ if grid is None else np.asarray(grid, dtype=float)
        return counterfactual_from_fit(self.ridge_, X, self.time_kernel_, grid, label)


class SurvivalEmbeddingDecomposition(_RidgeParamsMixin, BaseEstimator):
    """Split the gap between two arms' outcome embeddings.

    After ``fit(X, y, arm=...)``, ``decomposition_`` holds ``term_a``
    (covariate composition), ``term_b`` (effect on the treated) and their sum
    ``total`` evaluated on ``grid_``.

    Bandwidths default to the median heuristic on the pooled covariates and
    on all observed times, so both arms share one pair of kernels.
    ``observational`` picks the estimator for each arm's own embedding:
    ``"ipcw"`` (weighted empirical mean) or ``"conditional"``.
    """

    def __init__(
        self,
        epsilon=None,
        epsilon_constant=0.1,
        epsilon_exponent=1.0 / 3.0,
        covariate_sigma2=None,
        time_sigma2=None,
        solver="general",
        grid_size=100,
        observational="ipcw",
        standardize=False,
    ):
        self.epsilon = epsilon
        self.epsilon_constant = epsilon_constant
        self.epsilon_exponent = epsilon_exponent
        self.covariate_sigma2 = covariate_sigma2
        self.time_sigma2 = time_sigma2
        self.solver = solver
        self.grid_size = grid_size
        self.observational = observational
        self.standardize = standardize

    def fit(self, X, y, arm):
        X, time, event = check_survival_data(X, y, require_event=False)
        arm = check_arm(arm, X.shape[0])
        sample = RightCensoredSample.from_arrays(time, event, X, arm=arm)
        return self.fit_sample(sample)

    def fit_sample(self, sample: RightCensoredSample):
        """Fit directly on a :class:`RightCensoredSample`."""
        if self.standardize:
            sample, self.scaling_ = standardize_covariates(sample)
        self.covariate_kernel_ = GaussianKernel(
            self.covariate_sigma2 if self.covariate_sigma2 is not None
            else median_heuristic(sample.covariates)
        )
        self.time_kernel_ = GaussianKernel(
            self.time_sigma2 if self.time_sigma2 is not None else median_heuristic(sample.time)
        )
        self.grid_ = time_grid(sample.time, self.grid_size)
        self.decomposition_ = decompose(
            sample,
            (self.covariate_kernel_, self.time_kernel_),
            self._ridge_config(),
            self.grid_,
            observational=self.observational,
        )
        self.epsilon_ = self.decomposition_.epsilon
        self.n_features_in_ = sample.covariate_dim
        self.censoring_fraction_ = {
            a: float(1 - sample.event[sample.arm == a].mean()) for a in (0, 1)
        }
        return self

    @property
    def curves_(self):
        check_is_fitted(self, "decomposition_")
        return self.decomposition_.curves()
