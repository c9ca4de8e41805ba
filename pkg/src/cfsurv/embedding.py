"""Censoring-weighted kernel ridge estimation of survival mean embeddings.

The conditional embedding of the control arm is the minimiser of the
IPCW-weighted vector-valued ridge risk. With ``W = diag(weights)``, ``K`` the
covariate Gram matrix of the control arm and ``n`` its size, the representer
coefficients satisfy ``(W K + n eps I) C = W H`` where row ``i`` of ``H`` is
the time-kernel section ``l(T_i, .)``. Everything downstream is expressed
through the solution operator ``M = (W K + n eps I)^{-1} W`` so that ``H`` is
never needed until evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .dataset import RightCensoredSample, split_arms
from .exceptions import DegenerateCensoring, DimensionMismatch, EmptyInput, SingularSystem
from .kernels import GaussianKernel, as_points, gram, median_heuristic, time_grid
from .survival import WeightedArm, build_weighted_arm

__all__ = [
    "RidgeSolveConfig",
    "RidgeFit",
    "EmbeddingCurve",
    "DecompositionCurves",
    "fit_conditional_coefficients",
    "counterfactual_embedding",
    "dual_form_check",
    "observational_embedding",
    "decompose",
    "rkhs_norm",
    "depth_evaluate",
    "default_kernels",
]

DEFAULT_GRID_SIZE = 100


@dataclass(frozen=True)
class RidgeSolveConfig:
    """Regulariser and solver choice.

    ``rule="n_power"`` (default) uses ``eps_n = constant * n ** -exponent``
    with ``n`` the size of the arm being regressed; ``rule="fixed"`` uses
    ``epsilon`` as given. ``solver`` is ``"general"`` (LU on the
    non-symmetric system) or ``"symmetric"`` (Cholesky on
    ``W^1/2 K W^1/2 + n eps I``).
    """

    epsilon: float | None = None
    rule: str = "n_power"
    constant: float = 0.1
    exponent: float = 1.0 / 3.0
    solver: str = "general"

    def __post_init__(self):
        if self.epsilon is not None and self.rule == "n_power":
            object.__setattr__(self, "rule", "fixed")
        if self.rule not in ("fixed", "n_power"):
            raise ValueError(f"unknown epsilon rule {self.rule!r}")
        if self.rule == "fixed":
            if self.epsilon is None or not (np.isfinite(self.epsilon) and self.epsilon > 0):
                raise ValueError("fixed rule needs a positive finite epsilon")
        else:
            if not self.constant > 0:
                raise ValueError("epsilon constant must be positive")
            if not 0 < self.exponent < 0.5:
                raise ValueError("epsilon exponent must lie in (0, 1/2)")
        if self.solver not in ("general", "symmetric"):
            raise ValueError(f"unknown solver {self.solver!r}")

    def resolve(self, n: int) -> float:
        if self.rule == "fixed":
            return float(self.epsilon)
        return float(self.constant * n ** (-self.exponent))


@dataclass(frozen=True, eq=False)
class RidgeFit:
    """Solution operator of the weighted ridge system for one arm.

    ``solution`` is ``M = (W K + n eps I)^{-1} W``; the representer
    coefficients for any matrix of targets ``H`` are ``M @ H``.
    """

    solution: np.ndarray
    gram: np.ndarray
    weights: np.ndarray
    epsilon: float
    covariate_kernel: GaussianKernel
    support_covariates: np.ndarray
    support_times: np.ndarray

    @property
    def n(self) -> int:
        return int(self.weights.shape[0])

    def system_matrix(self) -> np.ndarray:
        return self.weights[:, None] * self.gram + self.n * self.epsilon * np.eye(self.n)

    def coefficients(self, targets) -> np.ndarray:
        return self.solution @ np.asarray(targets, dtype=float)

    def residual(self, targets) -> float:
        """``max |(W K + n eps I) C - W H|`` for ``C = M H``."""
        h = np.asarray(targets, dtype=float)
        if h.ndim == 1:
            h = h[:, None]
        r = self.system_matrix() @ self.coefficients(h) - self.weights[:, None] * h
        return float(np.max(np.abs(r)))


def _solve_general(w, k, ne):
    a = w[:, None] * k + ne * np.eye(w.shape[0])
    try:
        m = scipy.linalg.solve(a, np.diag(w), check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem(str(exc)) from exc
    return m


def _solve_symmetric(w, k, ne):
    s = np.sqrt(w)
    a = s[:, None] * k * s[None, :] + ne * np.eye(w.shape[0])
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem(str(exc)) from exc
    return s[:, None] * scipy.linalg.cho_solve(factor, np.diag(s))


def fit_conditional_coefficients(
    weighted: WeightedArm,
    covariate_kernel: GaussianKernel,
    config: RidgeSolveConfig | None = None,
) -> RidgeFit:
    """Solve the weighted ridge system for one arm."""
    config = config or RidgeSolveConfig()
    w = np.asarray(weighted.weights, dtype=float)
    if not np.any(w > 0):
        raise DegenerateCensoring("arm has no uncensored observation")
    x = as_points(weighted.covariates)
    n = x.shape[0]
    eps = config.resolve(n)
    k = gram(covariate_kernel, x, x)
    solve = _solve_symmetric if config.solver == "symmetric" else _solve_general
    m = solve(w, k, n * eps)
    if not np.all(np.isfinite(m)):
        raise SingularSystem("non-finite entries in the ridge solution")
    return RidgeFit(m, k, w, eps, covariate_kernel, x, np.asarray(weighted.times, dtype=float))


def rkhs_norm(points, coefficients, time_kernel: GaussianKernel) -> float:
    """RKHS norm of ``sum_i a_i l(s_i, .)``, i.e. ``sqrt(a' L a)``."""
    a = np.asarray(coefficients, dtype=float).reshape(-1)
    s = as_points(points)
    if s.shape[0] == 0:
        raise EmptyInput("expansion is empty")
    if s.shape[0] != a.shape[0]:
        raise DimensionMismatch("one coefficient per support point is required")
    q = float(a @ gram(time_kernel, s, s) @ a)
    return float(np.sqrt(max(q, 0.0)))


@dataclass(frozen=True, eq=False)
class EmbeddingCurve:
    """An element ``sum_i coefficients[i] * l(expansion_times[i], .)``.

    ``grid_values`` caches the function on ``grid``. Curves sharing a grid
    and time kernel can be added and subtracted; the expansions are
    concatenated and the grid values combined entrywise.
    """

    expansion_times: np.ndarray
    coefficients: np.ndarray
    grid: np.ndarray
    grid_values: np.ndarray
    time_kernel: GaussianKernel
    label: str = ""

    @classmethod
    def from_coefficients(cls, times, coefficients, grid, time_kernel, label=""):
        times = np.asarray(times, dtype=float).reshape(-1)
        coefficients = np.asarray(coefficients, dtype=float).reshape(-1)
        grid = np.asarray(grid, dtype=float).reshape(-1)
        values = coefficients @ gram(time_kernel, times, grid)
        return cls(times, coefficients, grid, values, time_kernel, label)

    def __call__(self, t):
        return depth_evaluate(self, t)

    def rkhs_norm(self) -> float:
        return rkhs_norm(self.expansion_times, self.coefficients, self.time_kernel)

    def _combine(self, other: "EmbeddingCurve", sign: float, label: str) -> "EmbeddingCurve":
        if self.time_kernel != other.time_kernel:
            raise ValueError("curves use different time kernels")
        if self.grid.shape != other.grid.shape or np.any(self.grid != other.grid):
            raise ValueError("curves are evaluated on different grids")
        return EmbeddingCurve(
            np.concatenate([self.expansion_times, other.expansion_times]),
            np.concatenate([self.coefficients, sign * other.coefficients]),
            self.grid,
            self.grid_values + sign * other.grid_values,
            self.time_kernel,
            label,
        )

    def __add__(self, other):
        return self._combine(other, 1.0, f"{self.label} + {other.label}")

    def __sub__(self, other):
        return self._combine(other, -1.0, f"{self.label} - {other.label}")

    def relabel(self, label: str) -> "EmbeddingCurve":
        return EmbeddingCurve(self.expansion_times, self.coefficients, self.grid,
                              self.grid_values, self.time_kernel, label)


def depth_evaluate(curve: EmbeddingCurve, t):
    """Evaluate the embedding at ``t``.

    For a mean embedding with a radial kernel this is the kernel depth of
    ``t`` with respect to the embedded distribution.
    """
    tt = np.asarray(t, dtype=float)
    vals = curve.coefficients @ gram(curve.time_kernel, curve.expansion_times, tt.reshape(-1))
    return float(vals[0]) if tt.ndim == 0 else vals.reshape(tt.shape)


def _check_treated(fit: RidgeFit, treated_covariates) -> np.ndarray:
    x1 = as_points(treated_covariates)
    if x1.shape[0] == 0:
        raise EmptyInput("no covariates to average over")
    if x1.shape[1] != fit.support_covariates.shape[1]:
        raise DimensionMismatch(
            f"covariate dimension {x1.shape[1]} does not match the fitted "
            f"dimension {fit.support_covariates.shape[1]}"
        )
    return x1


def counterfactual_coefficients(fit: RidgeFit, treated_covariates) -> np.ndarray:
    """Expansion coefficients ``M' K~ 1_m`` over the fitted arm's times."""
    x1 = _check_treated(fit, treated_covariates)
    mean_section = gram(fit.covariate_kernel, fit.support_covariates, x1).mean(axis=1)
    return fit.solution.T @ mean_section


def counterfactual_from_fit(fit, treated_covariates, time_kernel, grid, label="mu<0|1>"):
    coef = counterfactual_coefficients(fit, treated_covariates)
    return EmbeddingCurve.from_coefficients(fit.support_times, coef, grid, time_kernel, label)


def counterfactual_embedding(
    control: WeightedArm,
    treated_covariates,
    kernels: tuple[GaussianKernel, GaussianKernel],
    config: RidgeSolveConfig | None = None,
    grid=None,
    label: str = "mu<0|1>",
) -> EmbeddingCurve:
    """Embedding of the control arm's outcome law averaged over other covariates.

    ``kernels`` is ``(covariate_kernel, time_kernel)``. When ``grid`` is
    omitted a default grid over the control arm's times is used.
    """
    cov_kernel, time_kernel = kernels
    fit = fit_conditional_coefficients(control, cov_kernel, config)
    if grid is None:
        grid = time_grid(control.times, DEFAULT_GRID_SIZE)
    return counterfactual_from_fit(fit, treated_covariates, time_kernel, grid, label)


def dual_form_check(
    control: WeightedArm,
    treated_covariates,
    kernels: tuple[GaussianKernel, GaussianKernel],
    config: RidgeSolveConfig | None = None,
    grid=None,
) -> float:
    """Max abs gap between the column form ``H'W(KW + n eps I)^{-1} K~ 1_m``
    and the row form ``1_m' K~'(WK + n eps I)^{-1} W H`` on the grid.

    Both are computed from scratch with separate solves.
    """
    config = config or RidgeSolveConfig()
    cov_kernel, time_kernel = kernels
    w = np.asarray(control.weights, dtype=float)
    if not np.any(w > 0):
        raise DegenerateCensoring("arm has no uncensored observation")
    x0 = as_points(control.covariates)
    x1 = as_points(treated_covariates)
    if x1.shape[1] != x0.shape[1]:
        raise DimensionMismatch("treated covariates have the wrong dimension")
    n = x0.shape[0]
    ne = n * config.resolve(n)
    if grid is None:
        grid = time_grid(control.times, DEFAULT_GRID_SIZE)
    k = gram(cov_kernel, x0, x0)
    kt1 = gram(cov_kernel, x0, x1).mean(axis=1)
    h = gram(time_kernel, control.times, grid)
    eye = np.eye(n)
    beta = scipy.linalg.solve(k * w[None, :] + ne * eye, kt1)
    column_form = h.T @ (w * beta)
    row_form = kt1 @ scipy.linalg.solve(w[:, None] * k + ne * eye, w[:, None] * h)
    return float(np.max(np.abs(column_form - row_form)))


def observational_embedding(
    arm: WeightedArm,
    time_kernel: GaussianKernel,
    grid=None,
    label: str = "mu<0|0>",
) -> EmbeddingCurve:
    """IPCW empirical mean embedding ``(1/n) sum_i W_i l(T_i, .)`` of one arm."""
    w = np.asarray(arm.weights, dtype=float)
    if not np.any(w > 0):
        raise DegenerateCensoring("arm has no uncensored observation")
    if grid is None:
        grid = time_grid(arm.times, DEFAULT_GRID_SIZE)
    return EmbeddingCurve.from_coefficients(arm.times, w / w.shape[0], grid, time_kernel, label)


@dataclass(frozen=True, eq=False)
class DecompositionCurves:
    """Decomposition of ``mu<0|0> - mu<1|1>`` into a covariate-shift part
    ``term_a = mu<0|0> - mu<0|1>`` and a treatment-on-treated part
    ``term_b = mu<0|1> - mu<1|1>``.
    """

    term_a: EmbeddingCurve
    term_b: EmbeddingCurve
    total: EmbeddingCurve
    components: dict[str, EmbeddingCurve] = field(default_factory=dict)
    epsilon: float = float("nan")
    warnings: tuple[str, ...] = ()

    @property
    def grid(self) -> np.ndarray:
        return self.total.grid

    def curves(self) -> dict[str, EmbeddingCurve]:
        return {"term_a": self.term_a, "term_b": self.term_b, "total": self.total}


def default_kernels(sample: RightCensoredSample) -> tuple[GaussianKernel, GaussianKernel]:
    """Median-heuristic kernels on pooled covariates and on all observed times."""
    return (
        GaussianKernel(median_heuristic(sample.covariates)),
        GaussianKernel(median_heuristic(sample.time)),
    )


def _arm_warnings(arm: WeightedArm, which: int) -> list[str]:
    if arm.n_capped:
        return [f"arm {which}: {arm.n_capped} weight(s) capped at n (zero censoring survival)"]
    return []


def decompose(
    sample: RightCensoredSample,
    kernels: tuple[GaussianKernel, GaussianKernel] | None = None,
    config: RidgeSolveConfig | None = None,
    grid=None,
    *,
    grid_size: int = DEFAULT_GRID_SIZE,
    observational: str = "ipcw",
) -> DecompositionCurves:
    """Split the gap between the arms' outcome embeddings into two terms.

    ``observational="conditional"`` estimates each arm's own embedding by
    averaging its conditional embedding over its own covariates instead of
    the IPCW empirical mean.
    """
    if observational not in ("ipcw", "conditional"):
        raise ValueError(f"unknown observational estimator {observational!r}")
    control, treated = split_arms(sample)
    if kernels is None:
        kernels = default_kernels(sample)
    cov_kernel, time_kernel = kernels
    if grid is None:
        grid = time_grid(sample.time, grid_size)
    grid = np.asarray(grid, dtype=float)
    config = config or RidgeSolveConfig()

    arm0 = build_weighted_arm(control)
    arm1 = build_weighted_arm(treated)
    fit0 = fit_conditional_coefficients(arm0, cov_kernel, config)
    mu01 = counterfactual_from_fit(fit0, treated.covariates, time_kernel, grid, "mu<0|1>")
    if observational == "ipcw":
        mu00 = observational_embedding(arm0, time_kernel, grid, "mu<0|0>")
        mu11 = observational_embedding(arm1, time_kernel, grid, "mu<1|1>")
    else:
        fit1 = fit_conditional_coefficients(arm1, cov_kernel, config)
        mu00 = counterfactual_from_fit(fit0, control.covariates, time_kernel, grid, "mu<0|0>")
        mu11 = counterfactual_from_fit(fit1, treated.covariates, time_kernel, grid, "mu<1|1>")

    term_a = (mu00 - mu01).relabel("term_a")
    term_b = (mu01 - mu11).relabel("term_b")
    total = (term_a + term_b).relabel("total")
    return DecompositionCurves(
        term_a,
        term_b,
        total,
        components={"mu<0|0>": mu00, "mu<0|1>": mu01, "mu<1|1>": mu11},
        epsilon=fit0.epsilon,
        warnings=tuple(_arm_warnings(arm0, 0) + _arm_warnings(arm1, 1)),
    )
