"""Log-normal AFT simulation study and empirical convergence-rate experiment.

Each arm follows

    log T = a * z + X1 + X2 + e,    e  ~ N(c_z, s_e^2)
    log C = a * z + X1 + X2 + e',   e' ~ N(0, s_c^2)

with ``X1, X2`` independent unit normals, ``X1`` shifted by
``treated_mean_shift`` in the treated arm and ``a = intercept_treated``.
The observed time is ``min(T, C)``.

Random streams are keyed by ``(seed, n_control, n_treated, run, attempt)`` so
every run is reproducible on its own and independent of how many other runs
are executed or in which order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import stats

from .dataset import RightCensoredSample
from .embedding import RidgeSolveConfig, counterfactual_coefficients, fit_conditional_coefficients
from .exceptions import DegenerateCensoring
from .kernels import GaussianKernel, gram, median_heuristic
from .survival import build_weighted_arm

__all__ = [
    "SimConfig",
    "StudyReport",
    "RateReport",
    "generate_arm",
    "population_embedding_oracle",
    "study_design",
    "variability_study",
    "fit_rate",
    "rate_experiment",
    "synthetic_trial",
]

# stream tags, kept outside the range of run indices
_PILOT_STREAM = 0xA11CE
_ORACLE_STREAM = 0x0CA1E
_MAX_ATTEMPTS = 1000


@dataclass(frozen=True)
class SimConfig:
    n_control: int = 100
    n_treated: int = 100
    c0: float = 0.2
    c1: float = 0.1
    treated_mean_shift: float = 0.5
    intercept_treated: float = 2.0
    event_noise_sd: float = 1.0
    censor_noise_sd: float = 1.0
    seed: int = 0
    B: int = 100
    grid_size: int = 100
    n_mc: int = 200_000
    epsilon: float | None = None
    epsilon_constant: float = 0.1
    epsilon_exponent: float = 1.0 / 3.0
    pilot_size: int = 1000
    grid_quantile: float = 0.75
    threads: int = 1

    def __post_init__(self):
        if self.n_control < 2 or self.n_treated < 2:
            raise ValueError("each arm needs at least two units")
        if self.B < 1:
            raise ValueError("B must be at least 1")
        if self.grid_size < 2:
            raise ValueError("grid_size must be at least 2")
        if not 0 < self.grid_quantile <= 1:
            raise ValueError("grid_quantile must lie in (0, 1]")
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.threads < 1:
            raise ValueError("threads must be positive")

    def ridge_config(self) -> RidgeSolveConfig:
        return RidgeSolveConfig(
            epsilon=self.epsilon,
            constant=self.epsilon_constant,
            exponent=self.epsilon_exponent,
        )


def generate_arm(config: SimConfig, arm: int, rng: np.random.Generator, n: int | None = None) -> RightCensoredSample:
    """Draw one arm of the simulation model."""
    if arm not in (0, 1):
        raise ValueError("arm must be 0 or 1")
    if n is None:
        n = config.n_treated if arm else config.n_control
    shift = config.treated_mean_shift if arm else 0.0
    c = config.c1 if arm else config.c0
    x = rng.standard_normal((n, 2))
    x[:, 0] += shift
    lin = config.intercept_treated * arm + x[:, 0] + x[:, 1]
    log_t = lin + c + config.event_noise_sd * rng.standard_normal(n)
    log_c = lin + config.censor_noise_sd * rng.standard_normal(n)
    event = (log_t <= log_c).astype(int)
    time = np.exp(np.minimum(log_t, log_c))
    return RightCensoredSample(time=time, event=event, arm=np.full(n, arm), covariates=x)


def population_embedding_oracle(
    config: SimConfig,
    conditional_arm: int,
    covariate_arm: int,
    grid,
    time_kernel: GaussianKernel,
    n_mc: int | None = None,
    rng: np.random.Generator | None = None,
    chunk: int = 20_000,
) -> np.ndarray:
    """Monte Carlo value of ``E[l(T, t)]`` on ``grid``.

    Covariates are drawn from the law of ``covariate_arm`` and the uncensored
    event time from the structural equation of ``conditional_arm``.
    """
    n_mc = config.n_mc if n_mc is None else n_mc
    if n_mc < 1000:
        raise ValueError("n_mc must be at least 1000")
    if rng is None:
        rng = np.random.default_rng([config.seed, _ORACLE_STREAM])
    grid = np.asarray(grid, dtype=float)
    shift = config.treated_mean_shift if covariate_arm else 0.0
    c = config.c1 if conditional_arm else config.c0
    total = np.zeros(grid.shape[0])
    done = 0
    while done < n_mc:
        m = min(chunk, n_mc - done)
        x = rng.standard_normal((m, 2))
        x[:, 0] += shift
        log_t = (config.intercept_treated * conditional_arm + x[:, 0] + x[:, 1]
                 + c + config.event_noise_sd * rng.standard_normal(m))
        total += gram(time_kernel, np.exp(log_t), grid).sum(axis=0)
        done += m
    return total / n_mc


def study_design(config: SimConfig) -> tuple[GaussianKernel, np.ndarray]:
    """Time kernel and evaluation grid shared by every run of a study.

    Both come from a pilot draw of ``pilot_size`` units per arm that depends
    only on the seed: the bandwidth is the median heuristic over pooled
    observed times, and the grid runs from the smallest pilot time to its
    ``grid_quantile`` quantile.
    """
    rng = np.random.default_rng([config.seed, _PILOT_STREAM])
    t = np.concatenate([
        generate_arm(config, 0, rng, config.pilot_size).time,
        generate_arm(config, 1, rng, config.pilot_size).time,
    ])
    kernel = GaussianKernel(median_heuristic(t))
    grid = np.linspace(t.min(), np.quantile(t, config.grid_quantile), config.grid_size)
    return kernel, grid


@dataclass
class _Run:
    values: np.ndarray
    censoring: tuple[float, float]
    sigma2_cov: float
    epsilon: float
    resamples: int


def _one_run(config: SimConfig, b: int, time_kernel, grid, ridge) -> _Run:
    for attempt in range(_MAX_ATTEMPTS):
        rng = np.random.default_rng([config.seed, config.n_control, config.n_treated, b, attempt])
        control = generate_arm(config, 0, rng)
        treated = generate_arm(config, 1, rng)
        if not control.event.any() or not treated.event.any():
            continue
        try:
            arm0 = build_weighted_arm(control)
        except DegenerateCensoring:
            continue
        cov_kernel = GaussianKernel(
            median_heuristic(np.vstack([control.covariates, treated.covariates]))
        )
        fit = fit_conditional_coefficients(arm0, cov_kernel, ridge)
        coef = counterfactual_coefficients(fit, treated.covariates)
        values = coef @ gram(time_kernel, control.time, grid)
        return _Run(
            values,
            (control.censoring_fraction, treated.censoring_fraction),
            cov_kernel.sigma2,
            fit.epsilon,
            attempt,
        )
    raise DegenerateCensoring(f"run {b}: no usable draw after {_MAX_ATTEMPTS} attempts")


@dataclass(eq=False)
class StudyReport:
    """Result of :func:`variability_study`."""

    config: SimConfig
    grid: np.ndarray
    per_run_curves: np.ndarray
    mean_curve: np.ndarray
    oracle_curve: np.ndarray
    pointwise_sd: np.ndarray
    censoring_fractions: dict[str, float]
    sigma2_time: float
    sigma2_cov: list[float]
    epsilon: float
    resampled_runs: int

    @property
    def mean_sd(self) -> float:
        """Pointwise standard deviation averaged over the grid."""
        return float(self.pointwise_sd.mean())

    @property
    def mean_abs_error(self) -> float:
        return float(np.abs(self.mean_curve - self.oracle_curve).mean())

    def to_dict(self, include_runs: bool = True) -> dict:
        out = {
            "config": asdict(self.config),
            "grid": self.grid.tolist(),
            "mean_curve": self.mean_curve.tolist(),
            "oracle_curve": self.oracle_curve.tolist(),
            "pointwise_sd": self.pointwise_sd.tolist(),
            "mean_sd": self.mean_sd,
            "mean_abs_error": self.mean_abs_error,
            "censoring_fractions": dict(self.censoring_fractions),
            "sigma2_time": self.sigma2_time,
            "sigma2_cov": list(self.sigma2_cov),
            "epsilon": self.epsilon,
            "resampled_runs": self.resampled_runs,
        }
        if include_runs:
            out["per_run_curves"] = self.per_run_curves.tolist()
        return out


def _threads(config: SimConfig) -> int:
    return max(1, int(config.threads))


def variability_study(config: SimConfig, *, with_oracle: bool = True) -> StudyReport:
    """Fit the control-on-treated counterfactual embedding ``B`` times.

    Runs execute on up to ``config.threads`` threads; results are folded in
    run order, so the report does not depend on the thread count. Draws where
    an arm has no events are redrawn and counted in ``resampled_runs``.
    """
    time_kernel, grid = study_design(config)
    ridge = config.ridge_config()

    def job(b):
        return _one_run(config, b, time_kernel, grid, ridge)

    if _threads(config) == 1:
        runs = [job(b) for b in range(config.B)]
    else:
        with ThreadPoolExecutor(max_workers=_threads(config)) as pool:
            runs = list(pool.map(job, range(config.B)))

    curves = np.vstack([r.values for r in runs])
    mean_curve = curves.mean(axis=0)
    sd = curves.std(axis=0, ddof=1) if config.B > 1 else np.zeros(grid.shape[0])
    if with_oracle:
        oracle = population_embedding_oracle(config, 0, 1, grid, time_kernel)
    else:
        oracle = np.full(grid.shape[0], np.nan)
    cens = np.array([r.censoring for r in runs])
    return StudyReport(
        config=config,
        grid=grid,
        per_run_curves=curves,
        mean_curve=mean_curve,
        oracle_curve=oracle,
        pointwise_sd=sd,
        censoring_fractions={"control": float(cens[:, 0].mean()), "treated": float(cens[:, 1].mean())},
        sigma2_time=time_kernel.sigma2,
        sigma2_cov=[r.sigma2_cov for r in runs],
        epsilon=runs[0].epsilon,
        resampled_runs=int(sum(r.resamples > 0 for r in runs)),
    )


@dataclass
class RateReport:
    sample_sizes: list[int]
    V: list[float]
    fitted_slope: float
    fitted_intercept: float
    r_squared: float
    slope_stderr: float = float("nan")
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def fit_rate(sample_sizes, V) -> tuple[float, float, float, float]:
    """OLS of ``log V`` on ``log n``.

    Returns ``(gamma, log_c, r_squared, gamma_stderr)`` for the model
    ``log V = log_c - gamma * log n``.
    """
    n = np.asarray(sample_sizes, dtype=float)
    v = np.asarray(V, dtype=float)
    if n.shape != v.shape or n.size < 2:
        raise ValueError("need matching sizes and V with at least two entries")
    if np.any(v <= 0) or np.any(n <= 0):
        raise ValueError("sizes and V must be positive")
    x, y = np.log(n), np.log(v)
    if np.ptp(y) == 0:
        # constant V: zero slope, and a perfect (degenerate) fit
        return 0.0, float(y[0]), 1.0, 0.0
    res = stats.linregress(x, y)
    return float(-res.slope), float(res.intercept), float(res.rvalue**2), float(res.stderr)


def rate_experiment(
    sizes=(100, 200, 300, 400, 500, 600),
    B: int = 100,
    seed: int = 0,
    linear_truth: bool = True,
    threads: int = 1,
    **overrides,
) -> RateReport:
    """Regress the log grid-averaged pointwise sd on log sample size.

    Each size ``n`` puts ``n`` units in both arms. Only the log-linear
    model is available, so ``linear_truth=False`` is rejected.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 3:
        raise ValueError("rate experiment needs at least three sample sizes")
    if B < 20:
        raise ValueError("rate experiment needs B >= 20")
    if not linear_truth:
        raise ValueError("only the log-linear simulation model is implemented")
    base = SimConfig(seed=seed, B=B, threads=threads, **overrides)
    V = []
    for n in sizes:
        report = variability_study(replace(base, n_control=n, n_treated=n), with_oracle=False)
        V.append(report.mean_sd)
    gamma, intercept, r2, se = fit_rate(sizes, V)
    cfg = asdict(base)
    cfg.pop("n_control")
    cfg.pop("n_treated")
    cfg["sizes"] = sizes
    return RateReport(sizes, V, gamma, intercept, r2, se, cfg)


TRIAL_COVARIATES = ("DBP.1yr", "DBP.rz", "AGE", "CHR", "GLUR", "HDL", "TRR", "UMALCR", "BMI")


def synthetic_trial(n: int = 2000, seed: int = 0, event_rate: float = 0.1):
    """Synthetic two-arm trial with nine named covariates and rare events.

    Returns ``(columns, rows)`` with columns ``time, event, arm`` followed by
    the covariates; intended as a stand-in for restricted trial data.
    """
    rng = np.random.default_rng([seed, n])
    arm = rng.integers(0, 2, n)
    loc = np.array([70, 78, 80, 190, 98, 53, 125, 40, 28], dtype=float)
    scale = np.array([11, 12, 4, 40, 13, 15, 80, 90, 5], dtype=float)
    x = loc + scale * rng.standard_normal((n, 9))
    x[:, 0] -= 5 * arm
    x[:, [6, 7]] = np.abs(x[:, [6, 7]])
    risk = 0.02 * (x[:, 2] - 80) - 0.015 * (x[:, 0] - 70) - 0.2 * arm
    # event times from an exponential hazard scaled to the requested event rate
    follow_up = rng.uniform(900, 1800, n)
    base_rate = -np.log(1 - event_rate) / follow_up.mean()
    t_event = rng.exponential(1.0 / (base_rate * np.exp(risk)))
    event = (t_event <= follow_up).astype(int)
    time = np.ceil(np.minimum(t_event, follow_up))
    columns = ["time", "event", "arm", *TRIAL_COVARIATES]
    rows = np.column_stack([time, event, arm, np.round(x, 2)])
    return columns, rows
