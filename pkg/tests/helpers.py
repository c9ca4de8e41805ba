import numpy as np

from cfsurv import RightCensoredSample


def random_sample(rng, n=None, p=None, censor_prob=0.4, arm=0, min_events=1):
    n = int(rng.integers(2, 51)) if n is None else n
    p = int(rng.integers(1, 4)) if p is None else p
    time = np.round(rng.exponential(2.0, n) + 0.05, 3)
    event = (rng.random(n) >= censor_prob).astype(int)
    if event.sum() < min_events:
        event[rng.choice(n, min_events, replace=False)] = 1
    x = rng.normal(size=(n, p))
    return RightCensoredSample(time=time, event=event, arm=np.full(n, arm), covariates=x)


# doubling ladder from 1e-3 up to about 1e3
EPS_LADDER = 1e-3 * 2.0 ** np.arange(21)


def random_instance(rng, censor_prob=0.4, n_max=50):
    """A weighted control arm, treated covariates and kernels for embedding tests."""
    from cfsurv import GaussianKernel, build_weighted_arm, median_heuristic, time_grid

    n = int(rng.integers(2, n_max + 1))
    p = int(rng.integers(1, 4))
    control = random_sample(rng, n=n, p=p, censor_prob=censor_prob)
    x1 = rng.normal(loc=0.5, size=(int(rng.integers(1, 30)), p))
    cov = GaussianKernel(median_heuristic(np.vstack([control.covariates, x1])))
    tk = GaussianKernel(median_heuristic(control.time))
    grid = time_grid(control.time, 25)
    return build_weighted_arm(control), x1, (cov, tk), grid


def ladder_sup_norms(arm, x1, kernels, grid, ladder=EPS_LADDER):
    from cfsurv import RidgeSolveConfig, counterfactual_embedding

    return np.array([
        np.max(np.abs(counterfactual_embedding(arm, x1, kernels, RidgeSolveConfig(epsilon=e),
                                               grid).grid_values))
        for e in ladder
    ])


def write_trial_csv(path, n=400, seed=0):
    """Write a synthetic trial with the nine named covariates to ``path``."""
    from cfsurv.simulate import synthetic_trial

    columns, rows = synthetic_trial(n=n, seed=seed)
    lines = [",".join(columns)]
    for r in rows:
        lines.append(",".join([f"{r[0]:g}", str(int(r[1])), str(int(r[2]))] + [f"{v:.2f}" for v in r[3:]]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# criterion number -> list of (label, passed, detail); printed at the end of the run
ACCEPTANCE = {}


def record(criterion, label, passed, detail):
    ACCEPTANCE.setdefault(criterion, []).append((label, bool(passed), detail))
    return passed
