"""Product-limit estimators and inverse-probability-of-censoring weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import RightCensoredSample
from .exceptions import DegenerateCensoring, EmptyInput, LengthMismatch, NonBinaryIndicator, NonPositiveTime

__all__ = [
    "StepFunction",
    "WeightedArm",
    "kaplan_meier",
    "reverse_kaplan_meier",
    "evaluate_left",
    "ipcw_weights",
    "build_weighted_arm",
]


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-continuous, piecewise-constant function on ``[0, inf)``.

    ``values_after[k]`` is the value on ``[jump_times[k], jump_times[k+1])``
    and ``initial_value`` the value before the first jump.
    """

    jump_times: np.ndarray
    values_after: np.ndarray
    initial_value: float = 1.0

    def __post_init__(self):
        jt = np.array(self.jump_times, dtype=float).reshape(-1)
        va = np.array(self.values_after, dtype=float).reshape(-1)
        if jt.shape != va.shape:
            raise LengthMismatch("jump_times and values_after differ in length")
        if jt.size > 1 and np.any(np.diff(jt) <= 0):
            raise ValueError("jump_times must be strictly increasing")
        jt.setflags(write=False)
        va.setflags(write=False)
        object.__setattr__(self, "jump_times", jt)
        object.__setattr__(self, "values_after", va)
        object.__setattr__(self, "initial_value", float(self.initial_value))

    def _lookup(self, t, side):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.jump_times, t, side=side) - 1
        vals = np.concatenate(([self.initial_value], self.values_after))
        return vals[k + 1]

    def __call__(self, t):
        """Value at ``t`` (right-continuous: a jump at ``t`` is included)."""
        out = self._lookup(t, "right")
        return float(out) if np.ndim(out) == 0 else out

    def left_limit(self, t):
        out = self._lookup(t, "left")
        return float(out) if np.ndim(out) == 0 else out


def _check_inputs(times, events):
    times = np.asarray(times, dtype=float).reshape(-1)
    events = np.asarray(events).reshape(-1)
    if times.shape[0] != events.shape[0]:
        raise LengthMismatch(f"{times.shape[0]} times but {events.shape[0]} event indicators")
    if times.shape[0] == 0:
        raise EmptyInput("product-limit estimate needs at least one observation")
    bad = np.flatnonzero(~(np.isfinite(times) & (times > 0)))
    if bad.size:
        raise NonPositiveTime(int(bad[0]) + 1, float(times[bad[0]]))
    bad = np.flatnonzero((events != 0) & (events != 1))
    if bad.size:
        raise NonBinaryIndicator(int(bad[0]) + 1, "event", events[bad[0]])
    return times, events.astype(int)


def _risk_table(times, events):
    """Distinct times with at-risk, event and censoring counts."""
    uniq, inverse = np.unique(times, return_inverse=True)
    deaths = np.bincount(inverse, weights=events, minlength=uniq.size)
    total = np.bincount(inverse, minlength=uniq.size)
    censored = total - deaths
    at_risk = total[::-1].cumsum()[::-1]
    return uniq, at_risk.astype(float), deaths, censored


def _product_limit(uniq, numer, denom):
    jumps = numer > 0
    factors = 1.0 - numer[jumps] / denom[jumps]
    return StepFunction(uniq[jumps], np.cumprod(factors), 1.0)


def kaplan_meier(times, events) -> StepFunction:
    """Kaplan-Meier estimate of the event-time survival function.

    Censorings tied with events at ``t`` stay in the risk set at ``t``.

    >>> km = kaplan_meier([2, 3, 5], [1, 0, 1])
    >>> km(2.5), km(5.0)
    (0.6666666666666667, 0.0)
    """
    times, events = _check_inputs(times, events)
    uniq, at_risk, deaths, _ = _risk_table(times, events)
    return _product_limit(uniq, deaths, at_risk)


def reverse_kaplan_meier(times, events) -> StepFunction:
    """Kaplan-Meier estimate of the censoring survival function ``G``.

    Uses flipped indicators. Events at a tied time are taken to happen just
    before the censorings, so they leave the censoring risk set first.
    """
    times, events = _check_inputs(times, events)
    uniq, at_risk, deaths, censored = _risk_table(times, events)
    return _product_limit(uniq, censored, at_risk - deaths)


def evaluate_left(f: StepFunction, t) -> float:
    """Left limit ``f(t-)``."""
    return f.left_limit(t)


@dataclass(frozen=True, eq=False)
class WeightedArm:
    """One arm's data with its censoring curve and IPCW weights.

    ``n_capped`` counts events whose censoring survival left limit was zero;
    their weight is capped at ``n``.
    """

    arm_data: RightCensoredSample
    censor_survival: StepFunction
    weights: np.ndarray
    n_capped: int = 0

    @property
    def size(self) -> int:
        return self.arm_data.size

    @property
    def times(self) -> np.ndarray:
        return self.arm_data.time

    @property
    def covariates(self) -> np.ndarray:
        return self.arm_data.covariates


def ipcw_weights(times, events):
    """Return ``(weights, censor_survival, n_capped)`` for raw arrays."""
    times, events = _check_inputs(times, events)
    if not events.any():
        raise DegenerateCensoring("every observation is censored; all weights would be zero")
    n = times.shape[0]
    g = reverse_kaplan_meier(times, events)
    g_left = np.asarray(g.left_limit(times), dtype=float)
    capped = (events == 1) & (g_left <= 0)
    safe = np.where(capped | (events == 0), 1.0, g_left)
    weights = np.where(events == 1, 1.0 / safe, 0.0)
    weights[capped] = float(n)
    return weights, g, int(capped.sum())


def build_weighted_arm(arm_data: RightCensoredSample) -> WeightedArm:
    """Attach reverse Kaplan-Meier IPCW weights ``event / G(time-)``."""
    if arm_data.size == 0:
        raise EmptyInput("cannot weight an empty arm")
    if np.unique(arm_data.arm).size > 1:
        raise ValueError("build_weighted_arm expects data from a single arm")
    weights, g, n_capped = ipcw_weights(arm_data.time, arm_data.event)
    weights.setflags(write=False)
    return WeightedArm(arm_data, g, weights, n_capped)
