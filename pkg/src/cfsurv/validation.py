"""Input validation helpers for the estimator classes."""

import numpy as np
from sklearn.utils.validation import check_array, check_consistent_length

from .exceptions import DegenerateCensoring, NonBinaryIndicator, NonPositiveTime

__all__ = ["check_survival_target", "check_survival_data", "check_arm", "make_survival_target"]

_TIME_FIELDS = ("time", "t", "duration", "survival_time")
_EVENT_FIELDS = ("event", "status", "delta", "observed")


def make_survival_target(time, event) -> np.ndarray:
    """Pack times and event indicators into a structured ``(event, time)`` array."""
    time = np.asarray(time, dtype=float).reshape(-1)
    event = np.asarray(event).reshape(-1)
    check_consistent_length(time, event)
    out = np.empty(time.shape[0], dtype=[("event", bool), ("time", float)])
    out["event"] = event.astype(bool)
    out["time"] = time
    return out


def _pick(names, candidates):
    lowered = {n.lower(): n for n in names}
    for c in candidates:
        if c in lowered:
            return lowered[c]
    return None


def check_survival_target(y):
    """Split ``y`` into float times and integer event indicators.

    ``y`` is either a structured array with a time field and an event field
    (as built by :func:`make_survival_target`), or an ``(n, 2)`` array whose
    columns are ``time, event``.
    """
    y = np.asarray(y)
    if y.dtype.names:
        tf = _pick(y.dtype.names, _TIME_FIELDS)
        ef = _pick(y.dtype.names, _EVENT_FIELDS)
        if tf is None or ef is None:
            raise ValueError(f"structured y needs time and event fields, got {y.dtype.names}")
        time = np.asarray(y[tf], dtype=float)
        event = np.asarray(y[ef])
    else:
        y = check_array(y, ensure_2d=True, dtype=float)
        if y.shape[1] != 2:
            raise ValueError(f"y must have two columns (time, event), got {y.shape[1]}")
        time, event = y[:, 0], y[:, 1]
    bad = np.flatnonzero(~(np.isfinite(time) & (time > 0)))
    if bad.size:
        raise NonPositiveTime(int(bad[0]) + 1, float(time[bad[0]]))
    event = np.asarray(event, dtype=float)
    bad = np.flatnonzero((event != 0) & (event != 1))
    if bad.size:
        raise NonBinaryIndicator(int(bad[0]) + 1, "event", event[bad[0]])
    return time, event.astype(int)


def check_survival_data(X, y, require_event=True):
    """Validate a covariate matrix against a survival target."""
    X = check_array(X, ensure_2d=True, dtype=float)
    time, event = check_survival_target(y)
    check_consistent_length(X, time)
    if require_event and not event.any():
        raise DegenerateCensoring("every observation is censored")
    return X, time, event


def check_arm(arm, n_samples):
    arm = np.asarray(arm).reshape(-1)
    if arm.shape[0] != n_samples:
        raise ValueError(f"arm has {arm.shape[0]} entries, expected {n_samples}")
    arm_f = arm.astype(float)
    bad = np.flatnonzero((arm_f != 0) & (arm_f != 1))
    if bad.size:
        raise NonBinaryIndicator(int(bad[0]) + 1, "arm", arm[bad[0]])
    return arm_f.astype(int)
