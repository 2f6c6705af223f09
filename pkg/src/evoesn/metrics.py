"""Error measures for free-run and one-step prediction.

NRMSE over a horizon and NRMSE at a fixed lookahead step normalize by the
variance of a reference signal (by default the full test-region target, not
just the scored window); NMSE is the squared counterpart.  All of them are
invariant under a common affine rescaling of targets and predictions.
"""

from dataclasses import dataclass, field

import numpy as np


def _variance(signal, ddof=0):
    signal = np.asarray(signal, dtype=float).ravel()
    var = float(np.var(signal, ddof=ddof))
    if var == 0.0:
        raise ValueError("reference signal has zero variance")
    return var


def nrmse_over_horizon(targets, predictions, horizon, norm_signal=None, ddof=0):
    """Root mean squared residual over the first ``horizon`` steps, variance-normalized."""
    targets = np.asarray(targets, dtype=float).ravel()
    predictions = np.asarray(predictions, dtype=float).ravel()
    if len(targets) < horizon or len(predictions) < horizon:
        raise ValueError(f"need at least {horizon} samples")
    var = _variance(targets if norm_signal is None else norm_signal, ddof)
    resid = targets[:horizon] - predictions[:horizon]
    return float(np.sqrt(np.mean(resid**2) / var))


def nrmse_at_step(runs, horizon, norm_signal=None, ddof=0):
    """Normalized RMS of the residual at exactly step ``horizon``, across runs.

    ``runs`` is a sequence of (targets, predictions) pairs, each covering at
    least ``horizon`` free-run steps; a single pair is the degenerate case.
    """
    if isinstance(runs, tuple) and len(runs) == 2 and np.ndim(runs[0]) <= 1:
        runs = [runs]
    sq = []
    ref = norm_signal
    for targets, predictions in runs:
        targets = np.asarray(targets, dtype=float).ravel()
        predictions = np.asarray(predictions, dtype=float).ravel()
        if len(targets) < horizon or len(predictions) < horizon:
            raise ValueError(f"each run needs at least {horizon} steps")
        sq.append((targets[horizon - 1] - predictions[horizon - 1]) ** 2)
        if norm_signal is None:
            ref = targets if ref is None else np.concatenate([np.ravel(ref), targets])
    return float(np.sqrt(np.mean(sq) / _variance(ref, ddof)))


def nmse(targets, predictions, norm_signal=None, ddof=0):
    """Mean squared residual divided by target variance."""
    targets = np.asarray(targets, dtype=float).ravel()
    predictions = np.asarray(predictions, dtype=float).ravel()
    if targets.shape != predictions.shape:
        raise ValueError("targets and predictions must have equal length")
    var = _variance(targets if norm_signal is None else norm_signal, ddof)
    return float(np.mean((targets - predictions) ** 2) / var)


def absolute_error_trace(targets, predictions, log10=False):
    """Per-step |target - prediction|, optionally log10 of it."""
    targets = np.asarray(targets, dtype=float).ravel()
    predictions = np.asarray(predictions, dtype=float).ravel()
    if targets.shape != predictions.shape:
        raise ValueError("targets and predictions must have equal length")
    trace = np.abs(targets - predictions)
    return np.log10(trace) if log10 else trace


@dataclass
class EvalReport:
    """Metric values plus the residual trace behind them."""

    metrics: dict
    residuals: np.ndarray
    horizon: int
    norm_variance: float
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "metrics": {k: float(v) for k, v in self.metrics.items()},
            "horizon": int(self.horizon),
            "norm_variance": float(self.norm_variance),
            **{k: float(v) for k, v in self.extras.items()},
        }
