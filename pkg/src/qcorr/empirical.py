"""Monte Carlo estimation of correlators from sampled signal records.

An N-point correlator is estimated as the product of N record samples,
averaged over an ensemble and additionally over the placement t1 of the
earliest event inside a time window [t_a, t_a + T]; the remaining events sit
at fixed gaps from t1. Window placements within one trajectory are strongly
correlated through the shared qubit path, so standard errors are computed by
first averaging the window products inside each trajectory and then taking
the spread of those per-trajectory means across the ensemble. Reported
values come from extended-precision accumulation: individual noise factors
have standard deviation sqrt(tau/dt) per sample, so long sums of their
products shed float64 digits otherwise.

Requested times snap to the nearest sample bin (never further than dt/2) and
the snapped grid is reported back on the estimate. Estimates carry enough of
the snapped specification to be safely poolable: merge_estimates combines
estimates of the same specification computed on disjoint trajectory subsets
using exact pooled-moment algebra, so a sharded estimation equals the
single-pass result up to floating-point reassociation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimateMismatchError, ValidationError
from .trajectory import RecordSet


@dataclass(frozen=True)
class Window:
    """Averaging window for the earliest event time: [t_a, t_a + length]."""

    t_a: float
    length: float

    def __post_init__(self):
        if not (self.length > 0.0):
            raise ValidationError(f"window length must be positive, got {self.length}")
        if self.t_a < 0.0:
            raise ValidationError(f"window start must be nonnegative, got {self.t_a}")


@dataclass(frozen=True)
class CorrelatorEstimate:
    """Estimated correlator value with its trajectory-level standard error.

    events holds the snapped (channel_index, gap_in_bins) pairs and
    window_bins the snapped inclusive bin range of t1; together with dt they
    identify the specification for merging. sum_means/sumsq_means keep the
    exact pooled-moment bookkeeping: sum and sum of squares of the
    per-trajectory window means.
    """

    value: float
    std_error: float
    n_traj: int
    n_window_samples: int
    dt: float
    window_bins: tuple
    events: tuple
    sum_means: float
    sumsq_means: float

    @property
    def snapped_window_us(self) -> tuple:
        return (self.window_bins[0] * self.dt, self.window_bins[1] * self.dt)

    @property
    def snapped_gaps_us(self) -> tuple:
        return tuple(g * self.dt for _, g in self.events)

    def spec_key(self) -> tuple:
        return (self.dt, self.window_bins, self.events)


def _snap(value: float, dt: float) -> int:
    return int(round(value / dt))


def _window_bins(window: Window, dt: float) -> tuple:
    i0 = _snap(window.t_a, dt)
    i1 = _snap(window.t_a + window.length, dt)
    if i1 < i0:
        raise ValidationError("window shorter than one sample bin")
    return i0, i1


def _check_records(records: RecordSet):
    if records.n_traj < 2:
        raise ValidationError("estimation needs at least 2 trajectories for a standard error")


def _resolve_events(records: RecordSet, gaps) -> tuple:
    events = []
    previous = None
    for ch, gap in gaps:
        ch = int(ch)
        if not (0 <= ch < records.n_channels):
            raise ValidationError(
                f"channel index {ch} out of range for {records.n_channels} channels"
            )
        g = _snap(float(gap), records.dt)
        if g < 0:
            raise ValidationError(f"gaps must be nonnegative, got {gap}")
        if previous is not None and g < previous:
            raise ValidationError("gaps must be nondecreasing")
        previous = g
        events.append((ch, g))
    if not events:
        raise ValidationError("at least one (channel, gap) event is required")
    if events[0][1] != 0:
        raise ValidationError("the first gap must snap to 0 (events are relative to t1)")
    return tuple(events)


def _traj_window_means(records: RecordSet, events: tuple, i0: int, i1: int) -> np.ndarray:
    """Per-trajectory window means of the event product, in extended precision."""
    max_gap = max(g for _, g in events)
    if i0 < 0 or i1 + max_gap > records.n_samples - 1:
        raise ValidationError(
            f"window bins [{i0}, {i1}] plus largest gap {max_gap} exceed the "
            f"record span of {records.n_samples} samples"
        )
    product = np.ones((records.n_traj, i1 - i0 + 1))
    for ch, g in events:
        product *= records.samples[:, ch, i0 + g:i1 + g + 1]
    return product.sum(axis=1, dtype=np.longdouble) / product.shape[1]


def trajectory_window_means(records: RecordSet, gaps, window: Window) -> np.ndarray:
    """Per-trajectory window means of the product of samples at gaps from t1.

    The ensemble mean of the returned array is the correlator estimate;
    scans use this to pool statistics across grid points trajectory by
    trajectory.
    """
    events = _resolve_events(records, gaps)
    i0, i1 = _window_bins(window, records.dt)
    return _traj_window_means(records, events, i0, i1)


def _estimate(records: RecordSet, events: tuple, window: Window) -> CorrelatorEstimate:
    i0, i1 = _window_bins(window, records.dt)
    traj_means = _traj_window_means(records, events, i0, i1)
    total = traj_means.sum()
    total_sq = np.square(traj_means).sum()
    m = records.n_traj
    value = total / m
    var = (total_sq - total * total / m) / (m - 1)
    var = max(float(var), 0.0)
    return CorrelatorEstimate(
        value=float(value),
        std_error=float(np.sqrt(var / m)),
        n_traj=m,
        n_window_samples=i1 - i0 + 1,
        dt=records.dt,
        window_bins=(i0, i1),
        events=events,
        sum_means=float(total),
        sumsq_means=float(total_sq),
    )


def estimate_correlator(records: RecordSet, gaps, window: Window) -> CorrelatorEstimate:
    """Estimate the correlator of events at fixed gaps from a windowed t1.

    gaps is a sequence of (channel_index, gap_us) with nondecreasing gaps and
    first gap 0; equal gaps on the same channel estimate the discretized
    equal-time singular term tau/dt plus the smooth part.
    """
    _check_records(records)
    events = _resolve_events(records, gaps)
    return _estimate(records, events, window)


def estimate_mean_signal(records: RecordSet, channel_index: int, window: Window) -> CorrelatorEstimate:
    """Window-averaged mean output signal of one channel."""
    _check_records(records)
    events = _resolve_events(records, [(channel_index, 0.0)])
    return _estimate(records, events, window)


def merge_estimates(parts) -> CorrelatorEstimate:
    """Pool estimates of one specification over disjoint trajectory subsets.

    Exact pooled mean and pooled variance; associative and commutative up to
    floating-point reassociation.
    """
    parts = list(parts)
    if not parts:
        raise EstimateMismatchError("nothing to merge")
    key = parts[0].spec_key()
    for p in parts[1:]:
        if p.spec_key() != key:
            raise EstimateMismatchError(
                f"cannot merge estimates of different specs: {p.spec_key()} != {key}"
            )
    m = sum(p.n_traj for p in parts)
    total = np.longdouble(0.0)
    total_sq = np.longdouble(0.0)
    for p in parts:
        total += np.longdouble(p.sum_means)
        total_sq += np.longdouble(p.sumsq_means)
    value = total / m
    var = (total_sq - total * total / m) / (m - 1)
    var = max(float(var), 0.0)
    first = parts[0]
    return CorrelatorEstimate(
        value=float(value),
        std_error=float(np.sqrt(var / m)),
        n_traj=m,
        n_window_samples=first.n_window_samples,
        dt=first.dt,
        window_bins=first.window_bins,
        events=first.events,
        sum_means=float(total),
        sumsq_means=float(total_sq),
    )
