"""Canned two-detector configurations and correlator scans.

The setup: two linear detectors simultaneously and continuously measure the
qubit observables along the z axis and along an axis tilted by an angle phi
from z in the xz plane, on a qubit with no Hamiltonian drive. Each channel
contributes an ensemble dephasing rate gamma in its own basis, so the model
is unital by construction. The qubit starts on the Bloch sphere halfway
between the two measurement axes, r(0) = (sin(phi/2), 0, cos(phi/2)).

Two scans reproduce the characteristic three- and four-time correlator
structure of this setup:

* three_time_scan tabulates K over event channels (phi, z, phi) at gaps
  (dt21, dt32) from a windowed earliest time. Analytically the value is the
  window-averaged mean phi signal times the two-time correlator over the
  last gap, independent of dt21.
* four_time_scan tabulates K over (z, phi, z, phi) at gaps (dt21, dt32,
  dt43). Analytically it is the product of the two-time correlators over the
  first and last gaps, independent of dt32, the window, and the initial
  state; its summary compares the Monte Carlo average over the dt32 grid
  against that constant.

Monte Carlo columns stream the ensemble through fixed-size shards so memory
stays bounded at any trajectory budget; per-point estimates are pooled with
exact moment algebra and the summary pools grid points trajectory by
trajectory, respecting their correlation through the shared records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import mean_signal, two_time_correlator
from .bloch import MeasurementChannel, build_ensemble_model
from .empirical import (
    Window,
    estimate_correlator,
    merge_estimates,
    trajectory_window_means,
)
from .errors import ValidationError
from .trajectory import SimConfig, simulate_range

DEFAULT_GAMMA = 1.0 / 1.3  # per-channel ensemble dephasing rate, 1/us
DEFAULT_THREE_TIME_WINDOW = 0.2
DEFAULT_FOUR_TIME_WINDOW = 0.5
CHANNEL_Z = 0
CHANNEL_PHI = 1


@dataclass(frozen=True)
class ReplicaConfig:
    """Parameters of one two-detector scan.

    phi is the angle between the measurement axes (radians, in [0, pi]);
    gamma the per-channel ensemble dephasing rate. The trajectory budget
    (n_traj, dt, master_seed) only matters when include_mc is set.
    """

    phi: float
    gamma: float = DEFAULT_GAMMA
    eta: float = 1.0
    dt: float = 0.01
    n_traj: int = 20000
    master_seed: int = 20250101
    t_a: float = 1.0
    window_len: float | None = None
    include_mc: bool = True
    workers: int = 1
    shard_size: int = 16384

    def __post_init__(self):
        if not (0.0 <= self.phi <= math.pi):
            raise ValidationError(f"phi must lie in [0, pi], got {self.phi}")
        if not (self.gamma > 0.0):
            raise ValidationError(f"gamma must be positive, got {self.gamma}")
        if not (0.0 < self.eta <= 1.0):
            raise ValidationError(f"eta must be in (0, 1], got {self.eta}")

    @property
    def r_init(self) -> tuple:
        return (math.sin(self.phi / 2.0), 0.0, math.cos(self.phi / 2.0))

    @property
    def tau(self) -> float:
        """Measurement time consistent with gamma at this efficiency."""
        return 1.0 / (2.0 * self.eta * self.gamma)


def replica_model(config: ReplicaConfig):
    """Ensemble model and channel pair (z first, phi second) for the scan."""
    phi = config.phi
    channels = (
        MeasurementChannel((0.0, 0.0, 1.0), config.tau, config.eta),
        MeasurementChannel((math.sin(phi), 0.0, math.cos(phi)), config.tau, config.eta),
    )
    model = build_ensemble_model(channels)
    return model, channels


@dataclass(frozen=True)
class ScanRow:
    """One grid point of a correlator scan; mc fields are NaN without MC."""

    phi: float
    dt21: float
    dt32: float
    dt43: float
    analytic: float
    mc_value: float
    mc_se: float


@dataclass(frozen=True)
class FourTimeSummary:
    """Grid-averaged four-time correlator against the analytic constant."""

    phi: float
    mc_mean: float
    mc_std: float
    mc_pooled_se: float
    analytic: float
    n_traj: int


def _snap_gap(gap: float, dt: float) -> float:
    return round(gap / dt) * dt


def _window_average_mean_signal(model, channels, channel_index, config, window):
    """Discrete window average of the mean signal, on the estimator's grid."""
    i0 = round(window.t_a / config.dt)
    i1 = round((window.t_a + window.length) / config.dt)
    values = [
        mean_signal(model, channels, channel_index, k * config.dt, config.r_init, 0.0)
        for k in range(i0, i1 + 1)
    ]
    return float(np.mean(values))


def _shard_bounds(total: int, shard: int):
    bounds = []
    lo = 0
    while lo < total:
        bounds.append((lo, min(lo + shard, total)))
        lo = bounds[-1][1]
    # A trailing single trajectory cannot carry a standard error; fold it in.
    if len(bounds) > 1 and bounds[-1][1] - bounds[-1][0] < 2:
        last = bounds.pop()
        prev = bounds.pop()
        bounds.append((prev[0], last[1]))
    return bounds


def _simulate_shards(config: ReplicaConfig, sim: SimConfig):
    for lo, hi in _shard_bounds(sim.n_traj, config.shard_size):
        yield simulate_range(sim, lo, hi, workers=config.workers)


def _sim_config(config: ReplicaConfig, model, channels, t_total: float) -> SimConfig:
    return SimConfig(
        model=model,
        channels=channels,
        r_init=config.r_init,
        t_total=t_total,
        dt=config.dt,
        n_traj=config.n_traj,
        master_seed=config.master_seed,
        store_states=False,
    )


def default_three_time_grid(gamma: float = DEFAULT_GAMMA):
    return tuple(np.linspace(0.1, 2.3, 8) / gamma)


def default_four_time_grid(gamma: float = DEFAULT_GAMMA):
    return tuple(np.linspace(0.5, 2.3, 10) / gamma)


def three_time_scan(config: ReplicaConfig, dt21_values=None, dt32_values=None):
    """Tabulate the (phi, z, phi) three-time correlator on a gap grid.

    Returns rows over the cartesian product of the snapped dt21 and dt32
    grids. The analytic column varies only with dt32.
    """
    model, channels = replica_model(config)
    window = Window(config.t_a, config.window_len or DEFAULT_THREE_TIME_WINDOW)
    if dt21_values is None:
        dt21_values = default_three_time_grid(config.gamma)
    if dt32_values is None:
        dt32_values = default_three_time_grid(config.gamma)
    gaps21 = sorted({_snap_gap(v, config.dt) for v in dt21_values})
    gaps32 = sorted({_snap_gap(v, config.dt) for v in dt32_values})

    mean_phi = _window_average_mean_signal(model, channels, CHANNEL_PHI, config, window)
    analytic = {
        g32: mean_phi * two_time_correlator(model, channels, CHANNEL_Z, 0.0, CHANNEL_PHI, g32)
        for g32 in gaps32
    }

    points = [(g21, g32) for g21 in gaps21 for g32 in gaps32]
    estimates = {point: [] for point in points}
    if config.include_mc:
        t_total = window.t_a + window.length + max(gaps21) + max(gaps32) + 2 * config.dt
        sim = _sim_config(config, model, channels, t_total)
        for shard in _simulate_shards(config, sim):
            for g21, g32 in points:
                gaps = [(CHANNEL_PHI, 0.0), (CHANNEL_Z, g21), (CHANNEL_PHI, g21 + g32)]
                estimates[(g21, g32)].append(estimate_correlator(shard, gaps, window))

    rows = []
    for g21, g32 in points:
        if config.include_mc:
            pooled = merge_estimates(estimates[(g21, g32)])
            mc_value, mc_se = pooled.value, pooled.std_error
        else:
            mc_value = mc_se = float("nan")
        rows.append(ScanRow(
            phi=config.phi, dt21=g21, dt32=g32, dt43=float("nan"),
            analytic=analytic[g32], mc_value=mc_value, mc_se=mc_se,
        ))
    return rows


def four_time_scan(config: ReplicaConfig, dt32_values=None,
                   dt21: float | None = None, dt43: float | None = None):
    """Tabulate the (z, phi, z, phi) four-time correlator over a dt32 grid.

    dt21 and dt43 default to 0.15/gamma. Returns (rows, summary) where the
    summary averages the Monte Carlo values over the dt32 grid, with both the
    spread across grid points and the trajectory-pooled standard error of the
    grid average.
    """
    model, channels = replica_model(config)
    window = Window(config.t_a, config.window_len or DEFAULT_FOUR_TIME_WINDOW)
    if dt32_values is None:
        dt32_values = default_four_time_grid(config.gamma)
    g21 = _snap_gap(0.15 / config.gamma if dt21 is None else dt21, config.dt)
    g43 = _snap_gap(0.15 / config.gamma if dt43 is None else dt43, config.dt)
    gaps32 = sorted({_snap_gap(v, config.dt) for v in dt32_values})

    analytic = (
        two_time_correlator(model, channels, CHANNEL_Z, 0.0, CHANNEL_PHI, g21)
        * two_time_correlator(model, channels, CHANNEL_Z, 0.0, CHANNEL_PHI, g43)
    )

    per_point = {g32: [] for g32 in gaps32}
    pooled_sum = 0.0
    pooled_sumsq = 0.0
    if config.include_mc:
        t_total = window.t_a + window.length + g21 + max(gaps32) + g43 + 2 * config.dt
        sim = _sim_config(config, model, channels, t_total)
        for shard in _simulate_shards(config, sim):
            grid_means = []
            for g32 in gaps32:
                gaps = [
                    (CHANNEL_Z, 0.0),
                    (CHANNEL_PHI, g21),
                    (CHANNEL_Z, g21 + g32),
                    (CHANNEL_PHI, g21 + g32 + g43),
                ]
                per_point[g32].append(estimate_correlator(shard, gaps, window))
                grid_means.append(trajectory_window_means(shard, gaps, window))
            # Grid average per trajectory: respects cross-point correlation.
            traj_avg = np.mean(grid_means, axis=0)
            pooled_sum += float(traj_avg.sum())
            pooled_sumsq += float(np.square(traj_avg).sum())

    rows = []
    values = []
    for g32 in gaps32:
        if config.include_mc:
            pooled = merge_estimates(per_point[g32])
            mc_value, mc_se = pooled.value, pooled.std_error
            values.append(mc_value)
        else:
            mc_value = mc_se = float("nan")
        rows.append(ScanRow(
            phi=config.phi, dt21=g21, dt32=g32, dt43=g43,
            analytic=analytic, mc_value=mc_value, mc_se=mc_se,
        ))

    if config.include_mc:
        m = config.n_traj
        mean = pooled_sum / m
        var = max((pooled_sumsq - pooled_sum * pooled_sum / m) / (m - 1), 0.0)
        summary = FourTimeSummary(
            phi=config.phi,
            mc_mean=mean,
            mc_std=float(np.std(values, ddof=1)) if len(values) > 1 else 0.0,
            mc_pooled_se=math.sqrt(var / m),
            analytic=analytic,
            n_traj=m,
        )
    else:
        summary = FourTimeSummary(
            phi=config.phi, mc_mean=float("nan"), mc_std=float("nan"),
            mc_pooled_se=float("nan"), analytic=analytic, n_traj=0,
        )
    return rows, summary
