"""Bloch-vector models of continuously measured qubits.

A qubit state is a Bloch vector r = (x, y, z), represented throughout as a
plain float ndarray of shape (3,); norm 1 is a pure state, norm < 1 mixed.
Monitoring a qubit observable along unit axis n with measurement time tau and
quantum efficiency eta dephases the ensemble-averaged state at rate

    dephasing_rate = (1 + phase_k**2) / (2 * eta * tau)

in the plane perpendicular to n. The ensemble-averaged evolution is the
general linear Markovian form

    dr/dt = L (r - r_st)

with a 3x3 generator L and quasistationary state r_st, both piecewise
constant in time. A model is *unital* when every segment has r_st = 0, which
makes the solution map odd in the initial state: propagating -r0 gives minus
the propagation of r0.

All functions here are pure; nothing is mutated, so concurrent use needs no
locking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .linalg import affine_flow, cross_matrix

UNIT_AXIS_TOL = 1e-9
STATE_NORM_TOL = 1e-9
UNITAL_TOL = 1e-10


def as_bloch(r) -> np.ndarray:
    """Coerce to a float 3-vector without norm checks."""
    r = np.asarray(r, dtype=float)
    if r.shape != (3,):
        raise ValidationError(f"Bloch vector must have shape (3,), got {r.shape}")
    return r


def validate_state(r) -> np.ndarray:
    """Coerce to a Bloch vector and require it to lie in the unit ball."""
    r = as_bloch(r)
    norm = float(np.linalg.norm(r))
    if norm > 1.0 + STATE_NORM_TOL:
        raise ValidationError(f"Bloch vector norm {norm:.6g} exceeds 1")
    return r


@dataclass(frozen=True)
class MeasurementChannel:
    """One linear detector monitoring the qubit observable along ``axis``.

    tau is the measurement (collapse) time in microseconds: the time needed
    for the output signal-to-noise ratio to reach 1. eta in (0, 1] is the
    quantum efficiency. phase_k sets the relative strength of phase
    backaction (rotation about the axis driven by the output noise); zero
    when the optimal quadrature is amplified.
    """

    axis: tuple
    tau: float
    eta: float = 1.0
    phase_k: float = 0.0

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        if axis.shape != (3,):
            raise ValidationError(f"channel axis must be a 3-vector, got shape {axis.shape}")
        norm = float(np.linalg.norm(axis))
        if abs(norm - 1.0) > UNIT_AXIS_TOL:
            raise ValidationError(f"channel axis must be unit length, got norm {norm:.12g}")
        if not (self.tau > 0.0):
            raise ValidationError(f"channel tau must be positive, got {self.tau}")
        if not (0.0 < self.eta <= 1.0):
            raise ValidationError(f"channel eta must be in (0, 1], got {self.eta}")
        if not np.isfinite(self.phase_k):
            raise ValidationError(f"channel phase_k must be finite, got {self.phase_k}")
        object.__setattr__(self, "axis", tuple(float(c) for c in axis))

    @property
    def axis_vector(self) -> np.ndarray:
        return np.array(self.axis, dtype=float)

    @property
    def dephasing_rate(self) -> float:
        """Ensemble dephasing rate contributed by this channel, in 1/us."""
        return (1.0 + self.phase_k ** 2) / (2.0 * self.eta * self.tau)


@dataclass(frozen=True)
class ModelSegment:
    """Constant-generator piece of an EnsembleModel, active from t_start on."""

    t_start: float
    lam: np.ndarray
    r_st: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        r_st = np.asarray(self.r_st, dtype=float)
        if lam.shape != (3, 3):
            raise ValidationError(f"segment generator must be 3x3, got {lam.shape}")
        if r_st.shape != (3,):
            raise ValidationError(f"segment r_st must be a 3-vector, got {r_st.shape}")
        if not np.all(np.isfinite(lam)) or not np.all(np.isfinite(r_st)):
            raise ValidationError("segment generator and r_st must be finite")
        lam.setflags(write=False)
        r_st.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "r_st", r_st)


@dataclass(frozen=True)
class EnsembleModel:
    """Piecewise-constant ensemble-averaged evolution dr/dt = L (r - r_st)."""

    segments: tuple

    def __post_init__(self):
        segments = tuple(self.segments)
        if not segments:
            raise ValidationError("EnsembleModel needs at least one segment")
        starts = [s.t_start for s in segments]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValidationError(f"segment start times must be strictly increasing: {starts}")
        object.__setattr__(self, "segments", segments)

    @classmethod
    def constant(cls, lam, r_st=None, t_start=0.0) -> "EnsembleModel":
        if r_st is None:
            r_st = np.zeros(3)
        return cls((ModelSegment(t_start, np.asarray(lam, float), as_bloch(r_st)),))

    @property
    def t_start(self) -> float:
        return self.segments[0].t_start

    @property
    def unital(self) -> bool:
        """True when every segment keeps the fully mixed state fixed."""
        return all(float(np.linalg.norm(s.r_st)) <= UNITAL_TOL for s in self.segments)

    def segment_at(self, t: float) -> ModelSegment:
        """Segment governing time t (segments extend until the next start)."""
        if t < self.t_start:
            raise ValidationError(f"time {t} precedes model start {self.t_start}")
        active = self.segments[0]
        for seg in self.segments[1:]:
            if seg.t_start <= t:
                active = seg
            else:
                break
        return active


def measurement_dephasing_generator(channels) -> np.ndarray:
    """Ensemble generator contribution of a set of measurement channels.

    Sum over channels of -rate * (I - n n^T): each channel damps the Bloch
    components perpendicular to its axis at its dephasing rate. Symmetric and
    negative semidefinite.
    """
    total = np.zeros((3, 3))
    for ch in channels:
        if not isinstance(ch, MeasurementChannel):
            ch = MeasurementChannel(*ch)
        n = ch.axis_vector
        total -= ch.dephasing_rate * (np.eye(3) - np.outer(n, n))
    return total


def build_ensemble_model(
    channels,
    rabi_axis=None,
    rabi_freq: float = 0.0,
    env_lambda=None,
    env_rst=None,
    t_start: float = 0.0,
) -> EnsembleModel:
    """Assemble the single-segment ensemble model for a monitored qubit.

    The generator is the sum of a coherent rotation rabi_freq * [rabi_axis]_x
    (rad/us about a unit axis), an arbitrary environmental generator
    env_lambda with quasistationary state env_rst, and the measurement
    dephasing of all channels. The model r_st is env_rst (zero by default).
    """
    lam = measurement_dephasing_generator(channels)
    if rabi_freq != 0.0:
        if rabi_axis is None:
            raise ValidationError("rabi_freq != 0 requires a rabi_axis")
        axis = as_bloch(rabi_axis)
        norm = float(np.linalg.norm(axis))
        if abs(norm - 1.0) > UNIT_AXIS_TOL:
            raise ValidationError(f"rabi_axis must be unit length, got norm {norm:.12g}")
        lam = lam + rabi_freq * cross_matrix(axis)
    if env_lambda is not None:
        env_lambda = np.asarray(env_lambda, dtype=float)
        if env_lambda.shape != (3, 3):
            raise ValidationError(f"env_lambda must be 3x3, got {env_lambda.shape}")
        lam = lam + env_lambda
    r_st = np.zeros(3) if env_rst is None else as_bloch(env_rst)
    return EnsembleModel.constant(lam, r_st, t_start)


@dataclass(frozen=True)
class AffinePropagator:
    """Affine solution map r(t1) = P r(t0) + q of an ensemble model."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        q = np.asarray(self.offset, dtype=float)
        if m.shape != (3, 3) or q.shape != (3,):
            raise ValidationError("AffinePropagator needs a 3x3 matrix and a 3-vector offset")
        m.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "offset", q)

    @classmethod
    def identity(cls) -> "AffinePropagator":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, r) -> np.ndarray:
        return self.matrix @ as_bloch(r) + self.offset

    def compose(self, earlier: "AffinePropagator") -> "AffinePropagator":
        """Map equal to applying ``earlier`` first, then this propagator."""
        return AffinePropagator(
            self.matrix @ earlier.matrix,
            self.matrix @ earlier.offset + self.offset,
        )


def ordered_propagator(model: EnsembleModel, t0: float, t1: float) -> AffinePropagator:
    """Time-ordered propagator of the model from t0 to t1 (t0 <= t1).

    Later segments compose on the left; within each constant segment the
    affine flow is exact.
    """
    if t1 < t0:
        raise ValidationError(f"ordered_propagator requires t0 <= t1, got {t0} > {t1}")
    if t0 < model.t_start:
        raise ValidationError(f"t0={t0} precedes model start {model.t_start}")
    prop = AffinePropagator.identity()
    if t1 == t0:
        return prop
    segments = model.segments
    for i, seg in enumerate(segments):
        seg_end = segments[i + 1].t_start if i + 1 < len(segments) else np.inf
        lo = max(t0, seg.t_start)
        hi = min(t1, seg_end)
        if hi <= lo:
            continue
        p, q = affine_flow(seg.lam, seg.r_st, hi - lo)
        prop = AffinePropagator(p, q).compose(prop)
    return prop


def propagate_ensemble(model: EnsembleModel, r0, t0: float, t1: float) -> np.ndarray:
    """Ensemble-averaged state at t1 given state r0 at t0."""
    r0 = validate_state(r0)
    return ordered_propagator(model, t0, t1).apply(r0)
