"""Exact multi-time output-signal correlators of monitored qubits.

An N-time correlator is the ensemble average of a time-ordered product of
output samples, one per event (channel, time). With purely informational
backaction it can be evaluated exactly by replacing the continuous records
with projective +-1 outcomes at the event times and ensemble-averaged
evolution in between: outcome s at an event on axis n collapses the state to
s n, and the next event sees the propagated collapsed state. Summing the
outcome product over all 2^N branches weighted by their probabilities gives
the correlator.

brute_force_correlator performs that 2^N summation literally and is kept as
the permanent in-repo oracle. chain_correlator evaluates the identical sum
in O(N) by propagating backward a pair (alpha, beta) such that the expected
product of outcomes from event k on, conditioned on outcome s at event k, is
alpha_k + beta_k s. With the inter-event affine maps r -> P_k r + q_k and
the shorthand a_k = n_k . (P_k n_{k-1}), b_k = n_k . q_k, the recursion is

    alpha_N = 1, beta_N = 0
    alpha_k = beta_{k+1} + b_{k+1} alpha_{k+1}
    beta_k  = a_{k+1} alpha_{k+1}

and the correlator is mu_1 alpha_1 + beta_1 with mu_1 the mean signal at the
first event. The two routes agree to machine precision for every model.

For unital models (r_st = 0 on every segment, so q_k = 0) with no phase
backaction the chain collapses to a product of two-time correlators
K(t_i, t_k) = n_k . P(t_i -> t_k) n_i taken over consecutive event pairs,
times the mean signal at the earliest event when N is odd. The qubit
evolution inside the unpaired gaps then drops out entirely, as does the
initial state for even N.

Coinciding event times are meaningful only between two events of the same
channel, where the white output noise contributes a delta-function term
tau_l * delta(0) (discretized as tau_l / dt) times the correlator with the
pair removed; singular_corrections enumerates those terms.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as outcome_product

import numpy as np

from .bloch import (
    EnsembleModel,
    as_bloch,
    ordered_propagator,
    propagate_ensemble,
    validate_state,
)
from .errors import (
    FactorizationInapplicableError,
    SpecSizeError,
    ValidationError,
)

BRUTE_FORCE_MAX_EVENTS = 16


@dataclass(frozen=True)
class CorrelatorSpec:
    """Ordered list of correlator events plus the initial condition.

    events is a sequence of (channel_index, time_us) with strictly increasing
    times; coinciding times are only representable through SingularSpec. The
    qubit is prepared in r_in at t_in <= first event time.
    """

    events: tuple
    r_in: tuple = (0.0, 0.0, 0.0)
    t_in: float = 0.0

    def __post_init__(self):
        events = tuple((int(ch), float(t)) for ch, t in self.events)
        if not events:
            raise ValidationError("CorrelatorSpec needs at least one event")
        times = [t for _, t in events]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError(
                f"event times must be strictly increasing, got {times}; "
                "coinciding times are only legal through SingularSpec"
            )
        if any(ch < 0 for ch, _ in events):
            raise ValidationError("channel indices must be nonnegative")
        if times[0] < self.t_in:
            raise ValidationError(f"first event time {times[0]} precedes t_in={self.t_in}")
        object.__setattr__(self, "events", events)
        r_in = validate_state(self.r_in)
        object.__setattr__(self, "r_in", tuple(float(c) for c in r_in))

    @property
    def n_events(self) -> int:
        return len(self.events)

    @property
    def times(self) -> tuple:
        return tuple(t for _, t in self.events)

    @property
    def channel_indices(self) -> tuple:
        return tuple(ch for ch, _ in self.events)


@dataclass(frozen=True)
class SingularSpec:
    """Event list that may contain coinciding-time same-channel pairs.

    pairs holds the indices i of events for which event i and i+1 coincide in
    time on the same channel. At most two same-channel events may share one
    time value; a third makes the would-be singular weight vanish and is
    rejected instead of silently dropped.
    """

    events: tuple
    pairs: tuple
    r_in: tuple = (0.0, 0.0, 0.0)
    t_in: float = 0.0

    def __post_init__(self):
        events = tuple((int(ch), float(t)) for ch, t in self.events)
        if not events:
            raise ValidationError("SingularSpec needs at least one event")
        times = [t for _, t in events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValidationError(f"event times must be nondecreasing, got {times}")
        if times[0] < self.t_in:
            raise ValidationError(f"first event time {times[0]} precedes t_in={self.t_in}")
        per_time_channel = {}
        for ch, t in events:
            per_time_channel[(t, ch)] = per_time_channel.get((t, ch), 0) + 1
        for (t, ch), count in per_time_channel.items():
            if count > 2:
                raise ValidationError(
                    f"{count} events of channel {ch} coincide at t={t}: "
                    "Gaussian noise leaves no singular contribution from three or "
                    "more coinciding same-channel times; split the spec instead"
                )
        pairs = tuple(sorted(int(i) for i in self.pairs))
        for i in pairs:
            if not (0 <= i < len(events) - 1):
                raise ValidationError(f"pair index {i} out of range")
            (ch_a, t_a), (ch_b, t_b) = events[i], events[i + 1]
            if t_a != t_b or ch_a != ch_b:
                raise ValidationError(
                    f"events {i} and {i + 1} are not a coinciding same-channel pair"
                )
        if any(b - a < 2 for a, b in zip(pairs, pairs[1:])):
            raise ValidationError("coinciding pairs must not overlap")
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "pairs", pairs)
        r_in = validate_state(self.r_in)
        object.__setattr__(self, "r_in", tuple(float(c) for c in r_in))

    @classmethod
    def from_events(cls, events, r_in=(0.0, 0.0, 0.0), t_in=0.0) -> "SingularSpec":
        """Identify coinciding same-channel pairs among sorted events."""
        events = sorted(((int(ch), float(t)) for ch, t in events), key=lambda e: e[1])
        pairs = []
        i = 0
        while i < len(events) - 1:
            (ch_a, t_a), (ch_b, t_b) = events[i], events[i + 1]
            if t_a == t_b and ch_a == ch_b:
                pairs.append(i)
                i += 2
            else:
                i += 1
        return cls(tuple(events), tuple(pairs), r_in, t_in)


def _axis(channels, index: int) -> np.ndarray:
    if not (0 <= index < len(channels)):
        raise ValidationError(
            f"channel index {index} out of range for {len(channels)} channels"
        )
    return channels[index].axis_vector


def _require_no_phase_backaction(channels):
    for i, ch in enumerate(channels):
        if ch.phase_k != 0.0:
            raise FactorizationInapplicableError(
                f"channel {i} has phase backaction (phase_k={ch.phase_k}); "
                "the factorized form does not apply, use chain_correlator"
            )


def mean_signal(model: EnsembleModel, channels, channel_index: int, t: float,
                r_in=(0.0, 0.0, 0.0), t_in: float = 0.0) -> float:
    """Ensemble-averaged output signal of one channel at time t."""
    if t < t_in:
        raise ValidationError(f"t={t} precedes t_in={t_in}")
    n = _axis(channels, channel_index)
    return float(n @ propagate_ensemble(model, as_bloch(r_in), t_in, t))


def two_time_correlator(model: EnsembleModel, channels,
                        channel_i: int, t_i: float,
                        channel_k: int, t_k: float) -> float:
    """Two-time correlator n_k . P(t_i -> t_k) n_i of a unital model.

    Independent of the initial state. For non-unital models this closed form
    does not hold; evaluate a two-event chain_correlator instead.
    """
    if t_k < t_i:
        raise ValidationError(f"two_time_correlator requires t_i <= t_k, got {t_i} > {t_k}")
    if not model.unital:
        raise ValidationError(
            "two_time_correlator requires a unital model; "
            "use chain_correlator with a two-event spec for non-unital evolution"
        )
    n_i = _axis(channels, channel_i)
    n_k = _axis(channels, channel_k)
    prop = ordered_propagator(model, t_i, t_k)
    return float(n_k @ (prop.matrix @ n_i))


def _event_propagators(model: EnsembleModel, spec: CorrelatorSpec):
    """Affine maps over the gaps (t_in -> t_1), (t_1 -> t_2), ..."""
    times = (spec.t_in,) + spec.times
    return [ordered_propagator(model, a, b) for a, b in zip(times, times[1:])]


def brute_force_correlator(model: EnsembleModel, channels, spec: CorrelatorSpec) -> float:
    """Correlator by explicit summation over all 2^N projective outcomes.

    Exponential cost; retained permanently as the oracle that the O(N) chain
    evaluation is checked against.
    """
    n = spec.n_events
    if n > BRUTE_FORCE_MAX_EVENTS:
        raise SpecSizeError(
            f"brute-force summation over 2^{n} outcomes refused "
            f"(limit {BRUTE_FORCE_MAX_EVENTS} events); use chain_correlator"
        )
    axes = [_axis(channels, ch) for ch in spec.channel_indices]
    props = _event_propagators(model, spec)
    r_first = props[0].apply(as_bloch(spec.r_in))
    total = 0.0
    for outcomes in outcome_product((1.0, -1.0), repeat=n):
        weight = 0.5 * (1.0 + outcomes[0] * float(axes[0] @ r_first))
        for k in range(1, n):
            conditioned = props[k].apply(outcomes[k - 1] * axes[k - 1])
            weight *= 0.5 * (1.0 + outcomes[k] * float(axes[k] @ conditioned))
        total += weight * float(np.prod(outcomes))
    return total


def chain_correlator(model: EnsembleModel, channels, spec: CorrelatorSpec) -> float:
    """Correlator via the O(N) backward recursion; equals brute force exactly."""
    axes = [_axis(channels, ch) for ch in spec.channel_indices]
    props = _event_propagators(model, spec)
    alpha, beta = 1.0, 0.0
    for k in range(spec.n_events - 1, 0, -1):
        a = float(axes[k] @ (props[k].matrix @ axes[k - 1]))
        b = float(axes[k] @ props[k].offset)
        alpha, beta = beta + b * alpha, a * alpha
    mu_first = float(axes[0] @ props[0].apply(as_bloch(spec.r_in)))
    return mu_first * alpha + beta


def _factorized_value(model: EnsembleModel, channels, spec: CorrelatorSpec) -> float:
    """Pair-product form without precondition checks (testing hook)."""
    axes = [_axis(channels, ch) for ch in spec.channel_indices]
    times = spec.times
    n = spec.n_events

    def pair(i: int, k: int) -> float:
        prop = ordered_propagator(model, times[i], times[k])
        return float(axes[k] @ (prop.matrix @ axes[i]))

    if n % 2 == 0:
        value = 1.0
        start = 0
    else:
        value = float(
            axes[0] @ propagate_ensemble(model, as_bloch(spec.r_in), spec.t_in, times[0])
        )
        start = 1
    for i in range(start, n - 1, 2):
        value *= pair(i, i + 1)
    return value


def factorized_correlator(model: EnsembleModel, channels, spec: CorrelatorSpec) -> float:
    """Correlator as a product of consecutive-pair two-time correlators.

    Valid only for unital models with zero phase backaction on every channel;
    even N gives the pure pair product, odd N adds the mean signal at the
    earliest event. Raises FactorizationInapplicableError otherwise.
    """
    if not model.unital:
        raise FactorizationInapplicableError(
            "factorized evaluation requires a unital model (r_st = 0 on all "
            "segments); use chain_correlator"
        )
    _require_no_phase_backaction(channels)
    return _factorized_value(model, channels, spec)


def singular_corrections(channels, spec: SingularSpec):
    """Delta-function terms of a correlator with coinciding same-channel pairs.

    Returns a list of (weight, reduced_spec) where weight is the product of
    tau over the removed pairs; each term multiplies one formal delta(0) per
    removed pair, to be discretized as 1/dt by the consumer. reduced_spec is
    None when removal empties the event list (the remaining factor is 1).
    Only removals that leave strictly ordered remaining events are emitted;
    pair subsets whose residue still contains a coincidence are accounted for
    by the higher-order term that removes them too.
    """
    terms = []
    n_pairs = len(spec.pairs)
    for mask in range(1, 2 ** n_pairs):
        chosen = [spec.pairs[i] for i in range(n_pairs) if mask >> i & 1]
        removed = set()
        weight = 1.0
        for i in chosen:
            ch = spec.events[i][0]
            if not (0 <= ch < len(channels)):
                raise ValidationError(
                    f"channel index {ch} out of range for {len(channels)} channels"
                )
            weight *= channels[ch].tau
            removed.update((i, i + 1))
        remaining = [e for j, e in enumerate(spec.events) if j not in removed]
        if not remaining:
            terms.append((weight, None))
            continue
        times = [t for _, t in remaining]
        if any(b <= a for a, b in zip(times, times[1:])):
            continue
        terms.append(
            (weight, CorrelatorSpec(tuple(remaining), spec.r_in, spec.t_in))
        )
    return terms
