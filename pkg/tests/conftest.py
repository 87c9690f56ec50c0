"""Shared fixtures and independent oracles used across the test suite."""

import numpy as np
import pytest

from qcorr import EnsembleModel, MeasurementChannel, ReplicaConfig, replica_model

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)


def density_matrix(r):
    """rho = (I + r . sigma) / 2."""
    rho = np.eye(2, dtype=complex) / 2.0
    for comp, pauli in zip(r, PAULIS):
        rho = rho + 0.5 * comp * pauli
    return rho


def bloch_components(rho):
    return np.array([np.trace(pauli @ rho).real for pauli in PAULIS])


def dephasing_generator_operator_oracle(channels):
    """Bloch-space generator obtained from the 2x2 operator map.

    Applies rate * (sigma_n rho sigma_n - rho) / 2 per channel to the basis
    density matrices and reads off the Bloch components column by column:
    independent of the 3x3 projector formula under test.
    """
    columns = []
    for basis in np.eye(3):
        rho = density_matrix(basis)
        drho = np.zeros((2, 2), dtype=complex)
        for ch in channels:
            sigma_n = sum(c * p for c, p in zip(ch.axis_vector, PAULIS))
            drho += ch.dephasing_rate * (sigma_n @ rho @ sigma_n - rho) / 2.0
        columns.append(bloch_components(drho))
    # Columns are d/dt of the basis states minus the identity part (traceless).
    return np.column_stack(columns)


def rk4_affine_oracle(lam, r_st, r0, dt_total, n_steps=4000):
    """High-resolution Runge-Kutta integration of dr/dt = lam (r - r_st)."""
    r = np.asarray(r0, dtype=float).copy()
    h = dt_total / n_steps

    def f(state):
        return lam @ (state - r_st)

    for _ in range(n_steps):
        k1 = f(r)
        k2 = f(r + 0.5 * h * k1)
        k3 = f(r + 0.5 * h * k2)
        k4 = f(r + h * k3)
        r = r + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return r


def random_unit_vector(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def random_model(rng, unital, max_channels=3, allow_rabi=True):
    """Random ensemble model plus channels, mixing dephasing and rotation."""
    n_ch = int(rng.integers(1, max_channels + 1))
    channels = []
    lam = np.zeros((3, 3))
    for _ in range(n_ch):
        axis = random_unit_vector(rng)
        gamma = float(rng.uniform(0.1, 2.0))
        eta = float(rng.uniform(0.3, 1.0))
        tau = 1.0 / (2.0 * eta * gamma)
        channels.append(MeasurementChannel(tuple(axis), tau, eta))
        lam -= gamma * (np.eye(3) - np.outer(axis, axis))
    if allow_rabi and rng.random() < 0.7:
        axis = random_unit_vector(rng)
        omega = float(rng.uniform(0.0, 4.0))
        lam = lam + omega * np.array([
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ])
    r_st = np.zeros(3) if unital else rng.uniform(-0.4, 0.4, size=3)
    return EnsembleModel.constant(lam, r_st), tuple(channels)


def random_event_spec(rng, channels, n_events, t_span=5.0):
    times = np.sort(rng.uniform(0.0, t_span, size=n_events))
    times = times + np.arange(n_events) * 1e-3  # enforce strict ordering
    chans = rng.integers(0, len(channels), size=n_events)
    return tuple((int(c), float(t)) for c, t in zip(chans, times))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def replica_pair():
    """Replica model and channels at phi = 3 pi / 10."""
    config = ReplicaConfig(phi=3 * np.pi / 10, include_mc=False)
    model, channels = replica_model(config)
    return config, model, channels
