"""Canonical demo systems, channel laws, and scripted traces.

These are the concrete instances used by the verification suites, the
shipped example configs, and the test suite: a scalar plant with a = 2,
a 2-state plant with one unstable and one stable mode (spectral radius
1.2), and the matching channel laws.
"""
from __future__ import annotations

import numpy as np

from .channel import ChannelLaw, OutcomeTrace
from .gaussians import solve_dare
from .plant import LinearSystem

DEMO_A = np.array([[1.2, 0.1], [0.0, 0.5]])
DEMO_Q = np.array([[0.6, 0.2], [0.2, 0.5]])
DEMO_C = np.array([[1.0, 1.0]])
DEMO_R = np.array([[1.0]])


def scalar_demo_system(a: float = 2.0, q: float = 1.0, sigma0: float = 1.0) -> LinearSystem:
    """Scalar unstable plant with direct state measurements."""
    return LinearSystem.with_state_measurements([[a]], [[q]], [[sigma0]])


def state_demo_system() -> LinearSystem:
    """Two-state plant with direct state measurements, Sigma0 = Q."""
    return LinearSystem.with_state_measurements(DEMO_A, DEMO_Q, DEMO_Q)


def output_demo_system() -> LinearSystem:
    """Two-state plant observed through C = [1 1] with unit measurement
    noise; the initial covariance is the steady-state prediction
    covariance, so the sensor filter starts converged."""
    steady = solve_dare(DEMO_A, DEMO_C, DEMO_Q, DEMO_R)
    return LinearSystem(DEMO_A, DEMO_C, DEMO_Q, DEMO_R, steady.m)


def state_channel_law() -> ChannelLaw:
    """Joint outcome table for the state-measurement experiments."""
    return ChannelLaw.iid(p11=0.54, p10=0.36, p01=0.06, p00=0.04)


def output_channel_law() -> ChannelLaw:
    """Joint outcome table for the output-measurement experiments."""
    return ChannelLaw.iid(p11=0.7, p10=0.1, p01=0.1, p00=0.1)


def worst_case_trace(k0: int, horizon: int, user_after: str = "ones") -> OutcomeTrace:
    """Scripted trace realising the worst case for the eavesdropper.

    Before k0 every packet is received and intercepted (so no earlier
    critical event occurs and the eavesdropper tracks exactly); at k0
    the user receives while the eavesdropper misses (the critical
    event); afterwards the eavesdropper intercepts everything.  The user
    outcomes after k0 are free: ``ones`` keeps receiving, ``mixed``
    drops every third packet.
    """
    if not 0 <= k0 <= horizon:
        raise ValueError(f"k0 = {k0} outside 0..{horizon}")
    gamma_u = np.ones(horizon + 1, dtype=int)
    gamma_e = np.ones(horizon + 1, dtype=int)
    gamma_e[k0] = 0
    if user_after == "mixed":
        for k in range(k0 + 1, horizon + 1):
            if k % 3 == 1:
                gamma_u[k] = 0
    elif user_after != "ones":
        raise ValueError(f"unknown user pattern {user_after!r}")
    return OutcomeTrace(gamma_u, gamma_e)


def random_instance(rng: np.random.Generator, n: int, rho: float = 1.3) -> LinearSystem:
    """Random state-measurement system: A has U[-1, 1] entries rescaled
    to the requested spectral radius, Q and Sigma0 are random positive
    definite matrices."""
    A = rng.uniform(-1.0, 1.0, (n, n))
    radius = float(np.max(np.abs(np.linalg.eigvals(A))))
    if radius < 1e-12:
        A = A + np.eye(n)  # nilpotent draw; nudge to something scalable
        radius = float(np.max(np.abs(np.linalg.eigvals(A))))
    A = A * (rho / radius)
    B = rng.uniform(-1.0, 1.0, (n, n))
    Q = B @ B.T + 0.2 * np.eye(n)
    B0 = rng.uniform(-1.0, 1.0, (n, n))
    Sigma0 = B0 @ B0.T + 0.2 * np.eye(n)
    return LinearSystem.with_state_measurements(A, Q, Sigma0)


def random_law(rng: np.random.Generator) -> ChannelLaw:
    """Random joint i.i.d. outcome table."""
    p = rng.random(4) + 0.05
    p = p / p.sum()
    return ChannelLaw("iid_joint", p=p.reshape(2, 2))
