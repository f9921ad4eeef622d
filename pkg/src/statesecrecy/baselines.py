"""Comparison mechanisms that withhold raw state packets instead of coding.

Two policies: random withholding (transmit with probability 1 - p) and
deterministic withholding (transmit only once the user has missed more
than s consecutive packets).  Withholding means nothing is on the
channel, so neither receiver gets anything that step; when a raw state
is transmitted and received, the receiving side's error resets to zero.
Both policies assume the eavesdropper observes whether a packet was
sent, consistent with her access to the acknowledgment stream.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import OutcomeTrace
from .gaussians import symmetrize
from .plant import LinearSystem, _rng


class RandomWithholding:
    """Transmit independently with probability 1 - p from a seeded stream.

    Decisions are keyed by step index, so :meth:`decide_transmit` is pure
    given (seed, k) and replays identically in any order.
    """

    def __init__(self, p: float, seed) -> None:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"withholding probability must be in [0, 1], got {p}")
        self.p = float(p)
        self.seed = seed
        self._draws = np.zeros(0)

    def _uniform(self, k: int) -> float:
        if k >= self._draws.shape[0]:
            size = max(64, 2 * (k + 1))
            self._draws = _rng(self.seed).random(size)
        return float(self._draws[k])

    def decide_transmit(self, k: int, gamma_u_history=None) -> int:
        del gamma_u_history  # decision is independent of the channel
        return int(self._uniform(k) >= self.p)


class DeterministicWithholding:
    """Transmit only when the user's consecutive-loss run exceeds s.

    A loss at step j is "no packet reached the user": either nothing was
    transmitted or the transmission was dropped.  The run preceding k is
    replayed from the user outcome history, so the decision is a pure
    function of (s, gamma_u_history); at k = 0 the preceding run is
    empty and nothing is transmitted.
    """

    def __init__(self, s: int) -> None:
        if s < 1:
            raise ValueError(f"consecutive-loss threshold must be >= 1, got {s}")
        self.s = int(s)

    def decide_transmit(self, k: int, gamma_u_history) -> int:
        gamma_u_history = np.asarray(gamma_u_history, dtype=int)
        if gamma_u_history.shape[0] < k:
            raise ValueError(f"need gamma_u history up to step {k - 1}, got {gamma_u_history.shape[0]} entries")
        run = 0
        for j in range(k):
            transmitted = run > self.s
            received = transmitted and gamma_u_history[j]
            run = 0 if received else run + 1
        return int(run > self.s)


def decide_transmit(policy, k: int, gamma_u_history=None) -> int:
    """Uniform entry point for either policy."""
    return policy.decide_transmit(k, gamma_u_history)


@dataclass(frozen=True)
class BaselineRun:
    """Per-step covariances and transmit decisions for one trace."""

    P_user: np.ndarray  # (K+1, n, n)
    P_eve: np.ndarray  # (K+1, n, n)
    transmit: np.ndarray  # (K+1,)


def baseline_covariances(policy, system: LinearSystem, trace: OutcomeTrace) -> BaselineRun:
    """Exact error-covariance recursions for both receivers under a
    withholding policy transmitting raw states (state-measurement mode).

    Reception requires transmit = 1 and the receiver's channel bit = 1;
    a reception resets that receiver's covariance to zero, anything else
    propagates it open-loop (the first step starts from Sigma0).
    """
    if not system.state_measurement:
        raise ValueError("withholding baselines are defined for state-measurement systems")
    n = system.n
    A, Q, Sigma0 = system.A, system.Q.m, system.Sigma0.m
    K = trace.horizon
    P_user = np.zeros((K + 1, n, n))
    P_eve = np.zeros((K + 1, n, n))
    transmit = np.zeros(K + 1, dtype=int)
    pu = None
    pe = None
    for k in range(K + 1):
        tx = policy.decide_transmit(k, trace.gamma_u[:k])
        transmit[k] = tx
        got_u = tx and trace.gamma_u[k]
        got_e = tx and trace.gamma_e[k]
        if k == 0:
            pu = np.zeros((n, n)) if got_u else Sigma0.copy()
            pe = np.zeros((n, n)) if got_e else Sigma0.copy()
        else:
            pu = np.zeros((n, n)) if got_u else symmetrize(A @ pu @ A.T + Q)
            pe = np.zeros((n, n)) if got_e else symmetrize(A @ pe @ A.T + Q)
        P_user[k] = pu
        P_eve[k] = pe
    return BaselineRun(P_user, P_eve, transmit)
