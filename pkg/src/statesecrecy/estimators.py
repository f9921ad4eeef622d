"""Receiver-side estimators.

Three estimation schemes live here:

* :class:`UserFilter` -- the legitimate user's filter, which decodes
  received packets exactly and propagates open-loop through drops.
* :class:`EveFilter` -- the eavesdropper's exact MMSE filter, realised
  as a Kalman-style recursion on the augmented pair (current value,
  reference value).  Both the plant dynamics and the ack-driven
  reference jump are linear-Gaussian maps whose matrices the
  eavesdropper knows (she observes every acknowledgment), so the
  recursion introduces no approximation.  In state mode the current
  block is the plant state and the marginal covariance is her state
  error; in output mode it is the sensor's local estimate and the
  marginal covariance is her error about that estimate.
* :func:`batch_oracle` -- ground truth for validation: stacks the whole
  process up to time k into one Gaussian vector, forms every
  intercepted packet as an explicit linear functional of it, and
  conditions once.

The filter and the oracle are kept deliberately independent; their
agreement is the correctness anchor for the whole module.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .channel import OutcomeTrace, reference_times
from .coding import LocalKalmanFilter, user_decode
from .gaussians import (
    CovarianceMatrix,
    GaussianBelief,
    condition,
    pseudoinverse,
    psd_floor,
    symmetrize,
)
from .plant import LinearSystem, Trajectory

ORACLE_SIZE_CAP = 60


def _mode_params(system: LinearSystem, mode: str):
    """(prior covariance at time 0, per-step noise covariance, reception
    covariance of the user) for the tracked process in the given mode."""
    if mode == "state":
        if not system.state_measurement:
            raise ValueError("state mode requires a system in state-measurement form")
        zero = np.zeros((system.n, system.n))
        return system.Sigma0.m, system.Q.m, zero
    if mode == "output":
        kf = LocalKalmanFilter(system)
        noise = symmetrize(kf.estimate_noise_covariance)
        return noise.copy(), noise, symmetrize(kf.filtered_covariance)
    raise ValueError(f"mode must be 'state' or 'output', got {mode!r}")


# ---------------------------------------------------------------------------
# User


@dataclass(frozen=True)
class UserBelief:
    """User's estimate of x_k after processing step k (k = next index to
    process; -1-time convention before the first step)."""

    est: np.ndarray
    cov: np.ndarray
    last_decoded: tuple[int, np.ndarray]
    k: int


class UserFilter:
    """Optimal user estimator under the reference-differencing code.

    On a reception the decode is exact, so the estimate matches the
    no-drop optimum: covariance 0 in state mode, the steady filtered
    covariance in output mode.  On a drop the belief propagates
    open-loop (A est, A P A' + Q); the very first step uses Sigma0.
    """

    def __init__(self, system: LinearSystem, mode: str) -> None:
        self.system = system
        self.mode = mode
        _, _, self.reception_cov = _mode_params(system, mode)

    def initial(self) -> UserBelief:
        n = self.system.n
        return UserBelief(np.zeros(n), np.zeros((n, n)), (-1, np.zeros(n)), 0)

    def step(self, ub: UserBelief, gamma_u: int, payload) -> UserBelief:
        """Advance to time ub.k given the user's channel outcome."""
        k = ub.k
        A, Q = self.system.A, self.system.Q.m
        if gamma_u:
            if payload is None:
                raise ValueError("reception flagged but payload is missing")
            decoded = user_decode(payload, ub.last_decoded, k, A)
            return UserBelief(decoded, self.reception_cov.copy(), (k, decoded), k + 1)
        if payload is not None:
            raise ValueError("drop flagged but a payload was supplied")
        if k == 0:
            return UserBelief(ub.est.copy(), self.system.Sigma0.m.copy(), ub.last_decoded, 1)
        cov = symmetrize(A @ ub.cov @ A.T + Q)
        return UserBelief(A @ ub.est, cov, ub.last_decoded, k + 1)


# ---------------------------------------------------------------------------
# Eavesdropper


@dataclass(frozen=True)
class EveBelief:
    """Eavesdropper's joint Gaussian over (current, reference) blocks.

    ``r`` is the reference time she knows from the intercepted acks; at
    the conditioning step for time k it equals the encoder's t_k.  The
    current-block marginal covariance is her conditional error
    covariance about the tracked value (plant state in state mode,
    sensor local estimate in output mode).
    """

    joint: GaussianBelief
    r: int
    k: int
    mode: str

    def estimate(self) -> np.ndarray:
        return self.joint.mean[self.joint.block_slice("current")].copy()

    def covariance(self) -> CovarianceMatrix:
        return self.joint.marginal("current").cov

    def trace(self) -> float:
        return self.covariance().trace()


class EveFilter:
    """Exact MMSE recursion for the eavesdropper in either mode."""

    def __init__(self, system: LinearSystem, mode: str) -> None:
        self.system = system
        self.mode = mode
        self.prior0, self.noise, _ = _mode_params(system, mode)
        self.n = system.n

    def initial(self) -> EveBelief:
        """Belief before any packet: current ~ N(0, prior), reference is
        the zero vector exactly (degenerate block, -1 convention)."""
        n = self.n
        cov = np.zeros((2 * n, 2 * n))
        cov[:n, :n] = self.prior0
        joint = GaussianBelief(np.zeros(2 * n), cov, [("current", n), ("reference", n)])
        return EveBelief(joint, -1, 0, self.mode)

    def predict(self, b: EveBelief, gamma_u_prev: int) -> EveBelief:
        """Propagate the posterior at time k-1 to the prior at time k.

        If the user acknowledged packet k-1, the reference jumps there:
        the new reference block is a copy of the pre-propagation current
        block.  Then the current block advances through the dynamics
        with fresh process noise.
        """
        n = self.n
        A = self.system.A
        S = b.joint.cov.m
        mu = b.joint.mean
        scc, scr, srr = S[:n, :n], S[:n, n:], S[n:, n:]
        mc, mr = mu[:n], mu[n:]
        if gamma_u_prev:
            new_ref_cov = scc
            cross = A @ scc
            r = b.k - 1
            mean = np.concatenate([A @ mc, mc])
        else:
            new_ref_cov = srr
            cross = A @ scr
            r = b.r
            mean = np.concatenate([A @ mc, mr])
        top = A @ scc @ A.T + self.noise
        cov = psd_floor(np.block([[top, cross], [cross.T, new_ref_cov]]))
        joint = GaussianBelief(mean, cov, [("current", n), ("reference", n)])
        return EveBelief(joint, r, b.k, b.mode)

    def update(self, b: EveBelief, gamma_e: int, payload=None) -> EveBelief:
        """Fold in the eavesdropper's own channel outcome at time b.k.

        An erasure carries nothing beyond the ack bits already folded
        into the reference bookkeeping, so the belief is returned
        unchanged.  An interception observes the linear functional
        z = current - A^(k - r) reference without noise; the joint is
        conditioned on it through the shared Schur-complement routine.
        """
        if not gamma_e:
            if payload is not None:
                raise ValueError("payload supplied for an erasure step")
            return b
        if payload is None:
            raise ValueError("interception flagged but payload is missing")
        n = self.n
        payload = np.asarray(payload, dtype=float).reshape(n)
        power = np.linalg.matrix_power(self.system.A, b.k - b.r)
        L = np.hstack([np.eye(n), -power])
        S = b.joint.cov.m
        mu = b.joint.mean
        sz = L @ S @ L.T
        sxz = S @ L.T
        mean3 = np.concatenate([mu, L @ mu])
        cov3 = np.block([[S, sxz], [sxz.T, sz]])
        joint3 = GaussianBelief(
            mean3, symmetrize(cov3), [("current", n), ("reference", n), ("packet", n)]
        )
        post = condition(joint3, "packet", payload)
        floored = GaussianBelief(post.mean, psd_floor(post.cov.m), post.blocks)
        return replace(b, joint=floored)

    def advance(self, b: EveBelief) -> EveBelief:
        """Close step b.k: the next predict consumes gamma_u[b.k]."""
        return replace(b, k=b.k + 1)

    def run(self, trace: OutcomeTrace, payloads) -> list[EveBelief]:
        """Posterior beliefs at times 0..horizon for a full trace.

        ``payloads[k]`` must be the encoded packet z_k for every k with
        gamma_e[k] = 1 (other entries are ignored).
        """
        beliefs = []
        b = self.initial()
        for k in range(trace.horizon + 1):
            if k > 0:
                b = self.predict(b, int(trace.gamma_u[k - 1]))
            z = payloads[k] if trace.gamma_e[k] else None
            b = self.update(b, int(trace.gamma_e[k]), z)
            beliefs.append(b)
            b = self.advance(b)
        return beliefs


# ---------------------------------------------------------------------------
# Batch conditioning oracle


def _batch_prior(system: LinearSystem, mode: str, k: int) -> np.ndarray:
    """Covariance of the stacked vector (value_0, ..., value_k) of the
    tracked process."""
    prior0, noise, _ = _mode_params(system, mode)
    n = system.n
    A = system.A
    dim = n * (k + 1)
    V = np.zeros((dim, dim))
    var = prior0.copy()
    variances = [var]
    for _ in range(k):
        var = symmetrize(A @ var @ A.T + noise)
        variances.append(var)
    for j in range(k + 1):
        V[j * n : (j + 1) * n, j * n : (j + 1) * n] = variances[j]
        block = variances[j]
        for i in range(j + 1, k + 1):
            block = A @ block
            V[i * n : (i + 1) * n, j * n : (j + 1) * n] = block
            V[j * n : (j + 1) * n, i * n : (i + 1) * n] = block.T
    return V


def _packet_functionals(system: LinearSystem, trace: OutcomeTrace, k: int) -> np.ndarray:
    """Rows of the linear map sending the stacked process to the
    intercepted packets up to time k (empty if nothing was intercepted)."""
    n = system.n
    A = system.A
    t = reference_times(trace.gamma_u)
    rows = []
    for m in range(k + 1):
        if not trace.gamma_e[m]:
            continue
        row = np.zeros((n, n * (k + 1)))
        row[:, m * n : (m + 1) * n] = np.eye(n)
        if t[m] >= 0:
            row[:, t[m] * n : (t[m] + 1) * n] -= np.linalg.matrix_power(A, m - t[m])
        rows.append(row)
    if not rows:
        return np.zeros((0, n * (k + 1)))
    return np.vstack(rows)


def _check_oracle_size(system: LinearSystem, k: int) -> None:
    size = system.n * (k + 1)
    if size > ORACLE_SIZE_CAP:
        raise ValueError(
            f"batch oracle limited to stacked dimension {ORACLE_SIZE_CAP}, "
            f"got {size} (n = {system.n}, k = {k})"
        )


def batch_oracle(
    system: LinearSystem,
    mode: str,
    trace: OutcomeTrace,
    k: int,
    trajectory: Trajectory | None = None,
) -> CovarianceMatrix:
    """Ground-truth eavesdropper covariance at time k by one-shot
    conditioning of the stacked process on all intercepted packets.

    The conditional covariance depends only on which packets were
    intercepted, not on their values, so ``trajectory`` is optional; it
    is only consulted by :func:`batch_oracle_estimate`.
    """
    del trajectory
    if not 0 <= k <= trace.horizon:
        raise ValueError(f"k = {k} outside trace range 0..{trace.horizon}")
    _check_oracle_size(system, k)
    n = system.n
    V = _batch_prior(system, mode, k)
    L = _packet_functionals(system, trace, k)
    tail = slice(k * n, (k + 1) * n)
    if L.shape[0] == 0:
        return CovarianceMatrix(V[tail, tail])
    sz = L @ V @ L.T
    sxz = V[tail, :] @ L.T
    post = symmetrize(V[tail, tail] - sxz @ pseudoinverse(sz) @ sxz.T)
    return CovarianceMatrix(post)


def batch_oracle_estimate(
    system: LinearSystem,
    mode: str,
    trace: OutcomeTrace,
    trajectory: Trajectory,
    k: int,
) -> tuple[np.ndarray, CovarianceMatrix]:
    """Conditional mean and covariance at time k from the batch joint,
    with packet values replayed from the trajectory.

    In output mode the packets encode the sensor's local Kalman
    estimates, which are regenerated from the trajectory outputs.
    """
    if not 0 <= k <= trace.horizon:
        raise ValueError(f"k = {k} outside trace range 0..{trace.horizon}")
    if trajectory.horizon < k:
        raise ValueError(f"trajectory covers 0..{trajectory.horizon}, need 0..{k}")
    _check_oracle_size(system, k)
    n = system.n
    if mode == "state":
        values = trajectory.states[: k + 1]
    else:
        kf = LocalKalmanFilter(system)
        values = np.vstack([kf.step(trajectory.outputs[j]) for j in range(k + 1)])
    V = _batch_prior(system, mode, k)
    L = _packet_functionals(system, trace, k)
    tail = slice(k * n, (k + 1) * n)
    if L.shape[0] == 0:
        return np.zeros(n), CovarianceMatrix(V[tail, tail])
    z = L @ values.reshape(-1)
    sz = L @ V @ L.T
    sxz = V[tail, :] @ L.T
    gain = sxz @ pseudoinverse(sz)
    mean = gain @ z  # prior means are zero
    post = symmetrize(V[tail, tail] - gain @ sxz.T)
    return mean, CovarianceMatrix(post)


# ---------------------------------------------------------------------------
# Step-log export


STEP_LOG_COLUMNS = [
    "k",
    "gamma_u",
    "gamma_e",
    "tr_P_user",
    "tr_P_eve",
    "tr_P_openloop",
    "tr_H",
    "critical_flag",
]


def write_step_log(path, rows) -> None:
    """Write per-step estimator records as CSV.

    ``rows`` is an iterable of dicts keyed by :data:`STEP_LOG_COLUMNS`;
    ``tr_H`` may be None outside output mode and is written empty.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STEP_LOG_COLUMNS)
        for row in rows:
            out = []
            for col in STEP_LOG_COLUMNS:
                v = row[col]
                if v is None:
                    out.append("")
                elif col in ("k", "gamma_u", "gamma_e", "critical_flag"):
                    out.append(str(int(v)))
                else:
                    out.append(format(float(v), ".17g"))
            writer.writerow(out)
