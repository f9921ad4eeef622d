"""Linear plant: parameter container, trajectory simulation, open-loop
covariance recursion, and trajectory CSV export/import."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gaussians import CovarianceMatrix, covariance_sqrt, spectral_radius


def _rng(seed) -> np.random.Generator:
    """Counter-based generator; ``seed`` may be an int, a tuple of ints
    (stream key), an existing Generator, or a SeedSequence."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


class LinearSystem:
    """Plant x_{k+1} = A x_k + w_{k+1}, y_k = C x_k + v_k.

    Noise covariances Q (process), R (measurement) and the initial-state
    covariance Sigma0 are validated as positive definite, except that R
    may be exactly zero in direct state-measurement form (C = I, R = 0),
    and ``allow_degenerate=True`` is an explicit test hook admitting
    singular Q / Sigma0 for analytic zero-noise examples.

    A stable A is legal but flagged (``unstable`` is False); the secrecy
    guarantees hinge on the dynamics amplifying lost information.
    """

    def __init__(self, A, C, Q, R, Sigma0, *, allow_degenerate: bool = False) -> None:
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.C = np.atleast_2d(np.asarray(C, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got {self.A.shape}")
        if self.C.shape[1] != n:
            raise ValueError(f"C has {self.C.shape[1]} columns, state dimension is {n}")
        self.Q = CovarianceMatrix(Q)
        self.R = CovarianceMatrix(R)
        self.Sigma0 = CovarianceMatrix(Sigma0)
        if self.Q.dim != n or self.Sigma0.dim != n:
            raise ValueError("Q and Sigma0 must match the state dimension")
        if self.R.dim != self.C.shape[0]:
            raise ValueError("R must match the output dimension")
        self.allow_degenerate = bool(allow_degenerate)
        if not allow_degenerate:
            if self.Q.min_eigenvalue() <= 0:
                raise ValueError("Q must be positive definite (or pass allow_degenerate=True)")
            if self.Sigma0.min_eigenvalue() <= 0:
                raise ValueError("Sigma0 must be positive definite (or pass allow_degenerate=True)")
            if self.R.min_eigenvalue() <= 0 and not self.state_measurement:
                raise ValueError(
                    "R must be positive definite unless the system is in "
                    "state-measurement form (C = I, R = 0)"
                )
        self.rho = spectral_radius(self.A)
        # Warning flag, not an error: stable plants are admitted but give
        # the eavesdropper bounded error no matter the code.
        self.unstable = self.rho > 1.0

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.C.shape[0]

    @property
    def state_measurement(self) -> bool:
        """True when outputs are the states themselves (C = I, R = 0)."""
        return (
            self.C.shape[0] == self.n
            and np.array_equal(self.C, np.eye(self.n))
            and not np.any(self.R.m)
        )

    @classmethod
    def with_state_measurements(cls, A, Q, Sigma0, *, allow_degenerate: bool = False):
        """Direct state-measurement form: C = I, R = 0."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        n = A.shape[0]
        return cls(A, np.eye(n), Q, np.zeros((n, n)), Sigma0, allow_degenerate=allow_degenerate)


@dataclass(frozen=True)
class Trajectory:
    """One simulated path of the plant over times 0..horizon.

    Arrays have ``horizon + 1`` rows.  The slot ``process_noise[0]``
    stores the initial-state draw (x_0 itself), so every state satisfies
    x_k = sum_{j=0}^{k} A^{k-j} w_j with w_0 = x_0; rows 1.. obey
    x_{k} = A x_{k-1} + w_k exactly.
    """

    states: np.ndarray
    outputs: np.ndarray
    process_noise: np.ndarray
    measurement_noise: np.ndarray
    seed: object = field(default=None)

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1

    def __post_init__(self):
        rows = self.states.shape[0]
        for name in ("outputs", "process_noise", "measurement_noise"):
            if getattr(self, name).shape[0] != rows:
                raise ValueError(f"{name} must have {rows} rows like states")


def simulate(system: LinearSystem, horizon: int, seed, x0: np.ndarray | None = None) -> Trajectory:
    """Sample a trajectory of length horizon + 1.

    All draws come from a single counter-based stream keyed by ``seed``,
    so identical seeds reproduce the trajectory bit for bit.  ``x0``
    overrides the initial-state draw (zero-noise analytic tests).
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    rng = _rng(seed)
    n, m = system.n, system.m
    lq = covariance_sqrt(system.Q.m)
    lr = covariance_sqrt(system.R.m)
    l0 = covariance_sqrt(system.Sigma0.m)

    states = np.zeros((horizon + 1, n))
    process = np.zeros((horizon + 1, n))
    measurement = np.zeros((horizon + 1, m))
    if x0 is not None:
        states[0] = np.asarray(x0, dtype=float).reshape(n)
    else:
        states[0] = l0 @ rng.standard_normal(n)
    process[0] = states[0]
    for k in range(1, horizon + 1):
        w = lq @ rng.standard_normal(n)
        process[k] = w
        states[k] = system.A @ states[k - 1] + w
    for k in range(horizon + 1):
        v = lr @ rng.standard_normal(m) if m else np.zeros(0)
        measurement[k] = v
    outputs = states @ system.C.T + measurement
    return Trajectory(states, outputs, process, measurement, seed=seed)


def open_loop_covariance(system: LinearSystem, horizon: int) -> list[CovarianceMatrix]:
    """Covariances of the no-measurement predictor: P_0 = Sigma0,
    P_k = A P_{k-1} A' + Q."""
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    out = [system.Sigma0]
    P = system.Sigma0.m
    for _ in range(horizon):
        P = system.A @ P @ system.A.T + system.Q.m
        P = 0.5 * (P + P.T)
        out.append(CovarianceMatrix(P))
    return out


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """Write a trajectory as CSV with header
    k, x_1..x_n, y_1..y_m, w_1..w_n, v_1..v_m."""
    n = traj.states.shape[1]
    m = traj.outputs.shape[1]
    header = (
        ["k"]
        + [f"x_{i}" for i in range(1, n + 1)]
        + [f"y_{i}" for i in range(1, m + 1)]
        + [f"w_{i}" for i in range(1, n + 1)]
        + [f"v_{i}" for i in range(1, m + 1)]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(traj.horizon + 1):
            row = (
                [k]
                + [format(v, ".17g") for v in traj.states[k]]
                + [format(v, ".17g") for v in traj.outputs[k]]
                + [format(v, ".17g") for v in traj.process_noise[k]]
                + [format(v, ".17g") for v in traj.measurement_noise[k]]
            )
            writer.writerow(row)


def trajectory_from_csv(path) -> Trajectory:
    """Read a trajectory written by :func:`trajectory_to_csv`."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    n = sum(1 for h in header if h.startswith("x_"))
    m = sum(1 for h in header if h.startswith("y_"))
    expected = ["k"] + [f"x_{i}" for i in range(1, n + 1)] + [f"y_{i}" for i in range(1, m + 1)] \
        + [f"w_{i}" for i in range(1, n + 1)] + [f"v_{i}" for i in range(1, m + 1)]
    if header != expected:
        raise ValueError(f"unexpected trajectory CSV header in {path}: {header}")
    data = np.asarray([[float(v) for v in row] for row in rows])
    ks = data[:, 0].astype(int)
    if not np.array_equal(ks, np.arange(len(rows))):
        raise ValueError(f"trajectory CSV rows must be k = 0..K in order in {path}")
    states = data[:, 1 : 1 + n]
    outputs = data[:, 1 + n : 1 + n + m]
    process = data[:, 1 + n + m : 1 + 2 * n + m]
    measurement = data[:, 1 + 2 * n + m :]
    return Trajectory(states, outputs, process, measurement, seed=None)
