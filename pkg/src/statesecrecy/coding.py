"""Reference-differencing secrecy encoder and the user-side decoder.

The sensor transmits z_k = x_k - A^(k - t) x_t, where t is the time of
the last packet the user acknowledged (t = -1, x_{-1} = 0 before any
ack).  A receiver that knows x_t recovers x_k exactly; a receiver that
missed x_t is stuck, and the gap compounds through every later packet.
In output-measurement mode the same difference is applied to the local
steady-state Kalman estimates instead of the raw states.

Note the k = 0 packet encodes against the zero reference and therefore
goes out in the clear; see the package README for the security caveat.
"""
from __future__ import annotations

import numpy as np

from .gaussians import kalman_gain, solve_dare
from .plant import LinearSystem


class LocalKalmanFilter:
    """Sensor-side steady-state Kalman filter producing local estimates.

    Runs the converged gain from the start, which is exact when the
    initial state covariance equals the steady-state prediction
    covariance (the operating assumption in output mode).  The estimate
    recursion is

        est_k = A est_{k-1} + K (y_k - C A est_{k-1}),   est_{-1} = 0,

    and the innovation y_k - C A est_{k-1} is white with covariance
    C P C' + R.
    """

    def __init__(self, system: LinearSystem) -> None:
        if system.state_measurement:
            raise ValueError("local Kalman filtering needs an output model (R > 0)")
        self.system = system
        self.pred_cov = solve_dare(system.A, system.C, system.Q.m, system.R.m)
        self.gain = kalman_gain(self.pred_cov.m, system.C, system.R.m)
        self.steady = True
        self.est = np.zeros(system.n)
        self.last_innovation: np.ndarray | None = None

    @property
    def innovation_covariance(self) -> np.ndarray:
        P = self.pred_cov.m
        return self.system.C @ P @ self.system.C.T + self.system.R.m

    @property
    def filtered_covariance(self) -> np.ndarray:
        """Steady-state error covariance of est_k, P - K C P."""
        P = self.pred_cov.m
        return P - self.gain @ self.system.C @ P

    @property
    def estimate_noise_covariance(self) -> np.ndarray:
        """Covariance of the white noise K(y_k - C A est_{k-1}) driving the
        estimate recursion: K (C P C' + R) K'."""
        return self.gain @ self.innovation_covariance @ self.gain.T

    def step(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != self.system.m:
            raise ValueError(f"output has length {y.shape[0]}, expected {self.system.m}")
        pred = self.system.A @ self.est
        self.last_innovation = y - self.system.C @ pred
        self.est = pred + self.gain @ self.last_innovation
        return self.est


class SecrecyEncoder:
    """Sensor-side encoder state machine.

    Call :meth:`encode` once per time step (strictly increasing k) and
    :meth:`ack` when the user acknowledges the packet just encoded.  The
    weighting matrix A^(k - t) is maintained incrementally: reset on each
    ack, multiplied by A per step.
    """

    def __init__(self, system: LinearSystem, mode: str) -> None:
        if mode not in ("state", "output"):
            raise ValueError(f"mode must be 'state' or 'output', got {mode!r}")
        if mode == "state" and not system.state_measurement:
            raise ValueError("state mode requires a system in state-measurement form")
        self.system = system
        self.mode = mode
        self.kf = LocalKalmanFilter(system) if mode == "output" else None
        self.ref_time = -1
        self.ref_value = np.zeros(system.n)
        self._power = system.A.copy()  # A^(k - ref_time) for the next encode
        self._next_k = 0
        self._pending: tuple[int, np.ndarray] | None = None

    def encode(self, k: int, measurement: np.ndarray) -> np.ndarray:
        """Encode step k.  ``measurement`` is x_k in state mode and the raw
        output y_k in output mode (the local filter is stepped first)."""
        if k < self._next_k:
            raise ValueError(f"encode index {k} not beyond last encoded index {self._next_k - 1}")
        if self.mode == "output":
            if k != self._next_k:
                raise ValueError(
                    f"output mode consumes every measurement; expected k = {self._next_k}, got {k}"
                )
            value = self.kf.step(measurement).copy()
        else:
            gap = k - self._next_k
            if gap:
                self._power = np.linalg.matrix_power(self.system.A, gap) @ self._power
            value = np.asarray(measurement, dtype=float).reshape(self.system.n).copy()
        z = value - self._power @ self.ref_value
        self._pending = (k, value)
        self._next_k = k + 1
        self._power = self.system.A @ self._power
        return z

    def ack(self, k: int) -> None:
        """Record the user's acknowledgment of packet k (the last one
        encoded); the encoded value becomes the new reference."""
        if self._pending is None or self._pending[0] != k:
            last = None if self._pending is None else self._pending[0]
            raise ValueError(f"ack for index {k}, but last encoded index is {last}")
        self.ref_time = k
        self.ref_value = self._pending[1]
        self._power = self.system.A.copy()  # A^((k+1) - k)


def encode_trace(system: LinearSystem, mode: str, trace, trajectory) -> list[np.ndarray]:
    """Replay the encoder over a whole trajectory/outcome pair.

    Returns the packets z_0..z_K; acknowledgments follow the user's
    reception bits in ``trace``.
    """
    encoder = SecrecyEncoder(system, mode)
    packets = []
    for k in range(trace.horizon + 1):
        measurement = trajectory.states[k] if mode == "state" else trajectory.outputs[k]
        packets.append(encoder.encode(k, measurement))
        if trace.gamma_u[k]:
            encoder.ack(k)
    return packets


def user_decode(received, user_ref: tuple[int, np.ndarray], k: int, A: np.ndarray):
    """Invert the encoding at the receiver.

    ``received`` is the channel output (payload or None for an erasure);
    ``user_ref`` is the receiver's (time, value) reference, identical to
    the sensor's by the ack protocol.  Returns the decoded value, or
    None on an erasure.
    """
    if received is None:
        return None
    t, value = user_ref
    A = np.atleast_2d(np.asarray(A, dtype=float))
    z = np.asarray(received, dtype=float).reshape(-1)
    return z + np.linalg.matrix_power(A, k - t) @ np.asarray(value, dtype=float).reshape(-1)
