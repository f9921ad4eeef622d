"""Shared test utilities, independent of the package's own filters."""
import numpy as np


def reference_kalman_filter(system, outputs):
    """Textbook time-varying Kalman filter over a full output sequence.

    Starts from the N(0, Sigma0) prior, computes the gain from scratch
    every step, and returns the filtered means and covariances.  Kept
    deliberately separate from the package implementation so it can
    serve as an independent oracle.
    """
    x = np.zeros(system.n)
    P = system.Sigma0.m.copy()
    means, covs = [], []
    for k, y in enumerate(np.atleast_2d(outputs)):
        if k > 0:
            x = system.A @ x
            P = system.A @ P @ system.A.T + system.Q.m
        S = system.C @ P @ system.C.T + system.R.m
        K = P @ system.C.T @ np.linalg.inv(S)
        x = x + K @ (y - system.C @ x)
        P = P - K @ system.C @ P
        P = 0.5 * (P + P.T)
        means.append(x.copy())
        covs.append(P.copy())
    return np.asarray(means), np.asarray(covs)


def random_psd(rng, n, jitter=0.1):
    """Random well-conditioned positive definite matrix."""
    B = rng.uniform(-1.0, 1.0, (n, n))
    return B @ B.T + jitter * np.eye(n)
