"""Dense Gaussian conditioning and linear-algebra primitives.

Everything downstream (plant, estimators, oracle) works with plain
``numpy`` arrays internally and uses the containers here at module
boundaries: :class:`CovarianceMatrix` validates symmetry/PSD-ness once,
:class:`GaussianBelief` tracks which coordinate ranges mean what, and
:func:`condition` is the single Schur-complement implementation shared
by the recursive filters and the batch oracle.
"""
from __future__ import annotations

import numpy as np

# Singular values below PINV_RCOND * sigma_max are treated as zero, so
# exactly singular observation covariances (zero-noise modes, degenerate
# reference blocks) condition cleanly.
PINV_RCOND = 1e-10

# Symmetry / PSD tolerances scale with the matrix magnitude: covariances
# in diverging-error experiments reach 1e18, where absolute 1e-10 would
# reject pure round-off.
SYMMETRY_RTOL = 1e-10
PSD_RTOL = 1e-9

DARE_TOL = 1e-12
DARE_MAX_ITER = 100_000
DARE_RESIDUAL_TOL = 1e-9


class NumericError(RuntimeError):
    """Raised when an iterative solver diverges or a matrix problem is
    inconsistent (e.g. singular innovation covariance with no solution)."""


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return (M + M') / 2."""
    return 0.5 * (m + m.T)


class CovarianceMatrix:
    """Symmetric positive-semidefinite matrix, validated on construction.

    The input is symmetrized; asymmetry beyond ``SYMMETRY_RTOL`` (relative
    to the largest entry) or a minimum eigenvalue below ``-PSD_RTOL`` times
    the scale raises ``ValueError``.
    """

    __slots__ = ("m",)

    def __init__(self, entries) -> None:
        m = np.asarray(entries, dtype=float)
        if m.ndim == 0:
            m = m.reshape(1, 1)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"covariance must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("covariance contains non-finite entries")
        scale = max(1.0, float(np.max(np.abs(m))) if m.size else 0.0)
        asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
        if asym > SYMMETRY_RTOL * scale:
            raise ValueError(
                f"covariance asymmetry {asym:.3e} exceeds tolerance at scale {scale:.3e}"
            )
        m = symmetrize(m)
        min_eig = float(np.linalg.eigvalsh(m).min()) if m.size else 0.0
        if min_eig < -PSD_RTOL * scale:
            raise ValueError(
                f"covariance not PSD: min eigenvalue {min_eig:.3e} at scale {scale:.3e}"
            )
        self.m = m

    @property
    def dim(self) -> int:
        return self.m.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.m))

    def diagonal(self) -> np.ndarray:
        return np.diag(self.m).copy()

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.m).min())

    def __array__(self, dtype=None, copy=None):
        if dtype is not None:
            return self.m.astype(dtype)
        return self.m

    def __repr__(self) -> str:
        return f"CovarianceMatrix({self.m!r})"

    @classmethod
    def zero(cls, dim: int) -> "CovarianceMatrix":
        return cls(np.zeros((dim, dim)))


class GaussianBelief:
    """Gaussian over a vector partitioned into named blocks.

    ``blocks`` is an ordered sequence of ``(name, size)`` pairs that must
    partition ``[0, dim)`` exactly; block names index into the mean and
    covariance via :meth:`block_slice` and :meth:`marginal`.
    """

    __slots__ = ("mean", "cov", "blocks")

    def __init__(self, mean, cov, blocks) -> None:
        self.mean = np.asarray(mean, dtype=float).reshape(-1)
        self.cov = cov if isinstance(cov, CovarianceMatrix) else CovarianceMatrix(cov)
        blocks = tuple((str(name), int(size)) for name, size in blocks)
        if any(size <= 0 for _, size in blocks):
            raise ValueError("block sizes must be positive")
        names = [name for name, _ in blocks]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate block names: {names}")
        total = sum(size for _, size in blocks)
        if total != self.mean.shape[0]:
            raise ValueError(
                f"blocks cover {total} coordinates but mean has {self.mean.shape[0]}"
            )
        if self.cov.dim != self.mean.shape[0]:
            raise ValueError(
                f"mean length {self.mean.shape[0]} != covariance dim {self.cov.dim}"
            )
        self.blocks = blocks

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def block_names(self) -> tuple:
        return tuple(name for name, _ in self.blocks)

    def block_slice(self, name: str) -> slice:
        start = 0
        for bname, size in self.blocks:
            if bname == name:
                return slice(start, start + size)
            start += size
        raise KeyError(f"no block named {name!r}; have {self.block_names()}")

    def marginal(self, name: str) -> "GaussianBelief":
        s = self.block_slice(name)
        return GaussianBelief(
            self.mean[s], CovarianceMatrix(self.cov.m[s, s]), [(name, s.stop - s.start)]
        )


def pseudoinverse(m: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudoinverse (SVD, singular values below
    ``PINV_RCOND * sigma_max`` zeroed)."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    return np.linalg.pinv(m, rcond=PINV_RCOND)


def condition(joint: GaussianBelief, observed_block: str, observed: np.ndarray) -> GaussianBelief:
    """Condition a joint Gaussian on an observed block.

    Returns the belief over the remaining blocks (in their original
    order) with

        mean = mu_x + S_xz S_zz^+ (observed - mu_z)
        cov  = S_xx - S_xz S_zz^+ S_zx

    The pseudoinverse makes singular ``S_zz`` legal: conditioning on a
    degenerate observation keeps the consistent part and ignores the
    deterministic directions.
    """
    zs = joint.block_slice(observed_block)
    observed = np.asarray(observed, dtype=float).reshape(-1)
    if observed.shape[0] != zs.stop - zs.start:
        raise ValueError(
            f"observed vector has length {observed.shape[0]}, block "
            f"{observed_block!r} has size {zs.stop - zs.start}"
        )
    keep = [i for i in range(joint.dim) if not (zs.start <= i < zs.stop)]
    keep = np.asarray(keep, dtype=int)
    cov = joint.cov.m
    s_xx = cov[np.ix_(keep, keep)]
    s_xz = cov[np.ix_(keep, range(zs.start, zs.stop))]
    s_zz = cov[zs, zs]
    gain = s_xz @ pseudoinverse(s_zz)
    mean = joint.mean[keep] + gain @ (observed - joint.mean[zs])
    post = symmetrize(s_xx - gain @ s_xz.T)
    blocks = [(n, s) for n, s in joint.blocks if n != observed_block]
    return GaussianBelief(mean, CovarianceMatrix(post), blocks)


def solve_dare(A: np.ndarray, C: np.ndarray, Q: np.ndarray, R: np.ndarray) -> CovarianceMatrix:
    """Steady-state prediction covariance of the filtering Riccati map.

    Iterates P <- A P A' + Q - A P C' (C P C' + R)^-1 C P A' from P = Q
    until the update falls below ``DARE_TOL`` in max-norm.  The caller is
    responsible for detectability of (A, C) and Q, R > 0; divergence or a
    residual above ``DARE_RESIDUAL_TOL`` raises :class:`NumericError`.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    Q = np.asarray(CovarianceMatrix(Q))
    R = np.asarray(CovarianceMatrix(R))
    P = Q.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(DARE_MAX_ITER):
            S = C @ P @ C.T + R
            try:
                gain_term = A @ P @ C.T @ np.linalg.solve(S, C @ P @ A.T)
            except np.linalg.LinAlgError as exc:
                raise NumericError(f"singular innovation covariance in Riccati step: {exc}")
            P_next = symmetrize(A @ P @ A.T + Q - gain_term)
            step = float(np.max(np.abs(P_next - P)))
            P = P_next
            if not np.isfinite(step):
                raise NumericError("Riccati iteration diverged to non-finite values")
            if step <= DARE_TOL:
                break
    residual = _dare_residual(A, C, Q, R, P)
    if residual > DARE_RESIDUAL_TOL:
        raise NumericError(
            f"Riccati iteration did not converge: residual {residual:.3e} "
            f"after {DARE_MAX_ITER} iterations"
        )
    return CovarianceMatrix(P)


def _dare_residual(A, C, Q, R, P) -> float:
    S = C @ P @ C.T + R
    rhs = A @ P @ A.T + Q - A @ P @ C.T @ np.linalg.solve(S, C @ P @ A.T)
    return float(np.max(np.abs(P - rhs)))


def kalman_gain(P: np.ndarray, C: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Steady-state gain K = P C' (C P C' + R)^+.

    Singular innovation covariances are admitted through the
    pseudoinverse as long as the defining equation K (C P C' + R) = P C'
    stays consistent; otherwise :class:`NumericError` is raised.
    """
    P = np.asarray(P, dtype=float)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    S = C @ P @ C.T + R
    target = P @ C.T
    K = target @ pseudoinverse(S)
    scale = max(1.0, float(np.max(np.abs(target))))
    if float(np.max(np.abs(K @ S - target))) > 1e-9 * scale:
        raise NumericError("singular innovation covariance: gain equation inconsistent")
    return K


def spectral_radius(A: np.ndarray) -> float:
    """max |lambda_i(A)| over the eigenvalues of a square matrix."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"spectral radius needs a square matrix, got {A.shape}")
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def dominant_left_eigenvector(A: np.ndarray) -> np.ndarray:
    """Real left eigenvector for the eigenvalue attaining the spectral radius.

    Used by the growth-rate bounds, which are stated for a real dominant
    eigenvalue; a complex dominant pair raises :class:`NumericError`.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    vals, vecs = np.linalg.eig(A.T)
    idx = int(np.argmax(np.abs(vals)))
    lam = vals[idx]
    if abs(lam.imag) > 1e-10 * max(1.0, abs(lam)):
        raise NumericError(f"dominant eigenvalue {lam} is complex; no real left eigenvector")
    v = np.real(vecs[:, idx])
    return v / np.linalg.norm(v)


def psd_floor(m: np.ndarray, band_rtol: float = 1e-6) -> np.ndarray:
    """Zero round-off-sized negative eigenvalues of a symmetric matrix.

    Long chains of rank-deficient conditioning steps drift a covariance
    a few ulps below the PSD cone; flooring stops the drift from
    compounding.  Violations beyond ``band_rtol`` times the scale are
    left untouched so genuine errors still fail validation downstream.
    """
    m = symmetrize(np.asarray(m, dtype=float))
    vals, vecs = np.linalg.eigh(m)
    low = float(vals.min())
    if low >= 0.0:
        return m
    scale = max(1.0, float(np.max(np.abs(vals))))
    if low < -band_rtol * scale:
        return m
    return symmetrize((vecs * np.clip(vals, 0.0, None)) @ vecs.T)


def covariance_sqrt(cov: np.ndarray) -> np.ndarray:
    """Factor L with L L' = cov, for sampling.

    Cholesky when the matrix is positive definite; otherwise an
    eigendecomposition with negative eigenvalues clamped to zero, which
    covers the zero-noise and rank-deficient modes.
    """
    cov = symmetrize(np.atleast_2d(np.asarray(cov, dtype=float)))
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        vals = np.clip(vals, 0.0, None)
        return vecs * np.sqrt(vals)
