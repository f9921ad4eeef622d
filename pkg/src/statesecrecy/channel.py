"""Two-receiver packet-drop channel: joint reception/interception traces,
acknowledgment-driven reference times, critical events, and the coupled
trace used by the monotonicity checks."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .plant import _rng


@dataclass(frozen=True)
class OutcomeTrace:
    """Per-step channel outcomes over times 0..horizon.

    ``gamma_u[k]`` is 1 when the user receives packet k, ``gamma_e[k]``
    is 1 when the eavesdropper intercepts it.
    """

    gamma_u: np.ndarray
    gamma_e: np.ndarray

    def __post_init__(self):
        gu = np.asarray(self.gamma_u, dtype=int)
        ge = np.asarray(self.gamma_e, dtype=int)
        if gu.ndim != 1 or ge.ndim != 1 or gu.shape != ge.shape:
            raise ValueError("gamma_u and gamma_e must be 1-d sequences of equal length")
        for name, g in (("gamma_u", gu), ("gamma_e", ge)):
            if g.size and not np.isin(g, (0, 1)).all():
                raise ValueError(f"{name} entries must be 0 or 1")
        object.__setattr__(self, "gamma_u", gu)
        object.__setattr__(self, "gamma_e", ge)

    @property
    def horizon(self) -> int:
        return self.gamma_u.shape[0] - 1


class ChannelLaw:
    """Distribution of the joint outcomes (gamma_u, gamma_e).

    Either ``iid_joint`` with a 2x2 table p[i, j] = P(gamma_u = i,
    gamma_e = j), independent across time, or ``scripted`` with an
    explicit outcome trace.
    """

    def __init__(self, kind: str, *, p=None, script: OutcomeTrace | None = None) -> None:
        if kind == "iid_joint":
            p = np.asarray(p, dtype=float)
            if p.shape != (2, 2):
                raise ValueError(f"iid_joint law needs a 2x2 table, got shape {p.shape}")
            if np.any(p < 0):
                raise ValueError("joint outcome probabilities must be nonnegative")
            if abs(float(p.sum()) - 1.0) > 1e-12:
                raise ValueError(f"joint outcome table sums to {p.sum()!r}, not 1")
            self.p = p
            self.script = None
        elif kind == "scripted":
            if not isinstance(script, OutcomeTrace):
                raise ValueError("scripted law needs an OutcomeTrace script")
            self.p = None
            self.script = script
        else:
            raise ValueError(f"unknown channel law kind {kind!r}")
        self.kind = kind

    @classmethod
    def iid(cls, p11: float, p10: float, p01: float, p00: float) -> "ChannelLaw":
        """Table from named probabilities p_ij = P(gamma_u = i, gamma_e = j)."""
        return cls("iid_joint", p=[[p00, p01], [p10, p11]])

    @classmethod
    def scripted(cls, trace: OutcomeTrace) -> "ChannelLaw":
        return cls("scripted", script=trace)


def sample_trace(law: ChannelLaw, horizon: int, seed) -> OutcomeTrace:
    """Draw an outcome trace of length horizon + 1.

    iid_joint laws draw each (gamma_u, gamma_e) pair independently from
    the table; scripted laws return the script truncated to the horizon
    and refuse scripts that are too short.
    """
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    if law.kind == "scripted":
        script = law.script
        if script.horizon < horizon:
            raise ValueError(
                f"scripted trace covers 0..{script.horizon}, need 0..{horizon}"
            )
        return OutcomeTrace(script.gamma_u[: horizon + 1], script.gamma_e[: horizon + 1])
    rng = _rng(seed)
    # Flat outcome order (0,0), (0,1), (1,0), (1,1); inverse-CDF over the
    # table keeps one uniform per step.
    flat = law.p.reshape(-1)
    cum = np.cumsum(flat)
    cum[-1] = 1.0
    u = rng.random(horizon + 1)
    idx = np.searchsorted(cum, u, side="right")
    idx = np.minimum(idx, 3)
    return OutcomeTrace(idx // 2, idx % 2)


def reference_times(gamma_u) -> np.ndarray:
    """t_k = time of the most recent user reception before k, -1 if none.

    Returned array has the same length as ``gamma_u``; it satisfies
    t_0 = -1 and t_{k+1} = k if gamma_u[k] else t_k.
    """
    gamma_u = np.asarray(gamma_u, dtype=int)
    t = np.full(gamma_u.shape[0], -1, dtype=int)
    for k in range(1, gamma_u.shape[0]):
        t[k] = k - 1 if gamma_u[k - 1] else t[k - 1]
    return t


def first_critical_time(trace: OutcomeTrace):
    """Smallest k with gamma_u[k] = 1 and gamma_e[k] = 0, or None."""
    hits = np.nonzero((trace.gamma_u == 1) & (trace.gamma_e == 0))[0]
    return int(hits[0]) if hits.size else None


def couple_trace(trace: OutcomeTrace, k0: int) -> OutcomeTrace:
    """Coupled outcome sequence: identical through k0, eavesdropper
    intercepts everything after k0, user outcomes unchanged."""
    if not 0 <= k0 <= trace.horizon:
        raise ValueError(f"k0 = {k0} outside trace range 0..{trace.horizon}")
    gamma_e = trace.gamma_e.copy()
    gamma_e[k0 + 1 :] = 1
    return OutcomeTrace(trace.gamma_u.copy(), gamma_e)


def transmit(payload: np.ndarray, received: int):
    """Channel output for one receiver: the payload on success, the
    erasure symbol (None) on a drop."""
    return payload if received else None


def trace_to_csv(trace: OutcomeTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "gamma_u", "gamma_e"])
        for k in range(trace.horizon + 1):
            writer.writerow([k, int(trace.gamma_u[k]), int(trace.gamma_e[k])])


def trace_from_csv(path) -> OutcomeTrace:
    """Read a scripted trace (columns k, gamma_u, gamma_e; strict 0/1)."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["k", "gamma_u", "gamma_e"]:
            raise ValueError(f"unexpected trace CSV header in {path}: {header}")
        gu, ge = [], []
        for lineno, row in enumerate(reader):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}: row {lineno + 2} has {len(row)} fields")
            if int(row[0]) != len(gu):
                raise ValueError(f"{path}: rows must be k = 0..K in order")
            for name, v in (("gamma_u", row[1]), ("gamma_e", row[2])):
                if v not in ("0", "1"):
                    raise ValueError(f"{path}: {name} must be literal 0 or 1, got {v!r}")
            gu.append(int(row[1]))
            ge.append(int(row[2]))
    if not gu:
        raise ValueError(f"{path}: empty trace")
    return OutcomeTrace(np.asarray(gu), np.asarray(ge))
