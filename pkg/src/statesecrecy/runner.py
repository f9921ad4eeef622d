"""Monte Carlo orchestration and CSV emission for scenario runs.

Every run owns counter-based RNG streams keyed by (seed, trace_id,
purpose), so results are independent of execution order and a worker
pool reproduces the sequential output exactly.  All numeric CSV fields
are written with repr-faithful formatting, making re-runs byte
identical (the reproducibility contract).
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import DeterministicWithholding, RandomWithholding, baseline_covariances
from .channel import first_critical_time, sample_trace, trace_to_csv
from .coding import SecrecyEncoder
from .config import ScenarioConfig
from .estimators import EveFilter, UserFilter
from .plant import open_loop_covariance, simulate

# Stream tags within a run.
_STREAM_TRAJECTORY = 0
_STREAM_CHANNEL = 1
_STREAM_POLICY = 2


@dataclass
class RunRecord:
    """Per-trace results: one row per step 0..horizon."""

    trace_id: int
    k0: int | None
    gamma_u: np.ndarray
    gamma_e: np.ndarray
    tr_P_user: np.ndarray
    tr_P_eve: np.ndarray
    tr_H: np.ndarray | None
    P_eve_diag: np.ndarray  # (K+1, n)

    def critical_flag(self) -> np.ndarray:
        """1 from the first critical event onward (cumulative indicator)."""
        flags = np.zeros(self.gamma_u.shape[0], dtype=int)
        if self.k0 is not None:
            flags[self.k0 :] = 1
        return flags


def run_record(cfg: ScenarioConfig, trace_id: int) -> RunRecord:
    """Simulate one trace under the configured mechanism."""
    trace = sample_trace(cfg.channel, cfg.horizon, (cfg.seed, trace_id, _STREAM_CHANNEL))
    k0 = first_critical_time(trace)
    if cfg.code.kind == "state_secrecy":
        return _code_run(cfg, trace_id, trace, k0)
    return _baseline_run(cfg, trace_id, trace, k0)


def _code_run(cfg: ScenarioConfig, trace_id: int, trace, k0) -> RunRecord:
    system, mode, K = cfg.system, cfg.mode, cfg.horizon
    traj = simulate(system, K, (cfg.seed, trace_id, _STREAM_TRAJECTORY))
    encoder = SecrecyEncoder(system, mode)
    user = UserFilter(system, mode)
    eve = EveFilter(system, mode)
    ub = user.initial()
    eb = eve.initial()
    tr_user = np.zeros(K + 1)
    tr_eve = np.zeros(K + 1)
    tr_h = np.zeros(K + 1) if mode == "output" else None
    diag = np.zeros((K + 1, system.n))
    for k in range(K + 1):
        measurement = traj.states[k] if mode == "state" else traj.outputs[k]
        z = encoder.encode(k, measurement)
        got_u = int(trace.gamma_u[k])
        ub = user.step(ub, got_u, z if got_u else None)
        if got_u:
            encoder.ack(k)
        if k > 0:
            eb = eve.predict(eb, int(trace.gamma_u[k - 1]))
        got_e = int(trace.gamma_e[k])
        eb = eve.update(eb, got_e, z if got_e else None)
        tr_user[k] = float(np.trace(ub.cov))
        cov = eb.covariance().m
        if mode == "state":
            tr_eve[k] = float(np.trace(cov))
            diag[k] = np.diag(cov)
        else:
            # Exact error about the plant state is not tracked in output
            # mode; report the realised squared error of the
            # eavesdropper's estimate as the empirical proxy, plus the
            # exact secondary covariance H.
            err = traj.states[k] - eb.estimate()
            tr_eve[k] = float(err @ err)
            diag[k] = err**2
            tr_h[k] = float(np.trace(cov))
        eb = eve.advance(eb)
    return RunRecord(trace_id, k0, trace.gamma_u, trace.gamma_e, tr_user, tr_eve, tr_h, diag)


def _baseline_run(cfg: ScenarioConfig, trace_id: int, trace, k0) -> RunRecord:
    system = cfg.system
    if cfg.code.kind == "baseline_random":
        policy = RandomWithholding(cfg.code.p, (cfg.seed, trace_id, _STREAM_POLICY))
    elif cfg.code.kind == "baseline_deterministic":
        policy = DeterministicWithholding(cfg.code.s)
    elif cfg.code.kind == "none":
        policy = RandomWithholding(0.0, (cfg.seed, trace_id, _STREAM_POLICY))
    else:
        raise ValueError(f"unknown code kind {cfg.code.kind!r}")
    run = baseline_covariances(policy, system, trace)
    tr_user = np.einsum("kii->k", run.P_user)
    tr_eve = np.einsum("kii->k", run.P_eve)
    diag = np.einsum("kii->ki", run.P_eve)
    return RunRecord(trace_id, k0, trace.gamma_u, trace.gamma_e, tr_user, tr_eve, None, diag)


def run_scenario(cfg: ScenarioConfig, workers: int = 1):
    """Execute all configured runs, write CSV artifacts, return
    (records, summary dict).

    Artifacts in ``cfg.outputs``: ``runs.csv`` (per-step schema below),
    ``summary.csv`` (per-k aggregates) and ``summary.json``.
    """
    records = collect_records(cfg, workers)
    openloop = open_loop_covariance(cfg.system, cfg.horizon)
    tr_open = np.asarray([p.trace() for p in openloop])
    cfg.outputs.mkdir(parents=True, exist_ok=True)
    write_runs_csv(cfg.outputs / "runs.csv", records, tr_open, cfg.system.n)
    summary = summarize(cfg, records, tr_open)
    _write_summary_csv(cfg.outputs / "summary.csv", summary)
    with open(cfg.outputs / "summary.json", "w") as fh:
        json.dump(summary["scalars"], fh, indent=2, sort_keys=True)
        fh.write("\n")
    return records, summary


def collect_records(cfg: ScenarioConfig, workers: int = 1) -> list[RunRecord]:
    """Run every configured trace and return the records (no file IO)."""
    ids = range(cfg.runs)
    if workers <= 1:
        return [run_record(cfg, i) for i in ids]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, cfg.runs // (8 * workers))
        return list(pool.map(run_record, [cfg] * cfg.runs, ids, chunksize=chunk))


def runs_csv_header(n: int) -> list[str]:
    return (
        ["trace_id", "k", "gamma_u", "gamma_e", "critical_flag", "tr_P_user",
         "tr_P_eve", "tr_P_openloop", "tr_H"]
        + [f"P_eve_{i}{i}" for i in range(1, n + 1)]
        + ["log1p_tr_P_eve"]
    )


def write_runs_csv(path, records: list[RunRecord], tr_open: np.ndarray, n: int) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(runs_csv_header(n))
        for rec in records:
            flags = rec.critical_flag()
            for k in range(rec.gamma_u.shape[0]):
                row = [
                    rec.trace_id,
                    k,
                    int(rec.gamma_u[k]),
                    int(rec.gamma_e[k]),
                    int(flags[k]),
                    format(rec.tr_P_user[k], ".17g"),
                    format(rec.tr_P_eve[k], ".17g"),
                    format(tr_open[k], ".17g"),
                    "" if rec.tr_H is None else format(rec.tr_H[k], ".17g"),
                ]
                row += [format(v, ".17g") for v in rec.P_eve_diag[k]]
                row.append(format(float(np.log1p(rec.tr_P_eve[k])), ".17g"))
                writer.writerow(row)


def divergence_series(rec: RunRecord) -> np.ndarray:
    """The exact diverging covariance trace for slope fits: the
    eavesdropper state error in state mode, the secondary covariance in
    output mode."""
    return rec.tr_P_eve if rec.tr_H is None else rec.tr_H


def log_growth_slope(values: np.ndarray, ks: np.ndarray) -> float:
    """Least-squares slope of log(values) against k."""
    y = np.log(np.asarray(values, dtype=float))
    A = np.vstack([np.asarray(ks, dtype=float), np.ones(len(ks))]).T
    slope, _ = np.linalg.lstsq(A, y, rcond=None)[0]
    return float(slope)


def summarize(cfg: ScenarioConfig, records: list[RunRecord], tr_open: np.ndarray) -> dict:
    K = cfg.horizon
    ks = np.arange(K + 1)
    tr_eve = np.vstack([rec.tr_P_eve for rec in records])
    tr_user = np.vstack([rec.tr_P_user for rec in records])
    critical = np.vstack([rec.critical_flag() for rec in records])
    has_h = records[0].tr_H is not None
    tr_h = np.vstack([rec.tr_H for rec in records]) if has_h else None

    slopes = []
    for rec in records:
        if rec.k0 is None:
            continue
        lo, hi = rec.k0 + 5, min(rec.k0 + 30, K)
        if hi - lo + 1 < 10:
            continue
        series = divergence_series(rec)[lo : hi + 1]
        if np.any(series <= 0):
            continue
        slopes.append(log_growth_slope(series, np.arange(lo, hi + 1)))

    per_k = {
        "k": ks,
        "frac_critical_by_k": critical.mean(axis=0),
        "median_tr_P_user": np.median(tr_user, axis=0),
        "median_tr_P_eve": np.median(tr_eve, axis=0),
        "q10_tr_P_eve": np.quantile(tr_eve, 0.10, axis=0),
        "q90_tr_P_eve": np.quantile(tr_eve, 0.90, axis=0),
        "median_log1p_tr_P_eve": np.median(np.log1p(tr_eve), axis=0),
        "tr_P_openloop": tr_open,
        "median_tr_H": np.median(tr_h, axis=0) if has_h else None,
    }
    scalars = {
        "mode": cfg.mode,
        "code": cfg.code.kind,
        "runs": cfg.runs,
        "seed": cfg.seed,
        "horizon": K,
        "fraction_with_critical_event": float(critical[:, -1].mean()),
        "log_growth_slope_median": float(np.median(slopes)) if slopes else None,
        "log_growth_slope_mean": float(np.mean(slopes)) if slopes else None,
        "log_growth_slope_runs": len(slopes),
        "target_slope_2_log_rho": float(2.0 * np.log(cfg.system.rho)) if cfg.system.rho > 1 else None,
    }
    return {"per_k": per_k, "scalars": scalars}


def _write_summary_csv(path, summary: dict) -> None:
    per_k = summary["per_k"]
    has_h = per_k["median_tr_H"] is not None
    columns = [
        "k", "frac_critical_by_k", "median_tr_P_user", "median_tr_P_eve",
        "q10_tr_P_eve", "q90_tr_P_eve", "median_log1p_tr_P_eve",
        "tr_P_openloop", "median_tr_H",
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for i in range(per_k["k"].shape[0]):
            row = [int(per_k["k"][i])]
            for col in columns[1:-1]:
                row.append(format(float(per_k[col][i]), ".17g"))
            row.append(format(float(per_k["median_tr_H"][i]), ".17g") if has_h else "")
            writer.writerow(row)


def export_traces(cfg: ScenarioConfig) -> list[Path]:
    """Sample and write the channel traces of every configured run as
    scripted-trace CSVs (loadable back through the channel module)."""
    out_dir = cfg.outputs / "traces"
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for trace_id in range(cfg.runs):
        trace = sample_trace(cfg.channel, cfg.horizon, (cfg.seed, trace_id, _STREAM_CHANNEL))
        path = out_dir / f"trace_{trace_id:05d}.csv"
        trace_to_csv(trace, path)
        paths.append(path)
    return paths
