"""Verification suites: numerical checks of the secrecy guarantees.

Each suite returns a list of :class:`CheckResult` records (name,
measured value, bound, pass flag); the CLI renders them as JSON lines
and exits non-zero if any check fails.  Tolerances are fixed here, not
configurable: they are the package's acceptance gate.

Where a check leaves parameters open (horizons for the identity checks,
trace counts for sampled-bound checks) the choices are documented on
the suite function.  Identity checks with absolute tolerances use
horizons short enough that state magnitudes stay well below the scale
where double-precision round-off would reach the tolerance.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import couple_trace, first_critical_time, reference_times, sample_trace
from .coding import LocalKalmanFilter, encode_trace
from .config import CodeSpec, ScenarioConfig
from .estimators import EveFilter, UserFilter, batch_oracle
from .gaussians import dominant_left_eigenvector
from .plant import LinearSystem, _rng, open_loop_covariance, simulate
from .runner import collect_records, log_growth_slope, run_scenario
from .scenarios import (
    output_channel_law,
    output_demo_system,
    random_instance,
    random_law,
    scalar_demo_system,
    state_channel_law,
    state_demo_system,
    worst_case_trace,
)

SUITE_NAMES = (
    "oracle",
    "worst_case",
    "theorem1",
    "theorem2",
    "monotonicity",
    "remark1",
    "corollary1",
    "figures",
)


@dataclass
class CheckResult:
    suite: str
    name: str
    measured: float | None
    bound: float | None
    passed: bool
    skipped: bool = False
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "suite": self.suite,
            "check": self.name,
            "measured": self.measured,
            "bound": self.bound,
            "passed": bool(self.passed),
            "skipped": bool(self.skipped),
            "detail": self.detail,
        }


def _eve_covariances(system: LinearSystem, mode: str, trace, traj) -> list[np.ndarray]:
    payloads = encode_trace(system, mode, trace, traj)
    beliefs = EveFilter(system, mode).run(trace, payloads)
    return [b.covariance().m for b in beliefs]


def _rel_dev(actual: np.ndarray, expected: np.ndarray) -> float:
    scale = float(np.max(np.abs(expected)))
    return float(np.max(np.abs(actual - expected))) / max(scale, 1e-300)


# ---------------------------------------------------------------------------
# oracle


def suite_oracle(seed: int = 0, out=None) -> list[CheckResult]:
    """Recursive filter vs one-shot batch conditioning on 100 random
    instances (n in {1,2,3}, spectral radius 1.3, random joint laws),
    compared elementwise at every k <= 12."""
    del out
    started = time.perf_counter()
    worst = 0.0
    horizon = 12
    for i in range(100):
        rng = _rng((seed, i, 11))
        n = int(rng.integers(1, 4))
        system = random_instance(rng, n)
        law = random_law(rng)
        trace = sample_trace(law, horizon, rng)
        traj = simulate(system, horizon, rng)
        covs = _eve_covariances(system, "state", trace, traj)
        for k in range(horizon + 1):
            oracle = batch_oracle(system, "state", trace, k).m
            worst = max(worst, float(np.max(np.abs(covs[k] - oracle))))
    elapsed = time.perf_counter() - started
    return [
        CheckResult("oracle", "filter_matches_batch_conditioning", worst, 1e-8, worst <= 1e-8,
                    detail="max elementwise gap over 100 random instances, k <= 12"),
        CheckResult("oracle", "runtime_seconds", elapsed, 30.0, elapsed <= 30.0),
    ]


# ---------------------------------------------------------------------------
# worst_case


def suite_worst_case(seed: int = 0, out=None) -> list[CheckResult]:
    """After a critical event at k0 with every later packet intercepted,
    the eavesdropper covariance must follow the propagated closed form
    A^(k-k0) P_k0 A'^(k-k0), and its log-trace must grow with slope
    2 log rho(A)."""
    del out
    results = []
    systems = [("scalar_a2", scalar_demo_system()), ("two_state", state_demo_system())]
    for sys_name, system in systems:
        target_slope = 2.0 * np.log(system.rho)
        for k0 in (0, 3):
            horizon = k0 + 30
            for pattern in ("ones", "mixed"):
                trace = worst_case_trace(k0, horizon, pattern)
                traj = simulate(system, horizon, (seed, k0, hash(pattern) % 997, 3))
                covs = _eve_covariances(system, "state", trace, traj)
                base = covs[k0]
                dev = 0.0
                M = np.eye(system.n)
                for k in range(k0, horizon + 1):
                    dev = max(dev, _rel_dev(covs[k], M @ base @ M.T))
                    M = system.A @ M
                results.append(CheckResult(
                    "worst_case", f"closed_form[{sys_name},k0={k0},user={pattern}]",
                    dev, 1e-9, dev <= 1e-9,
                ))
                if pattern == "ones":
                    ks = np.arange(k0 + 5, k0 + 31)
                    slope = log_growth_slope([np.trace(covs[k]) for k in ks], ks)
                    rel = abs(slope / target_slope - 1.0)
                    results.append(CheckResult(
                        "worst_case", f"growth_slope[{sys_name},k0={k0}]",
                        rel, 1e-2, rel <= 1e-2,
                        detail=f"slope {slope:.6f}, target {target_slope:.6f}",
                    ))
    return results


# ---------------------------------------------------------------------------
# theorem1


def suite_theorem1(seed: int = 0, out=None, traces: int = 500, law=None) -> list[CheckResult]:
    """Exponential lower bound c rho^(2(k-k0)) on the eavesdropper error
    trace, c = min eigenvalue of Q and Sigma0, over sampled traces of
    the two-state scenario that contain a critical event.  Traces
    without a critical event are vacuous and reported as skipped."""
    del out
    system = state_demo_system()
    law = law or state_channel_law()
    horizon = 60
    c = min(
        float(np.linalg.eigvalsh(system.Q.m).min()),
        float(np.linalg.eigvalsh(system.Sigma0.m).min()),
    )
    rho2 = system.rho**2
    margin = np.inf
    checked = 0
    skipped = 0
    for i in range(10 * traces):
        if checked >= traces:
            break
        trace = sample_trace(law, horizon, (seed, i, 1))
        k0 = first_critical_time(trace)
        if k0 is None:
            # a trace without a critical event makes no claim
            skipped += 1
            continue
        traj = simulate(system, horizon, (seed, i, 0))
        covs = _eve_covariances(system, "state", trace, traj)
        for k in range(k0, horizon + 1):
            margin = min(margin, float(np.trace(covs[k])) - c * rho2 ** (k - k0))
        checked += 1
    if checked:
        results = [CheckResult(
            "theorem1", "exponential_lower_bound", margin, -1e-9,
            checked == traces and margin >= -1e-9,
            detail=f"{checked} traces with a critical event",
        )]
    else:
        results = [CheckResult(
            "theorem1", "exponential_lower_bound", None, -1e-9, True, skipped=True,
            detail="no sampled trace contained a critical event; bound is vacuous",
        )]
    if skipped:
        results.append(CheckResult(
            "theorem1", "traces_without_critical_event", float(skipped), None,
            True, skipped=True, detail="bound is vacuous on these traces",
        ))
    return results


# ---------------------------------------------------------------------------
# theorem2


def suite_theorem2(seed: int = 0, out=None, runs: int = 2000, sampled_traces: int = 200) -> list[CheckResult]:
    """Output-measurement guarantees.

    (a) worst-case closed form for the secondary covariance H;
    (b) lower bound (v' N v / v' v) rho^(2(k-k0)) on Tr H with v the
        dominant left eigenvector and N the estimate-noise covariance,
        on worst-case and sampled traces;
    (c) the realised squared error of the eavesdropper's estimate
        against the true state dominates Tr H / 2 - Tr(filtered cov)
        on average, within three standard errors over ``runs`` runs.
    """
    del out
    results = []
    system = output_demo_system()
    law = output_channel_law()
    kf = LocalKalmanFilter(system)
    noise = kf.estimate_noise_covariance
    filtered_tr = float(np.trace(kf.filtered_covariance))
    v = dominant_left_eigenvector(system.A)
    c_out = float(v @ noise @ v) / float(v @ v)
    rho2 = system.rho**2

    bound_margin = np.inf
    for k0 in (0, 3):
        horizon = k0 + 30
        trace = worst_case_trace(k0, horizon, "ones")
        traj = simulate(system, horizon, (seed, k0, 5))
        covs = _eve_covariances(system, "output", trace, traj)
        base = covs[k0]
        dev = 0.0
        M = np.eye(system.n)
        for k in range(k0, horizon + 1):
            dev = max(dev, _rel_dev(covs[k], M @ base @ M.T))
            bound_margin = min(
                bound_margin, float(np.trace(covs[k])) - c_out * rho2 ** (k - k0)
            )
            M = system.A @ M
        results.append(CheckResult(
            "theorem2", f"secondary_closed_form[k0={k0}]", dev, 1e-9, dev <= 1e-9,
        ))

    checked = 0
    skipped = 0
    horizon = 60
    for i in range(10 * sampled_traces):
        if checked >= sampled_traces:
            break
        trace = sample_trace(law, horizon, (seed, i, 21))
        k0 = first_critical_time(trace)
        if k0 is None:
            skipped += 1
            continue
        traj = simulate(system, horizon, (seed, i, 20))
        covs = _eve_covariances(system, "output", trace, traj)
        for k in range(k0, horizon + 1):
            bound_margin = min(
                bound_margin, float(np.trace(covs[k])) - c_out * rho2 ** (k - k0)
            )
        checked += 1
    results.append(CheckResult(
        "theorem2", "secondary_lower_bound", bound_margin, -1e-9, bound_margin >= -1e-9,
        detail=f"worst-case traces plus {checked} sampled traces ({skipped} without event)",
    ))

    # (c): E ||x_k - eta_k||^2 >= Tr H_k / 2 - Tr(filtered cov), tested on
    # the per-run differences at every k with a 3-standard-error allowance.
    diffs = np.zeros((runs, horizon + 1))
    eve = EveFilter(system, "output")
    for r in range(runs):
        trace = sample_trace(law, horizon, (seed, r, 31))
        traj = simulate(system, horizon, (seed, r, 30))
        payloads = encode_trace(system, "output", trace, traj)
        beliefs = eve.run(trace, payloads)
        for k, b in enumerate(beliefs):
            err = traj.states[k] - b.estimate()
            rhs = 0.5 * b.covariance().trace() - filtered_tr
            diffs[r, k] = float(err @ err) - rhs
    mean = diffs.mean(axis=0)
    se = diffs.std(axis=0, ddof=1) / np.sqrt(runs)
    slack = mean + 3.0 * se
    worst_k = int(np.argmin(slack))
    results.append(CheckResult(
        "theorem2", "squared_error_chain", float(slack.min()), 0.0, bool(slack.min() >= 0.0),
        detail=f"{runs} runs; tightest step k={worst_k}",
    ))
    return results


# ---------------------------------------------------------------------------
# monotonicity


def suite_monotonicity(seed: int = 0, out=None, pairs: int = 200) -> list[CheckResult]:
    """Coupling the trace (eavesdropper intercepts everything after k0)
    can only shrink her covariance: P_k - coupled P_k stays PSD."""
    del out
    min_eig = np.inf
    for pair in range(pairs):
        rng = _rng((seed, pair, 41))
        n = int(rng.integers(1, 4))
        system = random_instance(rng, n)
        law = random_law(rng)
        horizon = int(rng.integers(8, 15))
        trace = sample_trace(law, horizon, rng)
        traj = simulate(system, horizon, rng)
        k0 = int(rng.integers(0, horizon + 1))
        coupled = couple_trace(trace, k0)
        payloads = encode_trace(system, "state", trace, traj)
        eve = EveFilter(system, "state")
        nominal = eve.run(trace, payloads)
        tightened = eve.run(coupled, payloads)
        for b_nom, b_cpl in zip(nominal, tightened):
            gap = b_nom.covariance().m - b_cpl.covariance().m
            min_eig = min(min_eig, float(np.linalg.eigvalsh(gap).min()))
    return [CheckResult(
        "monotonicity", "coupled_trace_psd_ordering", min_eig, -1e-9, min_eig >= -1e-9,
        detail=f"{pairs} random trace/coupling pairs",
    )]


# ---------------------------------------------------------------------------
# remark1


def suite_remark1(seed: int = 0, out=None, trajectories: int = 100) -> list[CheckResult]:
    """Every encoded packet equals the weighted sum of process noises
    since the reference time, and the user decodes exactly at every
    reception.  Horizons are kept short enough (20 steps at rho 1.2,
    9 at rho 2) that the 1e-12 absolute tolerances sit far above
    round-off at the realised state magnitudes."""
    del out
    results = []
    law = state_channel_law()
    for sys_name, system, horizon in (
        ("two_state", state_demo_system(), 20),
        ("scalar_a2", scalar_demo_system(), 9),
    ):
        worst_packet = 0.0
        worst_decode = 0.0
        for t in range(trajectories):
            traj = simulate(system, horizon, (seed, t, 50))
            trace = sample_trace(law, horizon, (seed, t, 51))
            refs = reference_times(trace.gamma_u)
            payloads = encode_trace(system, "state", trace, traj)
            user = UserFilter(system, "state")
            ub = user.initial()
            for k in range(horizon + 1):
                expected = np.zeros(system.n)
                M = np.eye(system.n)
                for j in range(k, refs[k], -1):  # j = k down to refs[k]+1
                    expected += M @ traj.process_noise[j]
                    M = system.A @ M
                worst_packet = max(worst_packet, float(np.max(np.abs(payloads[k] - expected))))
                got = int(trace.gamma_u[k])
                ub = user.step(ub, got, payloads[k] if got else None)
                if got:
                    worst_decode = max(
                        worst_decode, float(np.max(np.abs(ub.est - traj.states[k])))
                    )
        results.append(CheckResult(
            "remark1", f"noise_combination[{sys_name}]",
            worst_packet, 1e-12, worst_packet <= 1e-12,
            detail=f"{trajectories} trajectories, horizon {horizon}",
        ))
        results.append(CheckResult(
            "remark1", f"decode_identity[{sys_name}]",
            worst_decode, 1e-12, worst_decode <= 1e-12,
        ))
    return results


# ---------------------------------------------------------------------------
# corollary1


def suite_corollary1(seed: int = 0, out=None) -> list[CheckResult]:
    """The open-loop-to-eavesdropper error ratio Tr P_op / (Tr P + 1)
    levels off after the critical event: its maximum over [k0, 60] must
    be within 5% of the maximum over [k0, 40]."""
    del out
    results = []
    horizon = 60
    for sys_name, system in (("scalar_a2", scalar_demo_system()), ("two_state", state_demo_system())):
        tr_open = np.asarray([p.trace() for p in open_loop_covariance(system, horizon)])
        for k0 in (0, 3):
            trace = worst_case_trace(k0, horizon, "ones")
            traj = simulate(system, horizon, (seed, k0, 60))
            covs = _eve_covariances(system, "state", trace, traj)
            ratios = np.asarray([
                tr_open[k] / (float(np.trace(covs[k])) + 1.0) for k in range(k0, horizon + 1)
            ])
            max_full = float(ratios.max())
            max_40 = float(ratios[: 40 - k0 + 1].max())
            measured = max_full / max_40
            results.append(CheckResult(
                "corollary1", f"openloop_ratio_levels_off[{sys_name},k0={k0}]",
                measured, 1.05, measured <= 1.05,
                detail=f"max ratio to 40: {max_40:.4f}, to 60: {max_full:.4f}",
            ))
    return results


# ---------------------------------------------------------------------------
# figures


def _scenario_config(system, mode, law, code, horizon, runs, seed, out_dir) -> ScenarioConfig:
    return ScenarioConfig(system, mode, law, code, horizon, runs, seed, Path(out_dir))


def suite_figures(seed: int = 0, out=None, runs: int = 1000) -> list[CheckResult]:
    """Qualitative reproduction of the two simulation studies.

    State scenario: under the secrecy code essentially every run whose
    critical event happens by k = 10 has a huge eavesdropper error at
    k = 60, while both withholding baselines leave it small in at least
    half of the runs.  Output scenario: the stable state's open-loop
    error converges to the scalar fixed point while the unstable
    secondary covariance grows at the open-loop rate.

    When ``out`` is given, figure-style CSV artifacts for every
    mechanism (plus per-state open-loop curves) are written beneath it.
    """
    results = []
    horizon = 60
    out_dir = Path(out) if out is not None else None
    system = state_demo_system()
    law = state_channel_law()

    def records_for(code: CodeSpec, sub: str, scenario_system, mode, scenario_law):
        if out_dir is None:
            cfg = _scenario_config(scenario_system, mode, scenario_law, code,
                                   horizon, runs, seed, Path("."))
            return collect_records(cfg, workers=1)
        cfg = _scenario_config(scenario_system, mode, scenario_law, code,
                               horizon, runs, seed, out_dir / sub)
        recs, _ = run_scenario(cfg)
        _write_openloop_csv(cfg)
        return recs

    code_recs = records_for(CodeSpec("state_secrecy"), "state_code", system, "state", law)
    early = [r for r in code_recs if r.k0 is not None and r.k0 <= 10]
    frac_diverged = (
        float(np.mean([r.tr_P_eve[horizon] >= 1e3 for r in early])) if early else 0.0
    )
    results.append(CheckResult(
        "figures", "code_error_diverges", frac_diverged, 0.99, frac_diverged >= 0.99,
        detail=f"{len(early)} of {runs} runs had a critical event by k=10",
    ))

    for label, code in (
        ("random", CodeSpec("baseline_random", p=0.29)),
        ("deterministic", CodeSpec("baseline_deterministic", s=5)),
    ):
        recs = records_for(code, f"state_{label}", system, "state", law)
        frac_small = float(np.mean([r.tr_P_eve[horizon] < 10.0 for r in recs]))
        results.append(CheckResult(
            "figures", f"baseline_error_stays_small[{label}]",
            frac_small, 0.50, frac_small >= 0.50,
        ))

    # Output scenario: figure artifacts plus the two deterministic checks.
    out_system = output_demo_system()
    records_for(CodeSpec("state_secrecy"), "output_code", out_system, "output", output_channel_law())

    openloop = open_loop_covariance(out_system, horizon)
    fixed_point = _stable_fixed_point(out_system.A[1, 1], out_system.Q.m[1, 1])
    gap = abs(openloop[horizon].m[1, 1] - fixed_point)
    results.append(CheckResult(
        "figures", "stable_state_openloop_limit", gap, 1e-6, gap <= 1e-6,
        detail=f"fixed point {fixed_point:.9f}",
    ))

    k0 = 0
    trace = worst_case_trace(k0, 35, "ones")
    traj = simulate(out_system, 35, (seed, 70))
    covs = _eve_covariances(out_system, "output", trace, traj)
    ks = np.arange(k0 + 5, k0 + 31)
    slope = log_growth_slope([covs[k][0, 0] for k in ks], ks)
    target = 2.0 * np.log(out_system.rho)
    rel = abs(slope / target - 1.0)
    results.append(CheckResult(
        "figures", "unstable_state_growth_slope", rel, 1e-2, rel <= 1e-2,
        detail=f"slope {slope:.6f}, target {target:.6f}",
    ))
    return results


def _stable_fixed_point(a: float, q: float, tol: float = 1e-12) -> float:
    """Fixed point of the scalar recursion p <- a^2 p + q, by iteration."""
    p = q
    for _ in range(100_000):
        nxt = a * a * p + q
        if abs(nxt - p) <= tol:
            return nxt
        p = nxt
    raise RuntimeError(f"scalar recursion did not converge (a = {a})")


def _write_openloop_csv(cfg: ScenarioConfig) -> None:
    openloop = open_loop_covariance(cfg.system, cfg.horizon)
    path = cfg.outputs / "openloop.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        n = cfg.system.n
        writer.writerow(["k"] + [f"P_op_{i}{i}" for i in range(1, n + 1)] + ["tr_P_op"])
        for k, P in enumerate(openloop):
            diag = P.diagonal()
            writer.writerow(
                [k] + [format(v, ".17g") for v in diag] + [format(P.trace(), ".17g")]
            )


# ---------------------------------------------------------------------------


_SUITES = {
    "oracle": suite_oracle,
    "worst_case": suite_worst_case,
    "theorem1": suite_theorem1,
    "theorem2": suite_theorem2,
    "monotonicity": suite_monotonicity,
    "remark1": suite_remark1,
    "corollary1": suite_corollary1,
    "figures": suite_figures,
}


def run_suite(name: str, seed: int = 0, out=None) -> list[CheckResult]:
    """Execute one named suite; unknown names raise ValueError."""
    if name not in _SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITE_NAMES)}")
    return _SUITES[name](seed=seed, out=out)
