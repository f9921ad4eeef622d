"""Scenario configuration: TOML schema, validation, and defaults.

A scenario file is a TOML document with nested tables; matrices are
row-major lists of lists.  Example::

    mode = "state"
    horizon = 60
    runs = 1000
    seed = 7
    outputs = "out/state_scenario"

    [system]
    A = [[1.2, 0.1], [0.0, 0.5]]
    Q = [[0.6, 0.2], [0.2, 0.5]]
    Sigma0 = "Q"            # literal matrix, "Q", or "steady_state"

    [channel]
    kind = "iid_joint"
    p11 = 0.54
    p10 = 0.36
    p01 = 0.06
    p00 = 0.04

    [code]
    kind = "state_secrecy"  # or baseline_random / baseline_deterministic / none

Validation failures raise :class:`ConfigError` naming the offending
field.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .channel import ChannelLaw, trace_from_csv
from .gaussians import solve_dare
from .plant import LinearSystem


class ConfigError(ValueError):
    """Invalid scenario configuration; message names the field."""

    def __init__(self, field: str, message: str) -> None:
        self.field = field
        super().__init__(f"config field {field!r}: {message}")


@dataclass(frozen=True)
class CodeSpec:
    kind: str  # state_secrecy | baseline_random | baseline_deterministic | none
    p: float | None = None
    s: int | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    system: LinearSystem
    mode: str
    channel: ChannelLaw
    code: CodeSpec
    horizon: int
    runs: int
    seed: int
    outputs: Path


def _matrix(raw, field: str) -> np.ndarray:
    try:
        m = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(field, f"not a numeric matrix: {raw!r}")
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ConfigError(field, f"expected a row-major list of rows, got shape {m.shape}")
    return m


def _require(table: dict, key: str, field: str):
    if key not in table:
        raise ConfigError(field, "missing")
    return table[key]


def load_config(path, overrides: dict | None = None) -> ScenarioConfig:
    """Parse and validate a scenario TOML file.

    ``overrides`` may replace the scalar fields seed / runs / horizon /
    outputs (the CLI flags)."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("path", f"no such config file: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("toml", f"parse error in {path}: {exc}")
    if overrides:
        raw = {**raw, **{k: v for k, v in overrides.items() if v is not None}}
    return build_config(raw, base_dir=path.parent)


def build_config(raw: dict, base_dir: Path | None = None) -> ScenarioConfig:
    mode = _require(raw, "mode", "mode")
    if mode not in ("state", "output"):
        raise ConfigError("mode", f"must be 'state' or 'output', got {mode!r}")

    horizon = _int_field(raw, "horizon", minimum=1)
    runs = _int_field(raw, "runs", minimum=1)
    seed = _int_field(raw, "seed", minimum=0)

    outputs = raw.get("outputs")
    if not isinstance(outputs, str) or not outputs:
        raise ConfigError("outputs", "must be a non-empty directory path string")
    out_path = Path(outputs)
    if base_dir is not None and not out_path.is_absolute():
        out_path = base_dir / out_path

    system = _system_from_table(_require(raw, "system", "system"), mode)
    channel = _channel_from_table(_require(raw, "channel", "channel"), base_dir)
    code = _code_from_table(_require(raw, "code", "code"), mode)

    if channel.kind == "scripted" and channel.script.horizon < horizon:
        raise ConfigError(
            "channel.script",
            f"scripted trace covers 0..{channel.script.horizon}, horizon is {horizon}",
        )
    return ScenarioConfig(system, mode, channel, code, horizon, runs, seed, out_path)


def _int_field(raw: dict, key: str, minimum: int) -> int:
    value = _require(raw, key, key)
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ConfigError(key, f"must be an integer >= {minimum}, got {value!r}")
    return value


def _system_from_table(table: dict, mode: str) -> LinearSystem:
    if not isinstance(table, dict):
        raise ConfigError("system", "must be a table")
    A = _matrix(_require(table, "A", "system.A"), "system.A")
    n = A.shape[0]
    if A.shape != (n, n):
        raise ConfigError("system.A", f"must be square, got shape {A.shape}")
    Q = _matrix(_require(table, "Q", "system.Q"), "system.Q")

    if mode == "state":
        C = np.eye(n)
        R = np.zeros((n, n))
        if "C" in table or "R" in table:
            raise ConfigError("system.C", "state mode fixes C = I and R = 0; remove them")
    else:
        C = _matrix(_require(table, "C", "system.C"), "system.C")
        R = _matrix(_require(table, "R", "system.R"), "system.R")

    sigma_raw = _require(table, "Sigma0", "system.Sigma0")
    if sigma_raw == "Q":
        Sigma0 = Q
    elif sigma_raw == "steady_state":
        if mode != "output":
            raise ConfigError("system.Sigma0", "'steady_state' is only meaningful in output mode")
        Sigma0 = np.asarray(solve_dare(A, C, Q, R))
    else:
        Sigma0 = _matrix(sigma_raw, "system.Sigma0")

    try:
        system = LinearSystem(A, C, Q, R, Sigma0)
    except ValueError as exc:
        raise ConfigError("system", str(exc))

    if mode == "output":
        steady = np.asarray(solve_dare(A, C, Q, R))
        scale = max(1.0, float(np.max(np.abs(steady))))
        if float(np.max(np.abs(system.Sigma0.m - steady))) > 1e-6 * scale:
            raise ConfigError(
                "system.Sigma0",
                "output mode assumes the sensor filter starts converged; "
                "set Sigma0 = \"steady_state\" (or the matching matrix)",
            )
    return system


def _channel_from_table(table: dict, base_dir: Path | None) -> ChannelLaw:
    if not isinstance(table, dict):
        raise ConfigError("channel", "must be a table")
    kind = _require(table, "kind", "channel.kind")
    if kind == "iid_joint":
        probs = {}
        for key in ("p00", "p01", "p10", "p11"):
            value = _require(table, key, f"channel.{key}")
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"channel.{key}", f"must be a probability, got {value!r}")
            probs[key] = float(value)
        try:
            return ChannelLaw.iid(probs["p11"], probs["p10"], probs["p01"], probs["p00"])
        except ValueError as exc:
            raise ConfigError("channel", str(exc))
    if kind == "scripted":
        script_path = _require(table, "path", "channel.path")
        if not isinstance(script_path, str):
            raise ConfigError("channel.path", f"must be a path string, got {script_path!r}")
        p = Path(script_path)
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        try:
            return ChannelLaw.scripted(trace_from_csv(p))
        except (OSError, ValueError) as exc:
            raise ConfigError("channel.path", str(exc))
    raise ConfigError("channel.kind", f"must be 'iid_joint' or 'scripted', got {kind!r}")


def _code_from_table(table: dict, mode: str) -> CodeSpec:
    if not isinstance(table, dict):
        raise ConfigError("code", "must be a table")
    kind = _require(table, "kind", "code.kind")
    if kind == "state_secrecy":
        return CodeSpec("state_secrecy")
    if kind == "none":
        if mode != "state":
            raise ConfigError("code.kind", "plain transmission is only modeled in state mode")
        return CodeSpec("none")
    if kind == "baseline_random":
        if mode != "state":
            raise ConfigError("code.kind", "baselines are only modeled in state mode")
        p = _require(table, "p", "code.p")
        if not isinstance(p, (int, float)) or isinstance(p, bool) or not 0 <= p <= 1:
            raise ConfigError("code.p", f"must be a probability, got {p!r}")
        return CodeSpec("baseline_random", p=float(p))
    if kind == "baseline_deterministic":
        if mode != "state":
            raise ConfigError("code.kind", "baselines are only modeled in state mode")
        s = _require(table, "s", "code.s")
        if not isinstance(s, int) or isinstance(s, bool) or s < 1:
            raise ConfigError("code.s", f"must be an integer >= 1, got {s!r}")
        return CodeSpec("baseline_deterministic", s=s)
    raise ConfigError("code.kind", f"unknown code kind {kind!r}")
