"""JSON experiment configs: parsing, validation and a single end-to-end run."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from . import analysis, classk
from .sim import EventLog, SimConfig, Termination, simulate
from .systems import BUILTINS, BarrierCertificate, ball_grid, bound_dynamics
from .triggers import (NaiveSafety, SignedNaiveSafety, Stabilization, StrongISSf,
                       miet_bound, scaled, shift_certificate, strong_law,
                       trigger_error_radius)

VARIANTS = {
    "stabilization": Stabilization,
    "naivesafety": NaiveSafety,
    "signednaivesafety": SignedNaiveSafety,
    "strongissf": StrongISSf,
}
SIM_KEYS = {"t_final", "max_events", "max_step", "rel_tol", "abs_tol", "event_tol",
            "sample_stride", "method"}


class ConfigError(ValueError):
    def __init__(self, path: tuple[str, ...], message: str, line: int | None = None):
        self.path = path
        self.line = line
        self.message = message
        super().__init__(self.describe())

    def describe(self, filename: str = "<config>") -> str:
        where = f"{filename}:{self.line}" if self.line else filename
        key = ".".join(self.path) if self.path else "<root>"
        return f"{where}: {key}: {self.message}"


def bundled_config(name: str) -> Path:
    return Path(str(resources.files("etsafe") / "configs" / name))


def resolve_config_path(arg: str) -> Path:
    p = Path(arg)
    if p.exists():
        return p
    b = bundled_config(arg if arg.endswith(".json") else arg + ".json")
    if b.exists():
        return b
    return p


def _line_of(text: str, path: tuple[str, ...]) -> int | None:
    pos, line = 0, None
    for key in path:
        i = text.find(f'"{key}"', pos)
        if i < 0:
            break
        pos = i + 1
        line = text.count("\n", 0, i) + 1
    return line


@dataclass
class Experiment:
    """Everything a run needs, built from a validated config dict."""

    raw: dict[str, Any]
    system_name: str
    system_params: dict[str, Any]
    sys: Any
    cert: Any
    law: Any
    x0: np.ndarray
    sim: SimConfig
    assertions: dict[str, Any] = field(default_factory=dict)
    output_dir: str | None = None
    seed: int = 0
    tau: float | None = None
    F: float | None = None
    eps_safety: float = analysis.EPS_SAFETY


def load_config(path: str | Path) -> Experiment:
    """Read and validate a config file; raises ConfigError with a line number."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError((), f"cannot read config: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError((), f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno) from None
    try:
        return build_experiment(raw)
    except ConfigError as exc:
        exc.line = _line_of(text, exc.path)
        raise


def _get(d, key, path, kind=None, default=...):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    if key not in d:
        if default is ...:
            raise ConfigError(path + (key,), "missing required key")
        return default
    v = d[key]
    if kind is not None and not isinstance(v, kind):
        raise ConfigError(path + (key,), f"expected {getattr(kind, '__name__', kind)}")
    return v


def _num(d, key, path, default=...):
    v = _get(d, key, path, default=default)
    if v is default and default is not ...:
        return v
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(path + (key,), f"expected a finite number, got {v!r}")
    return float(v)


def build_experiment(raw: dict[str, Any]) -> Experiment:
    if not isinstance(raw, dict):
        raise ConfigError((), "top level must be an object")
    sysd = _get(raw, "system", (), dict)
    name = _get(sysd, "name", ("system",), str)
    params = _get(sysd, "params", ("system",), dict, default={})
    if name not in BUILTINS:
        raise ConfigError(("system", "name"), f"unknown system {name!r}; choose from {sorted(BUILTINS)}")
    try:
        if name == "counterexample":
            r = _num(params, "r", ("system", "params"), default=1.2)
            sys, base_cert = BUILTINS[name](r)
        else:
            sys, base_cert = BUILTINS[name]()
    except ValueError as exc:
        raise ConfigError(("system", "params"), str(exc)) from None

    x0 = _get(raw, "x0", (), list)
    if len(x0) != sys.state_dim or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x0):
        raise ConfigError(("x0",), f"expected {sys.state_dim} numbers")
    x0 = np.array(x0, dtype=float)

    simd = _get(raw, "sim", (), dict, default={})
    unknown = set(simd) - SIM_KEYS
    if unknown:
        raise ConfigError(("sim", sorted(unknown)[0]), "unknown key")
    kw = {}
    for k, v in simd.items():
        if k == "method":
            kw[k] = v
        elif k == "max_events":
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(("sim", k), "expected an integer")
            kw[k] = v
        else:
            kw[k] = _num(simd, k, ("sim",))
    try:
        sim = SimConfig(**kw)
    except ValueError as exc:
        raise ConfigError(("sim",), str(exc)) from None

    trig = _get(raw, "trigger", (), dict)
    variant = _get(trig, "variant", ("trigger",), str)
    key = variant.replace("_", "").replace("-", "").lower()
    if key not in VARIANTS:
        raise ConfigError(("trigger", "variant"), f"unknown variant {variant!r}")
    sigma = _num(trig, "sigma", ("trigger",))

    certd = _get(raw, "certificate", (), dict, default={})
    exp = Experiment(raw=raw, system_name=name, system_params=dict(params), sys=sys,
                     cert=base_cert, law=None, x0=x0, sim=sim)

    try:
        if key == "stabilization":
            if isinstance(base_cert, BarrierCertificate):
                raise ConfigError(("trigger", "variant"), f"system {name!r} has no ISS Lyapunov certificate")
            exp.law = Stabilization(base_cert.gamma, base_cert.alpha3, sigma)
        else:
            if not isinstance(base_cert, BarrierCertificate):
                raise ConfigError(("trigger", "variant"), f"system {name!r} has no barrier certificate")
            b = _num(certd, "b", ("certificate",), default=0.0)
            if b < 0:
                raise ConfigError(("certificate", "b"), "must be nonnegative")
            cert = shift_certificate(base_cert, b) if b > 0 else base_cert
            exp.cert = cert
            if key == "naivesafety":
                exp.law = NaiveSafety(cert.iota, cert.alpha, sigma)
            elif key == "signednaivesafety":
                exp.law = SignedNaiveSafety(cert.iota, cert.alpha, sigma)
            else:
                if not cert.strong_margin > 0:
                    raise ConfigError(("certificate", "b"), "strong_issf needs b > 0 (strong margin)")
                _strong_setup(exp, certd, b, sigma)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(("trigger", "sigma"), str(exc)) from None

    a = _get(raw, "assertions", (), dict, default={})
    for k, v in a.items():
        if k in ("miet", "safety", "shrinkage"):
            if v is not None and not isinstance(v, bool):
                raise ConfigError(("assertions", k), "expected true, false or null")
        elif k == "miet_tau":
            _num(a, k, ("assertions",))
        else:
            raise ConfigError(("assertions", k), "unknown assertion")
    exp.assertions = dict(a)
    if exp.tau is None and "miet_tau" in a:
        exp.tau = float(a["miet_tau"])
    exp.output_dir = _get(raw, "output_dir", (), str, default=None)
    seed = _get(raw, "seed", (), int, default=0)
    exp.seed = seed
    return exp


def _strong_setup(exp: Experiment, certd: dict, b: float, sigma: float) -> None:
    cert = exp.cert
    beta_spec = certd.get("beta", "alpha")
    if beta_spec == "alpha":
        beta = cert.alpha
    elif isinstance(beta_spec, dict) and set(beta_spec) == {"scale"}:
        beta = scaled(cert.alpha, _num(beta_spec, "scale", ("certificate", "beta")))
    elif isinstance(beta_spec, dict):
        try:
            beta = classk.from_dict(beta_spec)
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(("certificate", "beta"), str(exc)) from None
    else:
        raise ConfigError(("certificate", "beta"), 'expected "alpha", {"scale": c} or a K-function object')

    if exp.system_name == "counterexample":
        default_radius = math.sqrt(1.0 + b)
    else:
        default_radius = None
    radius = _num(certd, "working_radius", ("certificate",), default=default_radius)
    if radius is None:
        raise ConfigError(("certificate", "working_radius"), "required for this system")
    grid = _get(certd, "grid", ("certificate",), int, default=41)
    factor = _num(certd, "safety_factor", ("certificate",), default=1.1)
    h_hi = max(float(cert.h(x)) for x in ball_grid(exp.sys.state_dim, radius, grid))
    try:
        law = strong_law(cert, sigma, beta, h_range=(0.0, h_hi))
    except ValueError as exc:
        raise ConfigError(("certificate", "beta"), str(exc)) from None
    exp.law = law
    F = _num(certd, "F", ("certificate",), default=None)
    if F is None:
        e_rad = _num(certd, "error_radius", ("certificate",), default=None)
        if e_rad is None:
            e_rad = trigger_error_radius(law, cert.value, radius, exp.sys.state_dim, grid)
        F = bound_dynamics(exp.sys, cert, radius, e_rad, grid=grid, safety_factor=factor)
    exp.F = F
    exp.cert = cert.with_bound(F)
    exp.tau = miet_bound(law, cert.iota.lipschitz_constant, F)


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_events_csv(log: EventLog, path: Path, n: int, m: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "t_i", "dt_i"] + [f"x{j + 1}" for j in range(n)]
                   + [f"u{j + 1}" for j in range(m)] + ["h"])
        times = log.event_times
        for i, t in enumerate(times):
            dt = fmt(times[i + 1] - t) if i + 1 < len(times) else ""
            w.writerow([i, fmt(t), dt] + [fmt(v) for v in log.event_states[i]]
                       + [fmt(v) for v in np.ravel(log.held_inputs[i])] + [fmt(log.event_values[i])])


def write_trace_csv(log: EventLog, path: Path, n: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x{j + 1}" for j in range(n)] + ["h", "err_norm", "residual"])
        for s in log.samples:
            w.writerow([fmt(s.t)] + [fmt(v) for v in s.x] + [fmt(s.h), fmt(s.err_norm), fmt(s.residual)])


@dataclass
class RunResult:
    exp: Experiment
    log: EventLog
    report: dict
    exit_code: int
    failures: list[str]


def check_assertions(exp: Experiment, report: dict) -> list[str]:
    failures = []
    a = exp.assertions
    checks = {
        "miet": report["miet"]["pass"],
        "safety": report["safety"]["pass"],
        "shrinkage": report["shrinkage"]["flagged"],
    }
    for k, got in checks.items():
        want = a.get(k)
        if want is None:
            continue
        if got is None:
            failures.append(f"{k}: expected {want}, but the check is not applicable (no tau)")
        elif bool(got) != want:
            failures.append(f"{k}: expected {want}, got {got}")
    return failures


def run_experiment(exp: Experiment, out_dir: Path | None = None, plots: bool = False) -> RunResult:
    log = simulate(exp.sys, exp.cert, exp.law, exp.x0, exp.sim)
    report = analysis.build_report(log, exp.tau, exp.sys, exp.cert, exp.law, exp.eps_safety)
    report["parameters"] = {
        "system": exp.system_name, "system_params": exp.system_params,
        "variant": type(exp.law).__name__, "sigma": exp.law.sigma,
        "d": getattr(exp.law, "d", None),
        "L_iota": getattr(getattr(exp.cert, "iota", None), "lipschitz_constant", None),
        "F": exp.F, "tau": exp.tau, "x0": exp.x0.tolist(), "seed": exp.seed,
    }
    failures = check_assertions(exp, report)
    report["assertions"] = {"failures": failures, "passed": not failures}
    if log.termination is Termination.TRIGGER_INFEASIBLE:
        code = 3
    elif failures:
        code = 1
    else:
        code = 0
    out = out_dir or (Path(exp.output_dir) if exp.output_dir else None)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_events_csv(log, out / "events.csv", exp.sys.state_dim, exp.sys.input_dim)
        write_trace_csv(log, out / "trace.csv", exp.sys.state_dim)
        (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        if plots:
            from .plots import plot_runs
            plot_runs([(exp.raw.get("trigger", {}).get("variant", "run"), log)], out)
    return RunResult(exp, log, report, code, failures)
