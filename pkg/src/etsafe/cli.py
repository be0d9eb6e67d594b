"""Command line entry point.

    etsafe run --config counterexample_strong.json [--out DIR] [--plots on|off]
    etsafe run --config a.json --config b.json --parallel 2
    etsafe compare A.json B.json --out DIR
    etsafe validate-oracle --seed 0 --trials 1000

Exit codes: 0 success, 1 assertion or validation failure, 2 invalid
config, 3 trigger infeasible.
"""
from __future__ import annotations

import argparse
from concurrent.futures import ProcessPoolExecutor
import json
import math
from pathlib import Path
import sys
import time

import numpy as np

from .experiment import ConfigError, load_config, resolve_config_path, run_experiment

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2, 3


def _say(args, msg):
    if not args.quiet:
        print(msg)


def _load(arg: str):
    path = resolve_config_path(arg)
    try:
        return load_config(path), None
    except ConfigError as exc:
        return None, exc.describe(str(path))


def _run_one(arg: str, out: str | None, plots: bool, many: bool) -> tuple[int, str]:
    exp, err = _load(arg)
    if exp is None:
        return EXIT_CONFIG, err
    out_dir = None
    if out is not None:
        out_dir = Path(out) / Path(arg).stem if many else Path(out)
    elif exp.output_dir is None:
        out_dir = Path("out") / Path(arg).stem
    res = run_experiment(exp, out_dir, plots)
    rep = res.report
    m = rep["miet"]
    lines = [
        f"{arg}: {rep['termination']}, {rep['events']} events",
        f"  miet: min={m['min']} tau={m['tau']} pass={m['pass']}",
        f"  safety: min_h={rep['safety']['min_h']} pass={rep['safety']['pass']}",
        f"  shrinkage: ratio={rep['shrinkage']['ratio']} flagged={rep['shrinkage']['flagged']}",
        f"  certification: min_slack={rep['certification']['min_slack']}",
    ]
    lines += [f"  FAILED {f}" for f in res.failures]
    if res.exit_code == EXIT_INFEASIBLE:
        lines.append("  trigger became infeasible (residual <= 0 right after an update)")
    return res.exit_code, "\n".join(lines)


def cmd_run(args) -> int:
    plots = args.plots == "on"
    configs = args.config
    many = len(configs) > 1
    if args.parallel > 1 and many:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            results = list(pool.map(_run_one, configs, [args.out] * len(configs),
                                    [plots] * len(configs), [many] * len(configs)))
    else:
        results = [_run_one(c, args.out, plots, many) for c in configs]
    for code, text in results:
        if code == EXIT_CONFIG:
            print(text, file=sys.stderr)
        else:
            _say(args, text)
    codes = [c for c, _ in results]
    for code in (EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_ASSERT):
        if code in codes:
            return code
    return EXIT_OK


def cmd_compare(args) -> int:
    exps = []
    for arg in (args.a, args.b):
        exp, err = _load(arg)
        if exp is None:
            print(err, file=sys.stderr)
            return EXIT_CONFIG
        exps.append(exp)
    a, b = exps
    if (a.system_name, a.system_params) != (b.system_name, b.system_params) or not np.array_equal(a.x0, b.x0):
        print("compare: configs must share system, parameters and x0", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    labels = [Path(args.a).stem, Path(args.b).stem]
    if labels[0] == labels[1]:
        labels = [labels[0] + "_a", labels[1] + "_b"]
    results = [run_experiment(e, out / lab, plots=False) for e, lab in zip(exps, labels)]
    joint = {lab: r.report for lab, r in zip(labels, results)}
    (out / "compare.json").write_text(json.dumps(joint, indent=2, sort_keys=True) + "\n")
    if args.plots == "on":
        from .plots import plot_runs
        plot_runs([(lab, r.log) for lab, r in zip(labels, results)], out,
                  taus=[r.exp.tau for r in results])
    rows = [("events", "events"), ("termination", "termination")]
    _say(args, f"{'':24s}{labels[0]:>26s}{labels[1]:>26s}")
    for key, name in rows:
        _say(args, f"{name:24s}{str(results[0].report[key]):>26s}{str(results[1].report[key]):>26s}")
    for sect, key in (("miet", "min"), ("miet", "median"), ("miet", "tau"),
                      ("safety", "min_h"), ("shrinkage", "ratio")):
        va, vb = (str(r.report[sect][key]) for r in results)
        _say(args, f"{sect + '.' + key:24s}{va:>26s}{vb:>26s}")
    codes = [r.exit_code for r in results]
    for code in (EXIT_INFEASIBLE, EXIT_ASSERT):
        if code in codes:
            return code
    return EXIT_OK


def oracle_trials(seed: int = 0, trials: int = 1000, radius: float = 1.2):
    """Random ``(x_i, dt)`` with |x_i| <= radius, dt in (0, 1].

    Returns ``(states, dts, rel_err, self_err)``: integrator-vs-closed-form
    relative error and ``|error_norm_exact - |x_i - closed_form||``.
    """
    from .oracle import closed_form_step, error_norm_exact
    from .sim import SimConfig, integrate_hold
    from .systems import counterexample_system

    if trials < 1:
        raise ValueError("trials must be >= 1")
    sys_, _ = counterexample_system()
    cfg = SimConfig()
    rng = np.random.default_rng(seed)
    states = np.empty((trials, 2))
    dts = np.empty(trials)
    rel = np.empty(trials)
    self_err = np.empty(trials)
    for k in range(trials):
        rad = radius * math.sqrt(rng.random())
        ang = rng.uniform(0.0, 2 * math.pi)
        x_i = np.array([rad * math.cos(ang), rad * math.sin(ang)])
        dt = 1.0 - rng.random()
        exact = closed_form_step(x_i, dt)
        num = integrate_hold(sys_, x_i, sys_.controller(x_i), dt, cfg)
        states[k], dts[k] = x_i, dt
        rel[k] = float(np.linalg.norm(num - exact)) / max(float(np.linalg.norm(exact)), 1e-300)
        self_err[k] = abs(error_norm_exact(x_i, dt) - float(np.linalg.norm(x_i - exact)))
    return states, dts, rel, self_err


def validate_oracle(seed: int = 0, trials: int = 1000, rel_tol: float = 1e-8,
                    self_tol: float = 1e-10) -> list[str]:
    """Failure descriptions (empty when every trial is within tolerance)."""
    states, dts, rel, self_err = oracle_trials(seed, trials)
    bad = np.flatnonzero(~((rel <= rel_tol) & (self_err <= self_tol)))
    return [f"trial {k}: x_i={states[k].tolist()} dt={dts[k]!r} rel_err={rel[k]:.3e} "
            f"error_norm_mismatch={self_err[k]:.3e}" for k in bad]


def cmd_validate_oracle(args) -> int:
    if args.trials < 1:
        print("--trials must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    t0 = time.perf_counter()
    failures = validate_oracle(args.seed, args.trials)
    dt = time.perf_counter() - t0
    for f in failures:
        print(f, file=sys.stderr)
    _say(args, f"validate-oracle: {args.trials - len(failures)}/{args.trials} passed in {dt:.2f}s")
    return EXIT_ASSERT if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="etsafe", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--plots", choices=("on", "off"), default="off")
        sp.add_argument("--quiet", action="store_true")

    r = sub.add_parser("run", help="simulate one or more configs and write CSV/JSON artifacts")
    r.add_argument("--config", action="append", required=True,
                   help="config path or bundled config name (repeatable)")
    r.add_argument("--out", help="output directory (overrides output_dir)")
    r.add_argument("--parallel", type=int, default=1, help="worker processes for batch mode")
    common(r)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="run two configs on the same system side by side")
    c.add_argument("a")
    c.add_argument("b")
    c.add_argument("--out", default="out/compare")
    common(c)
    c.set_defaults(func=cmd_compare)

    v = sub.add_parser("validate-oracle", help="check the integrator against the closed form")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--quiet", action="store_true")
    v.set_defaults(func=cmd_validate_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
