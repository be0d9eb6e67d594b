"""Guaranteed bound tau and the measured minimum interevent time as the
shift b of the safe set varies (strong trigger, counterexample)."""
import argparse
import json
import math

import numpy as np

from etsafe.sim import SimConfig, simulate
from etsafe.systems import bound_dynamics, counterexample_system
from etsafe.triggers import miet_bound, shift_certificate, strong_law, trigger_error_radius


def sweep(bs, sigma=0.9, t_final=10.0, x0=(0.5, 0.5)):
    sys, cert = counterexample_system(1.2)
    rows = []
    for b in bs:
        cb = shift_certificate(cert, b)
        law = strong_law(cb, sigma)
        R = math.sqrt(1 + b)
        F = bound_dynamics(sys, cb, R, trigger_error_radius(law, cb.value, R, 2))
        tau = miet_bound(law, cb.iota.lipschitz_constant, F)
        log = simulate(sys, cb, law, np.array(x0), SimConfig(t_final=t_final))
        rows.append({"b": b, "F": F, "tau": tau, "min_interevent": float(log.interevent_times.min()),
                     "events": len(log.event_times)})
    return rows


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--b", type=float, nargs="+", default=[0.02, 0.05, 0.1, 0.2, 0.4])
    p.add_argument("--sigma", type=float, default=0.9)
    p.add_argument("--t-final", type=float, default=10.0)
    p.add_argument("--json", action="store_true", help="print rows as JSON")
    args = p.parse_args()
    rows = sweep(args.b, args.sigma, args.t_final)
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        print(f"{'b':>6} {'F':>9} {'tau':>11} {'min dt':>11} {'events':>7}")
        for r in rows:
            print(f"{r['b']:6.3g} {r['F']:9.5g} {r['tau']:11.5g} {r['min_interevent']:11.5g} {r['events']:7d}")
