"""Exact interevent time of the signed naive trigger from states ever
closer to the unit circle, computed on the closed-form hold solution."""
import argparse
import math

import numpy as np

from etsafe.oracle import exact_event_time
from etsafe.systems import counterexample_system
from etsafe.triggers import SignedNaiveSafety

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--decades", type=int, default=8)
    args = p.parse_args()
    _, cert = counterexample_system(1.2)
    law = SignedNaiveSafety(cert.iota, cert.alpha, args.sigma)
    print(f"{'h_i':>8} {'dt':>12} {'dt/h_i':>10}")
    for k in range(1, args.decades + 1):
        h_i = 10.0**-k
        dt = exact_event_time(np.array([math.sqrt(1 - h_i), 0.0]), law)
        print(f"{h_i:8.0e} {dt:12.5g} {dt / h_i:10.4g}")
