"""Post-run reports computed from an :class:`~etsafe.sim.EventLog`.

All functions are pure: they read the log and never modify it.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict
import math

import numpy as np

from .sim import EventLog
from .systems import BarrierCertificate, ControlSystem, IssLfCertificate
from .triggers import (NaiveSafety, SignedNaiveSafety, Stabilization, StrongISSf,
                       TriggerLaw)

EPS_SAFETY = 1e-6


@dataclass
class MietReport:
    min: float | None
    median: float | None
    max: float | None
    count: int
    tau: float | None
    passed: bool | None

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


@dataclass
class SafetyReport:
    min_h: float | None
    passed: bool

    def to_dict(self):
        return {"min_h": self.min_h, "pass": self.passed}


@dataclass
class ShrinkageReport:
    first_decile_median: float | None
    last_decile_median: float | None
    ratio: float | None
    flagged: bool
    inconclusive: bool

    def to_dict(self):
        return asdict(self)


@dataclass
class CertificationReport:
    min_slack: float | None
    fd_max_mismatch: float | None
    fd_ok: bool
    checked: int

    def to_dict(self):
        return asdict(self)


def miet_report(log: EventLog, tau: float | None) -> MietReport:
    """Interevent statistics; passes iff ``min >= tau - event_tol`` (None when tau is None)."""
    ie = log.interevent_times
    if ie.size == 0:
        return MietReport(None, None, None, 0, tau, True)
    mn = float(ie.min())
    passed = None if tau is None else bool(mn >= tau - log.event_tol)
    return MietReport(mn, float(np.median(ie)), float(ie.max()), int(ie.size), tau, passed)


def safety_report(log: EventLog, eps: float = EPS_SAFETY) -> SafetyReport:
    if not log.samples:
        return SafetyReport(None, True)
    mn = min(s.h for s in log.samples)
    return SafetyReport(float(mn), bool(mn >= -eps))


def shrinkage_report(log: EventLog, threshold: float = 10.0, min_intervals: int = 20) -> ShrinkageReport:
    """Compare the median interevent time of the first and last deciles."""
    ie = log.interevent_times
    if ie.size < min_intervals:
        return ShrinkageReport(None, None, None, False, True)
    k = max(1, ie.size // 10)
    first = float(np.median(ie[:k]))
    last = float(np.median(ie[-k:]))
    ratio = math.inf if last == 0 else first / last
    return ShrinkageReport(first, last, ratio, bool(ratio > threshold), False)


def _slack(law: TriggerLaw, cert, hdot: float, hval: float, x_norm: float) -> float:
    """Margin of the decay inequality the law is meant to enforce (>= 0 when it holds)."""
    if isinstance(law, StrongISSf):
        return hdot + float(law.beta(hval)) - (1.0 - law.sigma) * law.d
    if isinstance(law, SignedNaiveSafety):
        a = float(law.alpha(hval))
        factor = 1.0 + law.sigma if hval >= 0 else 1.0 - law.sigma
        return hdot + factor * a
    if isinstance(law, NaiveSafety):
        return hdot + (1.0 + law.sigma) * float(law.alpha(hval))
    if isinstance(law, Stabilization):
        return (law.sigma - 1.0) * float(law.alpha3(x_norm)) - hdot
    raise TypeError(f"unknown law {law!r}")


def certify_trajectory(log: EventLog, sys: ControlSystem,
                       cert: BarrierCertificate | IssLfCertificate,
                       law: TriggerLaw) -> CertificationReport:
    """Minimum slack of the law's decay inequality over all trace samples.

    The derivative is ``grad(x) . f(x, u_i)`` with the input held on the
    sample's interval, which equals ``f(x, k(x + e))``.  As a cross-check it is
    compared with finite differences of the recorded values between
    consecutive samples of the same interval (trapezoid of the two
    endpoint derivatives), tolerance ``max(1e-4, 1e-2 |dh|)``.
    """
    if not log.samples:
        return CertificationReport(None, None, True, 0)
    slacks, derivs = [], []
    for s in log.samples:
        x = np.asarray(s.x, dtype=float)
        u = np.asarray(log.held_inputs[s.interval], dtype=float)
        hdot = float(cert.gradient(x) @ np.asarray(sys.dynamics(x, u), dtype=float))
        derivs.append(hdot)
        slacks.append(_slack(law, cert, hdot, s.h, float(np.linalg.norm(x))))
    worst = 0.0
    fd_ok = True
    for a, b, da, db in zip(log.samples[:-1], log.samples[1:], derivs[:-1], derivs[1:]):
        if a.interval != b.interval or b.t - a.t <= 1e-9:
            continue
        fd = (b.h - a.h) / (b.t - a.t)
        mid = 0.5 * (da + db)
        mismatch = abs(fd - mid)
        worst = max(worst, mismatch)
        if mismatch > max(1e-4, 1e-2 * abs(mid)):
            fd_ok = False
    return CertificationReport(float(min(slacks)), worst, fd_ok, len(slacks))


def build_report(log: EventLog, tau: float | None, sys=None, cert=None, law=None,
                 eps_safety: float = EPS_SAFETY) -> dict:
    """JSON-ready dict with the stable keys miet / safety / shrinkage / certification."""
    out = {
        "miet": miet_report(log, tau).to_dict(),
        "safety": safety_report(log, eps_safety).to_dict(),
        "shrinkage": shrinkage_report(log).to_dict(),
        "termination": log.termination.value,
        "events": len(log.event_times),
    }
    if sys is not None:
        out["certification"] = certify_trajectory(log, sys, cert, law).to_dict()
    return out
