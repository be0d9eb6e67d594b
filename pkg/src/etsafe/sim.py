"""Sample-and-hold closed-loop simulation with event localization.

Between events the input is frozen at ``k(x(t_i))`` and the error is
``e(t) = x(t_i) - x(t)``.  The held ODE is integrated with an adaptive
Dormand-Prince 5(4) pair (or fixed-step RK4).  After every accepted step
the trigger residual is checked at the cubic-Hermite midpoint and at the
step end; the first nonpositive check brackets the event, which is then
bisected on sub-steps integrated from the start of the step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import math
from typing import Callable

import numpy as np

from .systems import ControlSystem
from .triggers import TriggerLaw

Array = np.ndarray


class Termination(str, Enum):
    TIME_LIMIT = "TimeLimit"
    EVENT_LIMIT = "EventLimit"
    TRIGGER_INFEASIBLE = "TriggerInfeasible"
    INTEGRATION_FAILURE = "IntegrationFailure"


@dataclass
class SimConfig:
    t_final: float = 30.0
    max_events: int = 100_000
    max_step: float = 0.05
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    event_tol: float = 1e-10
    sample_stride: float = 0.01
    method: str = "rk45"  # or "rk4": fixed step of size max_step

    def __post_init__(self):
        for name in ("t_final", "max_step", "rel_tol", "abs_tol", "event_tol", "sample_stride"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_events < 1:
            raise ValueError("max_events must be positive")
        if not self.event_tol < self.max_step:
            raise ValueError("event_tol must be much smaller than max_step")
        if self.method not in ("rk45", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class Sample:
    t: float
    x: Array
    h: float
    err_norm: float
    residual: float
    interval: int  # index of the event that opened the hold interval


@dataclass
class EventLog:
    """Simulation record.

    ``held_inputs[i]`` and ``event_states[i]`` belong to the interval opened
    at ``event_times[i]``.  ``h`` columns hold the certificate value (the
    barrier h, or V for an ISS Lyapunov certificate).
    """

    event_times: list[float] = field(default_factory=list)
    event_states: list[Array] = field(default_factory=list)
    held_inputs: list[Array] = field(default_factory=list)
    event_values: list[float] = field(default_factory=list)
    samples: list[Sample] = field(default_factory=list)
    termination: Termination = Termination.TIME_LIMIT
    event_tol: float = 0.0

    @property
    def interevent_times(self) -> Array:
        return np.diff(np.asarray(self.event_times, dtype=float))

    def trace_columns(self) -> dict[str, Array]:
        if not self.samples:
            return {"t": np.empty(0), "x": np.empty((0, 0)), "h": np.empty(0),
                    "err_norm": np.empty(0), "residual": np.empty(0)}
        return {
            "t": np.array([s.t for s in self.samples]),
            "x": np.array([s.x for s in self.samples]),
            "h": np.array([s.h for s in self.samples]),
            "err_norm": np.array([s.err_norm for s in self.samples]),
            "residual": np.array([s.residual for s in self.samples]),
            "interval": np.array([s.interval for s in self.samples]),
        }


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


_A_MAT = np.zeros((6, 6))
for _i, _row in enumerate(_A):
    _A_MAT[_i, :len(_row)] = _row
_B_VEC = np.array(_B)
_E_VEC = np.array(_E)


def dp_step(rhs: Callable[[Array], Array], x: Array, h: float, k1: Array):
    """One Dormand-Prince step.  Returns ``(x_new, f(x_new), error_vector)``."""
    K = np.empty((7, x.size))
    K[0] = k1
    for i in range(1, 6):
        K[i] = rhs(x + h * (_A_MAT[i, :i] @ K[:i]))
    x_new = x + h * (_B_VEC @ K[:6])
    K[6] = rhs(x_new)
    return x_new, K[6].copy(), h * (_E_VEC @ K)


def rk4_step(rhs, x, h, k1):
    k2 = rhs(x + 0.5 * h * k1)
    k3 = rhs(x + 0.5 * h * k2)
    k4 = rhs(x + h * k3)
    x_new = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x_new, rhs(x_new), None


def hermite(xa, fa, xb, fb, h, theta):
    t2 = theta * theta
    t3 = t2 * theta
    return ((2 * t3 - 3 * t2 + 1) * xa + (t3 - 2 * t2 + theta) * h * fa
            + (-2 * t3 + 3 * t2) * xb + (t3 - t2) * h * fb)


class _Stepper:
    """Adaptive (or fixed) stepping for one frozen right-hand side."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.h_next = cfg.max_step
        self._step = dp_step if cfg.method == "rk45" else rk4_step

    def substep(self, rhs, x, fx, h):
        if h == 0.0:
            return x
        return self._step(rhs, x, h, fx)[0]

    def attempt(self, rhs, x, fx, t, t_end):
        """Take one accepted step toward ``t_end``; return ``(h, x_new, f_new)`` or None on failure."""
        cfg = self.cfg
        while True:
            h = min(self.h_next, cfg.max_step, t_end - t)
            if h <= 1e-15 * max(1.0, abs(t)):
                return None
            x_new, f_new, err = self._step(rhs, x, h, fx)
            finite = math.isfinite(float(x_new.sum() + f_new.sum()))
            if err is None:
                if not finite:
                    return None
                return h, x_new, f_new
            if finite:
                scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(x), np.abs(x_new))
                enorm = float(np.sqrt(np.mean((err / scale) ** 2)))
            else:
                enorm = math.inf
            if enorm <= 1.0:
                grow = 5.0 if enorm == 0 else min(5.0, 0.9 * enorm ** -0.2)
                # keep the unclamped proposal when this step was shortened by t_end
                if h == min(self.h_next, cfg.max_step):
                    self.h_next = h * grow
                else:
                    self.h_next = max(self.h_next, h * grow)
                return h, x_new, f_new
            shrink = 0.2 if not finite else max(0.2, 0.9 * enorm ** -0.2)
            self.h_next = h * shrink


def integrate_hold(sys: ControlSystem, x0, u, dt: float, cfg: SimConfig) -> Array:
    """State after holding input ``u`` for ``dt`` from ``x0`` (no trigger)."""
    x = np.asarray(x0, dtype=float).copy()
    u = np.asarray(u, dtype=float)
    def rhs(y):
        return np.asarray(sys.dynamics(y, u), dtype=float)
    stepper = _Stepper(cfg)
    t, fx = 0.0, rhs(x)
    while t < dt:
        out = stepper.attempt(rhs, x, fx, t, dt)
        if out is None:
            raise FloatingPointError("integration failed")
        h, x, fx = out
        t = dt if dt - (t + h) <= 1e-15 * max(1.0, dt) else t + h
    return x


def localize_event(residual_at: Callable[[float], float], t_lo: float, t_hi: float,
                   event_tol: float) -> tuple[float, float]:
    """Shrink a bracket with ``residual_at(t_lo) > 0 >= residual_at(t_hi)`` to width <= event_tol.

    Illinois-modified false position: the retained endpoint's residual is
    halved whenever the same side survives twice, and trial points are kept
    at least event_tol/2 inside the bracket so the final step closes it.
    The crossing lies inside the returned ``(lo, hi)``.
    """
    r_lo, r_hi = residual_at(t_lo), residual_at(t_hi)
    if not (r_lo > 0 >= r_hi):
        raise RuntimeError(f"no sign change on [{t_lo}, {t_hi}]")
    side = 0
    while t_hi - t_lo > event_tol:
        m = t_hi - r_hi * (t_hi - t_lo) / (r_hi - r_lo)
        pad = 0.5 * event_tol
        if not (t_lo + pad <= m <= t_hi - pad):
            m = min(max(m, t_lo + pad), t_hi - pad)
        if not t_lo < m < t_hi:
            break
        r_m = residual_at(m)
        if r_m > 0:
            t_lo, r_lo = m, r_m
            if side == -1:
                r_hi *= 0.5
            side = -1
        else:
            t_hi, r_hi = m, r_m
            if side == 1:
                r_lo *= 0.5
            side = 1
    return t_lo, t_hi


def simulate(sys: ControlSystem, cert, law: TriggerLaw, x0, cfg: SimConfig) -> EventLog:
    """Run the event-triggered sample-and-hold loop from ``x0``.

    ``cert`` supplies ``value(x)`` (h for barrier certificates, V for ISS
    Lyapunov certificates), which is passed to the trigger law.
    """
    value = cert.value
    rhs_h = law.rhs
    gain = law.gain
    dyn = sys.dynamics
    stride = cfg.sample_stride
    log = EventLog(event_tol=cfg.event_tol)
    stepper = _Stepper(cfg)

    t = 0.0
    x = np.array(x0, dtype=float)
    if not np.all(np.isfinite(x)):
        log.termination = Termination.INTEGRATION_FAILURE
        return log

    def residual(y, xi):
        return float(rhs_h(value(y), math.sqrt(float(y @ y)))) - float(gain(math.sqrt(float((xi - y) @ (xi - y)))))

    def record(ts, y, xi, idx):
        e = xi - y
        en = math.sqrt(float(e @ e))
        hv = value(y)
        log.samples.append(Sample(ts, y, float(hv), en,
                                  float(rhs_h(hv, math.sqrt(float(y @ y)))) - float(gain(en)), idx))

    def stride_samples(rhs, xa, fa, ta, tb, xi, idx, closed):
        k = math.floor(ta / stride) + 1
        while True:
            ts = k * stride
            if ts > tb or (ts == tb and not closed):
                break
            if ts > ta:
                record(ts, stepper.substep(rhs, xa, fa, ts - ta), xi, idx)
            k += 1

    while True:
        idx = len(log.event_times)
        xi = x
        u = np.asarray(sys.controller(xi), dtype=float)
        log.event_times.append(t)
        log.event_states.append(xi)
        log.held_inputs.append(u)
        log.event_values.append(float(value(xi)))
        record(t, xi, xi, idx)

        if len(log.event_times) >= cfg.max_events:
            log.termination = Termination.EVENT_LIMIT
            return log
        if t >= cfg.t_final:
            log.termination = Termination.TIME_LIMIT
            return log

        def rhs(y, u=u):
            return np.asarray(dyn(y, u), dtype=float)

        fa = rhs(xi)
        if not residual(xi, xi) > 0:
            if not np.any(fa):
                # equilibrium of the held system: e stays 0, nothing ever triggers
                stride_samples(rhs, xi, fa, t, cfg.t_final, xi, idx, True)
                if log.samples[-1].t < cfg.t_final:
                    record(cfg.t_final, xi, xi, idx)
                log.termination = Termination.TIME_LIMIT
            else:
                log.termination = Termination.TRIGGER_INFEASIBLE
            return log

        ta, xa = t, xi
        event = None
        while ta < cfg.t_final:
            out = stepper.attempt(rhs, xa, fa, ta, cfg.t_final)
            if out is None:
                log.termination = Termination.INTEGRATION_FAILURE
                return log
            h, xb, fb = out
            tb = ta + h
            if cfg.t_final - tb <= 1e-15 * max(1.0, cfg.t_final):
                tb = cfg.t_final
            bracket = _find_bracket(lambda y: residual(y, xi),
                                    lambda s: stepper.substep(rhs, xa, fa, s - ta),
                                    ta, xa, fa, tb, xb, fb, h)
            if bracket is not None:
                def res_at(s, xa=xa, fa=fa, ta=ta):
                    return residual(stepper.substep(rhs, xa, fa, s - ta), xi)
                t_lo, t_hi = localize_event(res_at, *bracket, cfg.event_tol)
                event = (ta, xa, fa, t_lo if t_lo > t else t_hi)
            if event is not None:
                break
            stride_samples(rhs, xa, fa, ta, tb, xi, idx, True)
            ta, xa, fa = tb, xb, fb

        if event is None:
            if log.samples[-1].t < cfg.t_final:
                record(cfg.t_final, xa, xi, idx)
            log.termination = Termination.TIME_LIMIT
            return log

        ta, xa, fa, t_ev = event
        stride_samples(rhs, xa, fa, ta, t_ev, xi, idx, False)
        x_ev = stepper.substep(rhs, xa, fa, t_ev - ta)
        if not np.all(np.isfinite(x_ev)):
            log.termination = Termination.INTEGRATION_FAILURE
            return log
        record(t_ev, x_ev, xi, idx)
        t, x = t_ev, x_ev


def _find_bracket(res, state_at, ta, xa, fa, tb, xb, fb, h):
    """Bracket the first residual crossing in an accepted step, or None.

    The residual is known positive at ``ta``.  The midpoint is screened on
    the Hermite interpolant and confirmed on an integrated sub-step; the
    step end uses the accepted state.
    """
    tm = ta + 0.5 * h
    if res(hermite(xa, fa, xb, fb, h, 0.5)) <= 0:
        if res(state_at(tm)) <= 0:
            return ta, tm
        if res(xb) <= 0:
            return tm, tb
        # interpolant dipped but the integrated midpoint did not: scan the step
        grid = np.linspace(ta, tb, 17)
        prev = ta
        for s in grid[1:-1]:
            if res(state_at(s)) <= 0:
                return prev, s
            prev = s
        return None
    if res(xb) <= 0:
        return ta, tb
    return None
