"""Closed-form hold solution of the planar counterexample.

With the input frozen at ``u_i = k(x_i) = h_i / 2`` the closed loop is linear,
``x' = [[u_i, 1], [-1, u_i]] x``, so

    x(t_i + dt) = exp(h_i dt / 2) R(dt) x_i,   R(dt) = [[cos, sin], [-sin, cos]]

where ``h_i = 1 - |x_i|^2``.  Nothing here calls the numerical integrator;
these functions are the ground truth the simulator is checked against.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import bisect

from .triggers import SignedNaiveSafety, StrongISSf, TriggerLaw

HORIZON = 1e3


def _h0(x) -> float:
    return 1.0 - float(x[0] * x[0] + x[1] * x[1])


def closed_form_step(x_i, dt: float) -> np.ndarray:
    """State ``dt`` time units after an event at ``x_i``."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    x_i = np.asarray(x_i, dtype=float)
    s = math.exp(0.5 * _h0(x_i) * dt)
    c, sn = math.cos(dt), math.sin(dt)
    return s * np.array([c * x_i[0] + sn * x_i[1], -sn * x_i[0] + c * x_i[1]])


def error_norm_exact(x_i, dt: float) -> float:
    """``|x_i - x(t_i + dt)|`` from the closed-form norm identity.

    ``exp(w) - 2 exp(w/2) cos(dt) + 1`` with ``w = h_i dt`` is evaluated as
    ``expm1(w/2)^2 + 4 exp(w/2) sin(dt/2)^2`` to avoid cancellation at small dt.
    """
    x_i = np.asarray(x_i, dtype=float)
    w = _h0(x_i) * dt
    q = math.expm1(0.5 * w) ** 2 + 4.0 * math.exp(0.5 * w) * math.sin(0.5 * dt) ** 2
    return math.sqrt(q) * float(np.linalg.norm(x_i))


@dataclass(frozen=True)
class HoldSolution:
    x_i: np.ndarray

    @property
    def h_i(self) -> float:
        return _h0(self.x_i)

    def state(self, dt):
        return closed_form_step(self.x_i, dt)

    def error_norm(self, dt):
        return error_norm_exact(self.x_i, dt)

    def h(self, dt):
        """``1 - exp(h_i dt) |x_i|^2``."""
        return 1.0 - math.exp(self.h_i * dt) * float(self.x_i @ self.x_i)


def _rhs_lipschitz(law: TriggerLaw) -> float:
    if isinstance(law, SignedNaiveSafety):
        parts = [law.sigma * law.alpha.lipschitz_constant if law.alpha.lipschitz_constant is not None else None]
    elif isinstance(law, StrongISSf):
        parts = [law.alpha.lipschitz_constant, law.beta.lipschitz_constant]
    else:
        raise TypeError("exact event times are available for SignedNaiveSafety and StrongISSf")
    if any(p is None for p in parts) or law.iota.lipschitz_constant is None:
        raise ValueError("exact_event_time needs Lipschitz constants on alpha, beta and iota")
    return float(sum(parts))


def exact_event_time(x_i, law: TriggerLaw, h_offset: float = 0.0,
                     horizon: float = HORIZON, xtol: float = 1e-12) -> float | None:
    """First ``dt > 0`` at which the trigger residual reaches zero, or None.

    The residual is ``law.rhs(h(x(dt)) + h_offset) - iota(|e(dt)|)`` on the
    closed form (``h_offset = b`` for a shifted certificate).  Steps are
    taken no longer than ``residual / L`` where L bounds the residual's time
    derivative on the step, so no crossing is skipped; the final bracket is
    bisected to ``xtol``.
    """
    sol = HoldSolution(np.asarray(x_i, dtype=float))
    h_i = sol.h_i
    n2 = float(sol.x_i @ sol.x_i)
    speed0 = math.sqrt(1.0 + 0.25 * h_i * h_i) * math.sqrt(n2)
    L_rhs = _rhs_lipschitz(law)
    L_iota = law.iota.lipschitz_constant

    def residual(dt):
        return float(law.rhs(sol.h(dt) + h_offset, 0.0)) - float(law.iota(sol.error_norm(dt)))

    def slope_bound(t_end):
        # |d/dt h| = |h_i| e^{h_i t} |x_i|^2 and |x'| = speed0 e^{h_i t / 2}, monotone in t
        g = math.exp(h_i * t_end) if h_i > 0 else 1.0
        return L_rhs * abs(h_i) * g * n2 + L_iota * speed0 * math.sqrt(g)

    t, r = 0.0, residual(0.0)
    if not r > 0:
        return 0.0
    if n2 == 0.0:
        return None  # f(0, u) = 0: the origin never moves, e stays 0
    while t < horizon:
        L = slope_bound(t)
        s = horizon - t if L == 0 else r / L
        # shrink until the bound holds over the whole window
        while L > 0 and s * slope_bound(min(t + s, horizon)) > r:
            s *= 0.5
        if s < 0.25 * xtol:
            # residual is within xtol of zero: probe just beyond
            probe = min(t + xtol, horizon)
            if residual(probe) <= 0:
                return bisect(residual, t, probe, xtol=xtol * 1e-3)
            t, r = probe, residual(probe)
            continue
        t_new = min(t + s, horizon)
        r_new = residual(t_new)
        if r_new <= 0:
            return bisect(residual, t, t_new, xtol=xtol * 1e-3)
        t, r = t_new, r_new
    return None
