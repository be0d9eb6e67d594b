"""Event-trigger laws, the minimum interevent time bound and the superset shift.

Every law is written as ``residual = rhs(h, |x|) - gain(|e|)``.  Holding the
input is allowed while the residual is positive; the next event is the
first time it reaches zero.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from .classk import KFunction, Linear, shift_transform
from .systems import BarrierCertificate, ball_grid


def _check_sigma(sigma, lo_open, hi, hi_closed, name):
    ok = sigma > lo_open and (sigma <= hi if hi_closed else sigma < hi)
    if not ok:
        bracket = "]" if hi_closed else ")"
        raise ValueError(f"{name}: sigma={sigma} outside ({lo_open}, {hi}{bracket}")


@dataclass(frozen=True)
class Stabilization:
    """``gamma(|e|) <= sigma * alpha3(|x|)``."""

    gamma: KFunction
    alpha3: KFunction
    sigma: float

    def __post_init__(self):
        _check_sigma(self.sigma, 0.0, 1.0, False, "Stabilization")

    @property
    def gain(self):
        return self.gamma

    def rhs(self, h, x_norm):
        return self.sigma * self.alpha3(x_norm)


@dataclass(frozen=True)
class NaiveSafety:
    """``iota(|e|) <= sigma * alpha(h)``; unsatisfiable once h < 0."""

    iota: KFunction
    alpha: KFunction
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"NaiveSafety: sigma={self.sigma} must be positive")

    @property
    def gain(self):
        return self.iota

    def rhs(self, h, x_norm):
        return self.sigma * self.alpha(h)


@dataclass(frozen=True)
class SignedNaiveSafety:
    """``iota(|e|) <= sigma * |alpha(h)|``."""

    iota: KFunction
    alpha: KFunction
    sigma: float

    def __post_init__(self):
        _check_sigma(self.sigma, 0.0, 1.0, False, "SignedNaiveSafety")

    @property
    def gain(self):
        return self.iota

    def rhs(self, h, x_norm):
        return self.sigma * np.abs(self.alpha(h))


@dataclass(frozen=True)
class StrongISSf:
    """``iota(|e|) <= beta(h) - alpha(h) + sigma * d`` for a strong certificate."""

    iota: KFunction
    alpha: KFunction
    beta: KFunction
    sigma: float
    d: float

    def __post_init__(self):
        _check_sigma(self.sigma, 0.0, 1.0, True, "StrongISSf")
        if not self.d > 0:
            raise ValueError(f"StrongISSf: margin d={self.d} must be positive")

    @property
    def gain(self):
        return self.iota

    def rhs(self, h, x_norm):
        return self.beta(h) - self.alpha(h) + self.sigma * self.d


TriggerLaw = Union[Stabilization, NaiveSafety, SignedNaiveSafety, StrongISSf]
SAFETY_LAWS = (NaiveSafety, SignedNaiveSafety, StrongISSf)


def trigger_residual(law: TriggerLaw, x, h_val: float, e, norm_x: float | None = None) -> float:
    """``rhs(h, |x|) - gain(|e|)``: positive while holding is allowed, zero at an event."""
    if norm_x is None:
        norm_x = float(np.linalg.norm(x))
    e_norm = float(np.linalg.norm(e))
    return float(law.rhs(h_val, norm_x)) - float(law.gain(e_norm))


def check_dominance(beta: KFunction, alpha: KFunction, h_lo: float, h_hi: float,
                    samples: int = 1000) -> bool:
    """Sampled check of beta(r) >= alpha(r) on [h_lo, h_hi]."""
    r = np.linspace(h_lo, h_hi, samples)
    return bool(np.all(np.asarray(beta(r)) >= np.asarray(alpha(r))))


def strong_law(cert: BarrierCertificate, sigma: float, beta: KFunction | None = None,
               h_range: tuple[float, float] | None = None) -> StrongISSf:
    """Build the strong trigger for ``cert``; beta defaults to alpha.

    If ``h_range`` is given, beta >= alpha is sample-checked over it.
    """
    beta = cert.alpha if beta is None else beta
    if h_range is not None and not check_dominance(beta, cert.alpha, *h_range):
        raise ValueError("beta(r) >= alpha(r) fails on the sampled h range")
    return StrongISSf(iota=cert.iota, alpha=cert.alpha, beta=beta, sigma=sigma,
                      d=cert.strong_margin)


def scaled(f: KFunction, c: float) -> KFunction:
    """``c * f`` for linear f (the only case configs need); c >= 1 keeps beta >= alpha."""
    if not isinstance(f, Linear):
        raise ValueError("scaled beta is only supported for linear alpha")
    if c < 1:
        raise ValueError(f"beta scale c={c} must be >= 1")
    lo, hi = f.domain
    return Linear(slope=c * f.slope, domain=(lo, hi))


def miet_bound(law: StrongISSf, L_iota: float, F: float) -> float:
    """``tau = sigma * d / (L_iota * F)``."""
    if not (L_iota > 0 and F > 0 and law.d > 0):
        raise ValueError("L_iota, F and d must all be positive")
    return law.sigma * law.d / (L_iota * F)


def shift_certificate(cert: BarrierCertificate, b: float) -> BarrierCertificate:
    """``h_b = h + b`` with ``alpha_b`` and margin ``d_b = -alpha(-b)``; iota unchanged."""
    alpha_b, d_b = shift_transform(cert.alpha, b)
    h = cert.h

    def h_b(x):
        return h(x) + b

    return replace(cert, h=h_b, alpha=alpha_b, strong_margin=d_b, dynamics_bound=None)


def trigger_error_radius(law: TriggerLaw, value_fn, working_radius: float, dim: int,
                         grid: int = 41) -> float:
    """Largest |e| at which the residual can still be nonnegative over the working ball.

    Inverts the law's error gain at the maximum of ``rhs`` over the grid.
    """
    X = ball_grid(dim, working_radius, grid)
    vals = np.array([float(value_fn(x)) for x in X])
    norms = np.linalg.norm(X, axis=1)
    top = max(float(law.rhs(v, nx)) for v, nx in zip(vals, norms))
    if top <= 0:
        return 0.0
    return float(law.gain.inverse(top))
