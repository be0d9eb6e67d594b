"""Class-K and extended class-K scalar functions.

Every gain that appears in a certificate or trigger law (decay rates,
error gains, tuning functions) is a :class:`KFunction`.  Instances are
immutable, evaluate elementwise on scalars or numpy arrays, and round-trip
through plain dicts for the JSON config files.

Membership in class K is never proven here, only falsified by dense
sampling (:func:`validate_k`).
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Any

import numpy as np
from scipy.optimize import brentq

INF = math.inf
EXTENDED = (-INF, INF)
NONNEGATIVE = (0.0, INF)


class DomainError(ValueError):
    """Argument outside the interval on which a function is defined."""


@dataclass(frozen=True)
class KFunction:
    """Base class.  Subclasses implement ``_eval`` on float arrays."""

    domain: tuple[float, float] = field(default=EXTENDED, kw_only=True)
    lipschitz_constant: float | None = field(default=None, kw_only=True)

    def __post_init__(self):
        lo, hi = self.domain
        if not lo <= 0.0 <= hi or lo == hi:
            raise ValueError(f"domain {self.domain} must contain 0 in a nondegenerate interval")
        if self.lipschitz_constant is not None and self.lipschitz_constant < 0:
            raise ValueError("lipschitz_constant must be nonnegative")

    @property
    def extended(self) -> bool:
        return self.domain[0] < 0.0

    def __call__(self, r):
        if type(r) is float:
            lo, hi = self.domain
            if not lo <= r <= hi:
                raise DomainError(f"argument {r} outside domain {self.domain}")
            return self._scalar(r)
        return eval_k(self, r)

    def _scalar(self, r: float) -> float:
        return float(self._eval(np.float64(r)))

    def _eval(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inverse(self, y: float) -> float:
        """Solve ``f(r) = y`` for r, expanding the bracket geometrically."""
        if y == 0.0:
            return 0.0
        lo, hi = self.domain
        step = 1.0
        a, b = 0.0, 0.0
        if y > 0:
            while True:
                b = min(step, hi)
                if self(b) >= y:
                    break
                if b == hi or step > 1e300:
                    raise DomainError(f"{y} is outside the range of {self!r}")
                a, step = b, step * 2.0
        else:
            while True:
                a = max(-step, lo)
                if self(a) <= y:
                    break
                if a == lo or step > 1e300:
                    raise DomainError(f"{y} is outside the range of {self!r}")
                b, step = a, step * 2.0
        return brentq(lambda r: float(self(r)) - y, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Linear(KFunction):
    slope: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if not self.slope > 0:
            raise ValueError("slope must be positive")
        if self.lipschitz_constant is None:
            object.__setattr__(self, "lipschitz_constant", float(self.slope))

    def _eval(self, r):
        return self.slope * r

    def _scalar(self, r):
        return self.slope * r

    def inverse(self, y: float) -> float:
        return y / self.slope

    def to_dict(self):
        return {"kind": "linear", "slope": self.slope, **_common(self)}


@dataclass(frozen=True)
class Power(KFunction):
    """``coefficient * sign(r) * |r|**exponent`` (odd extension to r < 0)."""

    coefficient: float = 1.0
    exponent: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if not (self.coefficient > 0 and self.exponent > 0):
            raise ValueError("coefficient and exponent must be positive")
        if self.lipschitz_constant is None and self.exponent == 1.0:
            object.__setattr__(self, "lipschitz_constant", float(self.coefficient))

    def _eval(self, r):
        return self.coefficient * np.sign(r) * np.abs(r) ** self.exponent

    def _scalar(self, r):
        return math.copysign(self.coefficient * abs(r) ** self.exponent, r) if r else 0.0

    def to_dict(self):
        return {"kind": "power", "coefficient": self.coefficient,
                "exponent": self.exponent, **_common(self)}


@dataclass(frozen=True)
class Tabulated(KFunction):
    """Piecewise-linear interpolation through ``points`` (sorted by abscissa)."""

    points: tuple[tuple[float, float], ...] = ()
    domain: tuple[float, float] = field(default=None, kw_only=True)

    def __post_init__(self):
        pts = tuple(sorted((float(a), float(b)) for a, b in self.points))
        if len(pts) < 2:
            raise ValueError("need at least two points")
        if len({a for a, _ in pts}) != len(pts):
            raise ValueError("abscissae must be distinct")
        object.__setattr__(self, "points", pts)
        if self.domain is None:
            object.__setattr__(self, "domain", (pts[0][0], pts[-1][0]))
        super().__post_init__()

    def _eval(self, r):
        xs, ys = zip(*self.points)
        return np.interp(r, xs, ys)

    def to_dict(self):
        return {"kind": "tabulated", "points": [list(p) for p in self.points],
                **_common(self)}


@dataclass(frozen=True)
class Composite(KFunction):
    """``base(r - shift) - base(-shift)``: the superset shift of ``base``."""

    base: KFunction = None
    shift: float = 0.0
    domain: tuple[float, float] = field(default=None, kw_only=True)

    def __post_init__(self):
        lo, hi = self.base.domain
        if self.domain is None:
            object.__setattr__(self, "domain", (lo + self.shift, hi + self.shift))
        if self.lipschitz_constant is None:
            object.__setattr__(self, "lipschitz_constant", self.base.lipschitz_constant)
        super().__post_init__()

    def _eval(self, r):
        return self.base._eval(r - self.shift) - self.base._eval(np.float64(-self.shift))

    def to_dict(self):
        return {"kind": "composite", "base": self.base.to_dict(), "shift": self.shift,
                **_common(self)}


def _common(f: KFunction) -> dict[str, Any]:
    out: dict[str, Any] = {"domain": [_enc(f.domain[0]), _enc(f.domain[1])]}
    if f.lipschitz_constant is not None:
        out["lipschitz_constant"] = f.lipschitz_constant
    return out


def _enc(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _dec(v) -> float:
    return float(v)  # float("inf") / float("-inf") parse the encoded strings


def from_dict(d: dict[str, Any]) -> KFunction:
    """Inverse of ``KFunction.to_dict``; raises ValueError on unknown kinds."""
    d = dict(d)
    kind = d.pop("kind", None)
    kw: dict[str, Any] = {}
    if "domain" in d:
        lo, hi = d.pop("domain")
        kw["domain"] = (_dec(lo), _dec(hi))
    if "lipschitz_constant" in d:
        kw["lipschitz_constant"] = float(d.pop("lipschitz_constant"))
    if kind == "linear":
        return Linear(slope=float(d.pop("slope", 1.0)), **kw)
    if kind == "power":
        return Power(coefficient=float(d.pop("coefficient", 1.0)),
                     exponent=float(d.pop("exponent", 1.0)), **kw)
    if kind == "tabulated":
        return Tabulated(points=tuple(tuple(p) for p in d.pop("points")), **kw)
    if kind == "composite":
        return Composite(base=from_dict(d.pop("base")), shift=float(d.pop("shift")), **kw)
    raise ValueError(f"unknown KFunction kind {kind!r}")


def eval_k(f: KFunction, r):
    """Evaluate ``f`` at scalar or array ``r``; raise DomainError outside ``f.domain``."""
    arr = np.asarray(r, dtype=float)
    lo, hi = f.domain
    if np.any(arr < lo) or np.any(arr > hi) or np.any(np.isnan(arr)):
        raise DomainError(f"argument outside domain {f.domain}")
    out = f._eval(arr)
    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass
class KValidation:
    passed: bool
    zero_ok: bool
    monotone_ok: bool
    lipschitz_ok: bool | None
    violation: tuple[float, float] | None = None
    message: str = ""


def sample_grid(f: KFunction, samples: int = 1000, span: float = 10.0) -> np.ndarray:
    """Uniform samples over ``f.domain`` with infinite ends clipped to +-span.

    Tabulated breakpoints are merged in so that kinks are always probed.
    """
    lo, hi = f.domain
    lo = max(lo, -span)
    hi = min(hi, span)
    r = np.linspace(lo, hi, samples)
    if isinstance(f, Tabulated):
        knots = [a for a, _ in f.points if lo <= a <= hi]
        r = np.union1d(r, knots)
    return r


def validate_k(f: KFunction, samples: int = 1000, span: float = 10.0) -> KValidation:
    """Sampled check of f(0)=0, strict monotonicity and the Lipschitz constant.

    On a monotonicity failure ``violation`` holds the endpoints of the first
    maximal run of samples over which f fails to increase.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    r = sample_grid(f, samples, span)
    v = np.asarray(f(r), dtype=float)
    zero_ok = float(f(0.0)) == 0.0
    dv = np.diff(v)
    bad = np.flatnonzero(~(dv > 0))
    monotone_ok = bad.size == 0
    violation = None
    msgs = []
    if not zero_ok:
        msgs.append(f"f(0) = {float(f(0.0))!r}")
    if not monotone_ok:
        i = j = int(bad[0])
        while j + 1 < dv.size and not dv[j + 1] > 0:
            j += 1
        violation = (float(r[i]), float(r[j + 1]))
        msgs.append(f"not increasing on [{violation[0]}, {violation[1]}]")
    lipschitz_ok = None
    if f.lipschitz_constant is not None:
        slope = np.abs(dv) / np.diff(r)
        over = np.flatnonzero(slope > f.lipschitz_constant * (1 + 1e-9) + 1e-12)
        lipschitz_ok = over.size == 0
        if not lipschitz_ok:
            k = int(over[0])
            if violation is None:
                violation = (float(r[k]), float(r[k + 1]))
            msgs.append(f"slope {slope[k]:.6g} exceeds L={f.lipschitz_constant}")
    passed = zero_ok and monotone_ok and lipschitz_ok is not False
    return KValidation(passed, zero_ok, monotone_ok, lipschitz_ok, violation, "; ".join(msgs))


def shift_transform(alpha: KFunction, b: float) -> tuple[KFunction, float]:
    """Return ``(alpha_b, d_b)`` with alpha_b(r) = alpha(r-b) - alpha(-b), d_b = -alpha(-b).

    Linear inputs map to themselves (the shift cancels exactly), so the
    result stays exact in floating point.
    """
    if not b > 0:
        raise ValueError(f"shift b must be positive, got {b}")
    if alpha.domain[0] > -b:
        raise DomainError(f"-b = {-b} lies outside alpha's domain {alpha.domain}")
    d_b = -float(alpha(-b))
    if isinstance(alpha, Linear) or (isinstance(alpha, Power) and alpha.exponent == 1.0):
        lo, hi = alpha.domain
        return type(alpha)(**{k: getattr(alpha, k) for k in _fields(alpha)},
                           domain=(lo + b, hi + b),
                           lipschitz_constant=alpha.lipschitz_constant), d_b
    return Composite(base=alpha, shift=float(b)), d_b


def _fields(f: KFunction) -> list[str]:
    return ["slope"] if isinstance(f, Linear) else ["coefficient", "exponent"]
