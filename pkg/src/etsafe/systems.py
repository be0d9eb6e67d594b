"""Control systems, barrier / ISS-Lyapunov certificates and the builtin examples."""
from __future__ import annotations

from dataclasses import dataclass, replace
import itertools
from typing import Callable

import numpy as np

from .classk import KFunction, Linear, Power

Array = np.ndarray


class EvaluationError(ArithmeticError):
    """Dynamics or controller produced a non-finite value."""


@dataclass(frozen=True)
class ControlSystem:
    """``x' = dynamics(x, u)`` under state feedback ``u = controller(x)``.

    With ``vectorized=True`` both maps must broadcast over leading axes
    (x of shape ``(..., n)``, u of shape ``(..., m)``).
    """

    state_dim: int
    input_dim: int
    dynamics: Callable[[Array, Array], Array]
    controller: Callable[[Array], Array]
    name: str = "custom"
    vectorized: bool = False

    def __post_init__(self):
        if self.state_dim < 1 or self.input_dim < 1:
            raise ValueError("state_dim and input_dim must be positive")

    def closed_loop(self, x, e=None):
        """``f(x, k(x + e))``."""
        x = np.asarray(x, dtype=float)
        xe = x if e is None else x + np.asarray(e, dtype=float)
        return np.asarray(self.dynamics(x, np.asarray(self.controller(xe), dtype=float)),
                          dtype=float)


def numerical_gradient(fun: Callable[[Array], float], x) -> Array:
    """Central differences with step 1e-6 * (1 + |x|)."""
    x = np.asarray(x, dtype=float)
    step = 1e-6 * (1.0 + np.linalg.norm(x))
    g = np.empty_like(x)
    for i in range(x.size):
        dx = np.zeros_like(x)
        dx[i] = step
        g[i] = (fun(x + dx) - fun(x - dx)) / (2 * step)
    return g


@dataclass(frozen=True)
class BarrierCertificate:
    """ISSf barrier function h with gains alpha (extended K_inf) and iota (K_inf).

    ``strong_margin`` > 0 asserts the strong ISSf barrier property
    ``dh >= -alpha(h) + d - iota(|e|)``.  ``dynamics_bound`` is the uniform
    bound F on ``|f(x, k(x+e))|`` and stays None until computed or supplied.
    """

    h: Callable[[Array], float]
    alpha: KFunction
    iota: KFunction
    grad_h: Callable[[Array], Array] | None = None
    strong_margin: float = 0.0
    dynamics_bound: float | None = None
    witness: Array | None = None

    def __post_init__(self):
        if self.strong_margin < 0:
            raise ValueError("strong_margin must be nonnegative")
        if self.dynamics_bound is not None and not self.dynamics_bound > 0:
            raise ValueError("dynamics_bound must be positive")
        if self.iota.lipschitz_constant is None:
            raise ValueError("iota needs a Lipschitz constant")
        if self.witness is not None and not self.h(np.asarray(self.witness, dtype=float)) >= 0:
            raise ValueError("witness point is not in the safe set")

    def gradient(self, x) -> Array:
        if self.grad_h is not None:
            return np.asarray(self.grad_h(x), dtype=float)
        return numerical_gradient(self.h, x)

    def value(self, x) -> float:
        return float(self.h(x))

    def with_bound(self, F: float) -> "BarrierCertificate":
        return replace(self, dynamics_bound=float(F))


@dataclass(frozen=True)
class IssLfCertificate:
    """ISS Lyapunov function V: ``dV <= -alpha3(|x|) + gamma(|e|)``."""

    V: Callable[[Array], float]
    alpha1: KFunction
    alpha2: KFunction
    alpha3: KFunction
    gamma: KFunction
    grad_V: Callable[[Array], Array] | None = None

    def gradient(self, x) -> Array:
        if self.grad_V is not None:
            return np.asarray(self.grad_V(x), dtype=float)
        return numerical_gradient(self.V, x)

    def value(self, x) -> float:
        return float(self.V(x))


def counterexample_system(r: float = 1.2) -> tuple[ControlSystem, BarrierCertificate]:
    """Planar system ``x' = J x + x u`` kept inside the unit disk by ``k = h/2``.

    ``J`` rotates clockwise.  Along the held closed loop
    ``dh = -|x|^2 h(x + e) >= -h(x) - 2 r^3 |e|`` for ``|x| <= r``, so h is
    an ISSf-BF with alpha = identity and iota(s) = 2 r^3 s.
    """
    if not r > 1:
        raise ValueError(f"r must exceed 1, got {r}")

    def dynamics(x, u):
        if x.ndim == 1:
            x1, x2 = x
            v = u[0]
            return np.array([x2 + x1 * v, -x1 + x2 * v])
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)[..., 0]
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([x2 + x1 * u, -x1 + x2 * u], axis=-1)

    def controller(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (1.0 - np.sum(x * x, axis=-1, keepdims=True))

    def h(x):
        x = np.asarray(x, dtype=float)
        return 1.0 - np.sum(x * x, axis=-1)

    def grad_h(x):
        return -2.0 * np.asarray(x, dtype=float)

    sys = ControlSystem(2, 1, dynamics, controller, name="counterexample", vectorized=True)
    L = 2.0 * r**3
    cert = BarrierCertificate(
        h=h, grad_h=grad_h,
        alpha=Linear(1.0),
        iota=Power(coefficient=L, exponent=1.0, domain=(0.0, np.inf)),
        witness=np.zeros(2),
    )
    return sys, cert


def scalar_stabilization_demo() -> tuple[ControlSystem, IssLfCertificate]:
    """``x' = u``, ``k(x) = -x``, ``V = x^2/2``.

    ``dV = x(-x - e) <= -x^2/2 + e^2/2`` (Young), hence alpha3 = gamma = s^2/2.
    """

    def dynamics(x, u):
        return np.asarray(u, dtype=float) * np.ones_like(np.asarray(x, dtype=float))

    def controller(x):
        return -np.asarray(x, dtype=float)

    def V(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.sum(x * x, axis=-1)

    half_sq = Power(coefficient=0.5, exponent=2.0, domain=(0.0, np.inf))
    sys = ControlSystem(1, 1, dynamics, controller, name="scalar_demo", vectorized=True)
    cert = IssLfCertificate(
        V=V, grad_V=lambda x: np.asarray(x, dtype=float),
        alpha1=Power(coefficient=0.25, exponent=2.0, domain=(0.0, np.inf)),
        alpha2=Power(coefficient=1.0, exponent=2.0, domain=(0.0, np.inf)),
        alpha3=half_sq, gamma=half_sq,
    )
    return sys, cert


BUILTINS = {
    "counterexample": counterexample_system,
    "scalar_demo": scalar_stabilization_demo,
}


def ball_grid(dim: int, radius: float, grid: int) -> Array:
    """Points of the regular ``grid**dim`` lattice on [-R, R]^dim inside the closed R-ball."""
    if grid < 2:
        raise ValueError("grid must be >= 2")
    if radius == 0:
        return np.zeros((1, dim))
    axis = np.linspace(-radius, radius, grid)
    pts = np.array(list(itertools.product(axis, repeat=dim)))
    keep = np.linalg.norm(pts, axis=1) <= radius * (1 + 1e-12)
    return pts[keep]


def bound_dynamics(sys: ControlSystem, cert, working_radius: float, error_radius: float,
                   grid: int = 41, safety_factor: float = 1.1) -> float:
    """Grid estimate of ``F >= |f(x, k(x+e))|`` over |x| <= working_radius, |e| <= error_radius.

    The grid maximum is inflated by ``safety_factor``.  Returns F; use
    ``cert.with_bound(F)`` to attach it (certificates are immutable).
    """
    n = sys.state_dim
    X = ball_grid(n, working_radius, grid)
    E = ball_grid(n, error_radius, grid)
    best = 0.0
    if sys.vectorized:
        chunk = max(1, 200_000 // len(E))
        for s in range(0, len(X), chunk):
            xs = X[s:s + chunk, None, :]
            xx = np.broadcast_to(xs, (xs.shape[0], len(E), n))
            ee = np.broadcast_to(E[None], xx.shape)
            vals = np.linalg.norm(sys.closed_loop(xx, ee), axis=-1)
            if not np.all(np.isfinite(vals)):
                raise EvaluationError("non-finite dynamics value on grid")
            best = max(best, float(vals.max()))
    else:
        for x in X:
            for e in E:
                v = float(np.linalg.norm(sys.closed_loop(x, e)))
                if not np.isfinite(v):
                    raise EvaluationError(f"non-finite dynamics at x={x}, e={e}")
                best = max(best, v)
    F = safety_factor * best
    if not F > 0:
        raise ValueError("dynamics vanish on the whole grid; no positive bound F")
    return F


def certify_barrier_inequality(sys: ControlSystem, cert: BarrierCertificate, x, e) -> float:
    """Residual ``dh/dx f(x, k(x+e)) + alpha(h) - d + iota(|e|)``; >= 0 iff the inequality holds."""
    x = np.asarray(x, dtype=float)
    e = np.asarray(e, dtype=float)
    hdot = float(cert.gradient(x) @ sys.closed_loop(x, e))
    return (hdot + float(cert.alpha(cert.value(x))) - cert.strong_margin
            + float(cert.iota(float(np.linalg.norm(e)))))
