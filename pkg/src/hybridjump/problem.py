"""Two-mode state-dependent switched optimal-control problems.

All user-supplied maps broadcast over leading axes: a state argument has
shape ``(..., n)``, a control ``(..., m)``, a co-state ``(..., n)`` and time
is either a scalar or an array of shape ``(...)``.  The oracle relies on
this to solve many grid cells in one batch.

Mode 1 is active while ``g(x, t) < 0`` and mode 2 once ``g(x, t) > 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Callable, Optional, Union

import numpy as np

from .errors import ContractViolation, StationarityFailure

Array = np.ndarray


class ModeId(IntEnum):
    BEFORE = 1
    AFTER = 2


class InterfaceKind(str, Enum):
    TIME_INVARIANT = "time-invariant"
    TIME_VARYING = "time-varying"


def _fd_step(x: Array) -> Array:
    return 1e-6 * np.maximum(1.0, np.max(np.abs(x), axis=-1, keepdims=True))


def central_jacobian(fun: Callable[[Array], Array], x: Array) -> Array:
    """Central-difference Jacobian of a vector map, shape ``(..., k, n)``."""
    x = np.asarray(x, dtype=float)
    h = _fd_step(x)
    n = x.shape[-1]
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        cols.append((fun(x + h * e) - fun(x - h * e)) / (2.0 * h))
    return np.stack(cols, axis=-1)


def central_gradient(fun: Callable[[Array], Array], x: Array) -> Array:
    """Central-difference gradient of a scalar map, shape ``(..., n)``."""
    x = np.asarray(x, dtype=float)
    h = _fd_step(x)
    n = x.shape[-1]
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        cols.append((fun(x + h * e) - fun(x - h * e)) / (2.0 * h[..., 0]))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class ModeDynamics:
    rhs: Callable[[Array, Array, Array], Array]
    jac_x: Optional[Callable[[Array, Array, Array], Array]] = None
    jac_u: Optional[Callable[[Array, Array, Array], Array]] = None

    def state_jacobian(self, x, u, t) -> Array:
        if self.jac_x is not None:
            return self.jac_x(x, u, t)
        return central_jacobian(lambda xx: self.rhs(xx, u, t), x)

    def control_jacobian(self, x, u, t) -> Array:
        if self.jac_u is not None:
            return self.jac_u(x, u, t)
        return central_jacobian(lambda uu: self.rhs(x, uu, t), u)


@dataclass(frozen=True)
class StageCost:
    value: Callable[[Array, Array, Array], Array]
    grad_x: Optional[Callable[[Array, Array, Array], Array]] = None
    grad_u: Optional[Callable[[Array, Array, Array], Array]] = None

    def state_gradient(self, x, u, t) -> Array:
        if self.grad_x is not None:
            return self.grad_x(x, u, t)
        return central_gradient(lambda xx: self.value(xx, u, t), x)

    def control_gradient(self, x, u, t) -> Array:
        if self.grad_u is not None:
            return self.grad_u(x, u, t)
        return central_gradient(lambda uu: self.value(x, uu, t), u)


@dataclass(frozen=True)
class SwitchingInterface:
    """Level set ``g(x, t) = 0`` separating the two modes.

    ``grad_x`` returns the spatial gradient ``m`` and ``dt`` the time partial
    ``mu``.  ``curve`` optionally parameterizes the planar slice
    ``{x : g(x, t) = 0}`` for ``n = 2``: ``curve(sigma, t, lo, hi)`` maps
    ``sigma`` in ``[0, 1]`` (arc-length uniform) to points and a validity mask
    for the box ``[lo, hi]``.  ``linear`` holds ``(normal, time_coeff, offset)``
    when ``g`` is affine.
    """

    g: Callable[[Array, Array], Array]
    grad_x: Callable[[Array, Array], Array]
    dt: Optional[Callable[[Array, Array], Array]] = None
    kind: InterfaceKind = InterfaceKind.TIME_INVARIANT
    name: str = ""
    curve: Optional[Callable] = None
    periodic: bool = False
    linear: Optional[tuple] = None

    def value(self, x, t) -> Array:
        return self.g(np.asarray(x, dtype=float), t)

    def normal(self, x, t) -> Array:
        return self.grad_x(np.asarray(x, dtype=float), t)

    def time_partial(self, x, t) -> Array:
        x = np.asarray(x, dtype=float)
        if self.dt is None or self.kind is InterfaceKind.TIME_INVARIANT:
            return np.zeros(x.shape[:-1])
        return np.broadcast_to(np.asarray(self.dt(x, t), dtype=float), x.shape[:-1]).copy()


def linear_interface(normal, time_coeff: float = 0.0, offset: float = 0.0, name: str = "") -> SwitchingInterface:
    """Affine interface ``normal . x + time_coeff * t + offset = 0``."""
    m = np.asarray(normal, dtype=float).ravel()
    mu = float(time_coeff)
    c = float(offset)
    if not np.any(m):
        raise ContractViolation("interface normal must be nonzero")

    def g(x, t):
        return x @ m + mu * np.asarray(t, dtype=float) + c

    def grad(x, t):
        return np.broadcast_to(m, np.shape(x)).copy()

    def dt(x, t):
        return np.full(np.shape(x)[:-1], mu)

    curve = None
    if m.size == 2:
        curve = _line_curve(m, mu, c)
    kind = InterfaceKind.TIME_VARYING if mu != 0.0 else InterfaceKind.TIME_INVARIANT
    return SwitchingInterface(
        g=g, grad_x=grad, dt=dt, kind=kind, name=name or "linear", curve=curve, linear=(m, mu, c)
    )


def circle_interface(center=(0.0, 0.0), radius: float = 1.0, name: str = "") -> SwitchingInterface:
    """Time-invariant circle ``|x - center|^2 - radius^2 = 0`` in the plane."""
    ctr = np.asarray(center, dtype=float).ravel()
    r = float(radius)
    if ctr.size != 2 or r <= 0:
        raise ContractViolation("circle interface needs a 2-d center and positive radius")

    def g(x, t):
        d = x - ctr
        return np.sum(d * d, axis=-1) - r * r

    def grad(x, t):
        return 2.0 * (x - ctr)

    def curve(sigma, t, lo, hi):
        theta = 2.0 * np.pi * np.asarray(sigma, dtype=float) - np.pi
        pts = np.stack([ctr[0] + r * np.cos(theta), ctr[1] + r * np.sin(theta)], axis=-1)
        valid = np.all((pts >= lo) & (pts <= hi), axis=-1)
        return pts, valid

    return SwitchingInterface(
        g=g, grad_x=grad, kind=InterfaceKind.TIME_INVARIANT, name=name or "circle", curve=curve, periodic=True
    )


def _line_curve(m, mu, c):
    nrm = float(np.linalg.norm(m))
    direction = np.array([-m[1], m[0]]) / nrm

    def curve(sigma, t, lo, hi):
        # foot point of the line m.x = -(mu t + c), then clip the chord to the box
        base = -(mu * float(t) + c) * m / nrm**2
        s_lo, s_hi = -np.inf, np.inf
        for k in range(2):
            if abs(direction[k]) < 1e-15:
                if not lo[k] <= base[k] <= hi[k]:
                    s_lo, s_hi = 1.0, 0.0
                continue
            a = (lo[k] - base[k]) / direction[k]
            b = (hi[k] - base[k]) / direction[k]
            s_lo, s_hi = max(s_lo, min(a, b)), min(s_hi, max(a, b))
        sig = np.asarray(sigma, dtype=float)
        if not s_hi > s_lo:
            return np.full(sig.shape + (2,), np.nan), np.zeros(sig.shape, dtype=bool)
        s = s_lo + sig * (s_hi - s_lo)
        pts = base + s[..., None] * direction
        return pts, np.ones(sig.shape, dtype=bool)

    return curve


@dataclass(frozen=True)
class FixedState:
    target: Array

    def __post_init__(self):
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float).ravel())


@dataclass(frozen=True)
class TerminalCost:
    phi: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    # point the straight-line guess aims at (the minimizer of phi when known)
    aim: Optional[Array] = None


TerminalCondition = Union[FixedState, TerminalCost]


@dataclass(frozen=True)
class AnalyticControl:
    """Closed-form stationary control ``u*(x, lam, t, mode)``."""

    law: Callable[[Array, Array, Array, ModeId], Array]


@dataclass(frozen=True)
class NewtonControl:
    """Solve dH/du = 0 by damped Newton from ``u = 0``."""

    max_iters: int = 50
    tol: float = 1e-8


ControlLaw = Union[AnalyticControl, NewtonControl]


@dataclass(frozen=True)
class SwitchedOCP:
    mode1: ModeDynamics
    mode2: ModeDynamics
    cost1: StageCost
    cost2: StageCost
    interface: SwitchingInterface
    x0: Array
    t0: float
    tf: float
    terminal: TerminalCondition
    control: ControlLaw
    n: int
    m_dim: int
    name: str = ""
    description: str = ""
    source: str = ""
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float).ravel()
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "tf", float(self.tf))
        if x0.size != self.n:
            raise ContractViolation(f"x0 has {x0.size} entries, expected n={self.n}")
        if not self.t0 < self.tf:
            raise ContractViolation(f"need t0 < tf, got t0={self.t0}, tf={self.tf}")
        if not float(self.interface.value(x0, self.t0)) < 0.0:
            raise ContractViolation("initial state must lie strictly in the mode-1 region (g(x0, t0) < 0)")
        if isinstance(self.terminal, FixedState):
            if self.terminal.target.size != self.n:
                raise ContractViolation("terminal state has the wrong dimension")
            if not float(self.interface.value(self.terminal.target, self.tf)) > 0.0:
                raise ContractViolation("terminal state must lie in the mode-2 region (g(xf, tf) > 0)")

    def dynamics(self, mode: ModeId) -> ModeDynamics:
        return self.mode1 if ModeId(mode) is ModeId.BEFORE else self.mode2

    def cost(self, mode: ModeId) -> StageCost:
        return self.cost1 if ModeId(mode) is ModeId.BEFORE else self.cost2

    @property
    def time_varying(self) -> bool:
        return self.interface.kind is InterfaceKind.TIME_VARYING

    def terminal_cost(self, x) -> Array:
        if isinstance(self.terminal, TerminalCost):
            return self.terminal.phi(np.asarray(x, dtype=float))
        return np.zeros(np.shape(x)[:-1])

    def target_guess(self) -> Array:
        """End point for straight-line initial guesses."""
        if isinstance(self.terminal, FixedState):
            return self.terminal.target
        if self.terminal.aim is not None:
            return np.asarray(self.terminal.aim, dtype=float)
        return self.x0


def _check(p: SwitchedOCP, x, lam=None, u=None):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (p.n,):
        raise ContractViolation(f"state has trailing dimension {x.shape[-1:]}, expected ({p.n},)")
    if lam is not None:
        lam = np.asarray(lam, dtype=float)
        if lam.shape[-1:] != (p.n,):
            raise ContractViolation(f"co-state has trailing dimension {lam.shape[-1:]}, expected ({p.n},)")
    if u is not None:
        u = np.asarray(u, dtype=float)
        if u.shape[-1:] != (p.m_dim,):
            raise ContractViolation(f"control has trailing dimension {u.shape[-1:]}, expected ({p.m_dim},)")
    return x, lam, u


def hamiltonian(p: SwitchedOCP, mode: ModeId, x, lam, u, t) -> Array:
    """``L_mode(x, u, t) + lam . f_mode(x, u, t)``."""
    x, lam, u = _check(p, x, lam, u)
    f = p.dynamics(mode).rhs(x, u, t)
    return p.cost(mode).value(x, u, t) + np.sum(lam * f, axis=-1)


def control_gradient(p: SwitchedOCP, mode: ModeId, x, lam, u, t) -> Array:
    """dH/du as an array of shape ``(..., m)``."""
    dyn, cost = p.dynamics(mode), p.cost(mode)
    if dyn.jac_u is not None and cost.grad_u is not None:
        fu = dyn.jac_u(x, u, t)
        return cost.grad_u(x, u, t) + np.einsum("...ji,...j->...i", fu, lam)
    return central_gradient(lambda uu: hamiltonian(p, mode, x, lam, uu, t), u)


def stationarity_residual(p: SwitchedOCP, mode: ModeId, x, lam, u, t) -> Array:
    """Infinity norm of dH/du per leading index."""
    x, lam, u = _check(p, x, lam, u)
    return np.max(np.abs(control_gradient(p, mode, x, lam, u, t)), axis=-1)


def optimal_control(p: SwitchedOCP, mode: ModeId, x, lam, t) -> Array:
    """Stationary control ``u*`` with dH/du = 0."""
    x, lam, _ = _check(p, x, lam)
    if isinstance(p.control, AnalyticControl):
        return np.asarray(p.control.law(x, lam, t, ModeId(mode)), dtype=float)
    return _newton_control(p, mode, x, lam, t, p.control)


def _newton_control(p, mode, x, lam, t, law: NewtonControl) -> Array:
    lead = np.broadcast_shapes(x.shape[:-1], lam.shape[:-1], np.shape(t))
    x = np.broadcast_to(x, lead + (p.n,))
    lam = np.broadcast_to(lam, lead + (p.n,))
    t = np.broadcast_to(np.asarray(t, dtype=float), lead)
    u = np.zeros(lead + (p.m_dim,))

    def grad(uu):
        return control_gradient(p, mode, x, lam, uu, t)

    g = grad(u)
    res = np.max(np.abs(g), axis=-1) if g.size else np.zeros(lead)
    for _ in range(law.max_iters):
        if np.all(res <= law.tol):
            return u
        hess = central_jacobian(grad, u)
        hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
        try:
            step = np.linalg.solve(hess, g[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = g
        alpha = np.ones(lead)
        active = res > law.tol
        for _ in range(30):
            trial = u - np.where(active[..., None], alpha[..., None] * step, 0.0)
            g_trial = grad(trial)
            r_trial = np.max(np.abs(g_trial), axis=-1)
            bad = active & ~(r_trial < res)
            if not np.any(bad):
                break
            alpha = np.where(bad, 0.5 * alpha, alpha)
        u, g, res = trial, g_trial, r_trial
    if np.all(res <= law.tol):
        return u
    raise StationarityFailure(
        f"Newton on dH/du did not converge in {law.max_iters} iterations (residual {np.max(res):.3e})",
        last_iterate=u,
        residual=res,
    )


def costate_rhs(p: SwitchedOCP, mode: ModeId, x, lam, t) -> Array:
    """``-(dL/dx) - (df/dx)^T lam`` evaluated at the stationary control."""
    x, lam, _ = _check(p, x, lam)
    u = optimal_control(p, mode, x, lam, t)
    return _costate_rhs_at(p, mode, x, lam, u, t)


def _costate_rhs_at(p, mode, x, lam, u, t):
    dyn, cost = p.dynamics(mode), p.cost(mode)
    fx = dyn.state_jacobian(x, u, t)
    lx = cost.state_gradient(x, u, t)
    return -lx - np.einsum("...ji,...j->...i", fx, lam)


def state_costate_rhs(p: SwitchedOCP, mode: ModeId, with_cost: bool = False):
    """Right-hand side of the stacked ``(x, lam)`` system with ``u`` eliminated.

    With ``with_cost`` a running-cost accumulator is appended as a last
    component, so ``y`` has ``2n + 1`` entries.
    """
    n = p.n
    dyn, cost = p.dynamics(mode), p.cost(mode)

    def rhs(y, t):
        x = y[..., :n]
        lam = y[..., n : 2 * n]
        u = optimal_control(p, mode, x, lam, t)
        parts = [dyn.rhs(x, u, t), _costate_rhs_at(p, mode, x, lam, u, t)]
        if with_cost:
            parts.append(np.asarray(cost.value(x, u, t))[..., None])
        return np.concatenate(parts, axis=-1)

    return rhs
