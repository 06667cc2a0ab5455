"""Two-phase boundary value problem at a fixed switching time, by multiple shooting.

Unknowns are the stacked ``(x, lam)`` values at the start of every shooting
segment (``S`` segments per phase).  Residuals are segment continuity plus
``4n`` boundary conditions: initial state, terminal condition, state
continuity at the switch, and one of two switch-condition sets:

* ``Formulation.INTERFACE`` imposes the full co-state jump law and leaves
  ``g(x(tau), tau)`` to the outer switching-time iteration;
* ``Formulation.JUMP_MAGNITUDE`` imposes ``g(x(tau), tau) = 0`` and the
  ``n - 1`` tangential components of the jump, leaving the mismatch of the
  jump magnitude along ``m`` to the outer iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np

from .errors import (
    BvpDiverged,
    ContractViolation,
    NumericalBlowup,
    SingularJacobian,
    StationarityFailure,
    StepBudgetExceeded,
    TangentialCrossing,
)
from .integrate import IntegratorConfig, OdeTrajectory, propagate
from .jump import SwitchPointData, compute_jump, hamiltonian_gap, switch_point_data
from .problem import FixedState, ModeId, SwitchedOCP, optimal_control, state_costate_rhs

_RECOVERABLE = (NumericalBlowup, StepBudgetExceeded, StationarityFailure, TangentialCrossing, FloatingPointError)


class Formulation(str, Enum):
    JUMP_MAGNITUDE = "jump-magnitude"
    INTERFACE = "interface"


@dataclass(frozen=True)
class ShootingConfig:
    segments_per_phase: int = 8
    newton_tol: float = 1e-9
    max_newton_iters: int = 60
    fd_jacobian_step: float = 1e-7
    max_halvings: int = 12
    max_condition: float = 1e14
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __post_init__(self):
        if self.segments_per_phase < 2:
            raise ContractViolation("segments_per_phase must be >= 2")
        if min(self.newton_tol, self.fd_jacobian_step, self.max_condition) <= 0 or self.max_newton_iters < 1:
            raise ContractViolation("shooting settings must be positive")


@dataclass(frozen=True)
class BvpGuess:
    """Node values of shape ``(2, S, 2n)``: phase, segment, stacked (x, lam)."""

    nodes: np.ndarray
    strategy: str = "linear"

    @classmethod
    def linear(cls, p: SwitchedOCP, tau: float, segments: int = 8) -> "BvpGuess":
        """Straight line from ``x0`` to the terminal target, zero co-state."""
        target = p.target_guess()
        nodes = np.zeros((2, segments, 2 * p.n))
        for phase, times in enumerate(node_times(p, tau, segments)):
            frac = (times - p.t0) / (p.tf - p.t0)
            nodes[phase, :, : p.n] = p.x0 + frac[:, None] * (target - p.x0)
        return cls(nodes, "linear")

    @classmethod
    def warm_start(cls, sol: "TwoPhaseSolution") -> "BvpGuess":
        return cls(np.array(sol.nodes), "warm-start")


@dataclass(frozen=True)
class TwoPhaseSolution:
    """Converged two-phase extremal at a fixed switching time.

    ``phase1``/``phase2`` hold stacked ``(x, lam)`` samples with derivatives
    for Hermite evaluation; ``u1``/``u2`` are the controls at those samples.
    ``hamiltonian_gap`` is augmented by the time co-state jump for moving
    interfaces.
    """

    tau: float
    formulation: Formulation
    phase1: OdeTrajectory
    phase2: OdeTrajectory
    u1: np.ndarray
    u2: np.ndarray
    x_switch: np.ndarray
    lambda_minus: np.ndarray
    lambda_plus: np.ndarray
    cost_J: float
    hamiltonian_gap: float
    newton_iters: int
    residual_norm: float
    nodes: np.ndarray
    newton_trace: tuple = ()
    x_switch_plus: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.x_switch.size

    @property
    def delta_lambda(self) -> np.ndarray:
        return self.lambda_plus - self.lambda_minus

    def x(self, phase: int) -> np.ndarray:
        traj = self.phase1 if phase == 1 else self.phase2
        return traj.values[:, : self.n]

    def lam(self, phase: int) -> np.ndarray:
        traj = self.phase1 if phase == 1 else self.phase2
        return traj.values[:, self.n :]

    def switch_data(self, p: SwitchedOCP) -> SwitchPointData:
        return switch_point_data(p, self.x_switch, self.tau, self.lambda_minus, self.lambda_plus)


def node_times(p: SwitchedOCP, tau: float, segments: int) -> tuple[np.ndarray, np.ndarray]:
    """Segment start times of both phases."""
    frac = np.arange(segments) / segments
    return p.t0 + frac * (tau - p.t0), tau + frac * (p.tf - tau)


def _segment_bounds(p, tau, segments):
    grid1 = p.t0 + np.arange(segments + 1) / segments * (tau - p.t0)
    grid2 = tau + np.arange(segments + 1) / segments * (p.tf - tau)
    grid1[-1] = tau
    grid2[-1] = p.tf
    t_a = np.concatenate([grid1[:-1], grid2[:-1]])
    t_b = np.concatenate([grid1[1:], grid2[1:]])
    return t_a, t_b


def condition_count(p: SwitchedOCP, form: Formulation) -> int:
    """Number of imposed boundary/interior conditions (excluding segment continuity)."""
    n = p.n
    switch = n if Formulation(form) is Formulation.INTERFACE else 1 + (n - 1)
    return 3 * n + switch


class _Shooter:
    """Residual and Jacobian evaluation for one (problem, tau, formulation)."""

    def __init__(self, p: SwitchedOCP, tau: float, form: Formulation, cfg: ShootingConfig):
        self.p, self.tau, self.form, self.cfg = p, float(tau), Formulation(form), cfg
        self.S = cfg.segments_per_phase
        self.n = p.n
        self.t_a, self.t_b = _segment_bounds(p, tau, self.S)
        self.phase_of_row = np.repeat([0, 1], self.S)
        self._rhs = (state_costate_rhs(p, ModeId.BEFORE), state_costate_rhs(p, ModeId.AFTER))
        self.pivot = 0

    def rhs_for(self, phase_rows):
        first = phase_rows == 0
        rhs1, rhs2 = self._rhs

        def rhs(y, t):
            out = np.empty_like(y)
            if np.any(first):
                out[first] = rhs1(y[first], t[first])
            if not np.all(first):
                out[~first] = rhs2(y[~first], t[~first])
            return out

        return rhs

    def propagate_rows(self, starts, rows, schedule=None, record=False):
        # overflow surfaces as NumericalBlowup; the float warnings are noise
        with np.errstate(over="ignore", invalid="ignore"):
            return self._propagate(starts, rows, schedule, record)

    def _propagate(self, starts, rows, schedule, record):
        return propagate(
            self.rhs_for(self.phase_of_row[rows]),
            starts,
            self.t_a[rows],
            self.t_b[rows],
            self.cfg.integrator,
            schedule=schedule,
            record=record,
        )

    def choose_pivot(self, nodes, ends):
        m = self.p.interface.normal(ends[0, -1, : self.n], self.tau)
        self.pivot = int(np.argmax(np.abs(m)))

    def assemble(self, nodes, ends) -> np.ndarray:
        p, n, tau = self.p, self.n, self.tau
        x_s, lam_m = ends[0, -1, :n], ends[0, -1, n:]
        x_plus, lam_p = nodes[1, 0, :n], nodes[1, 0, n:]
        parts = [
            (ends[0, :-1] - nodes[0, 1:]).ravel(),
            (ends[1, :-1] - nodes[1, 1:]).ravel(),
            nodes[0, 0, :n] - p.x0,
        ]
        y_end = ends[1, -1]
        if isinstance(p.terminal, FixedState):
            parts.append(y_end[:n] - p.terminal.target)
        else:
            parts.append(y_end[n:] - p.terminal.grad(y_end[:n]))
        parts.append(x_plus - x_s)
        if self.form is Formulation.INTERFACE:
            d = switch_point_data(p, x_s, tau, lam_m, lam_p)
            parts.append(lam_p - lam_m - compute_jump(d).delta_lambda)
        else:
            m = p.interface.normal(x_s, tau)
            k = self.pivot
            dl = lam_p - lam_m
            tang = [dl[j] * m[k] - dl[k] * m[j] for j in range(n) if j != k]
            parts.append(np.array([float(p.interface.value(x_s, tau))] + tang))
        return np.concatenate(parts)

    def residual(self, z, schedule=None):
        nodes = z.reshape(2, self.S, 2 * self.n)
        out = self.propagate_rows(nodes.reshape(-1, 2 * self.n), np.arange(2 * self.S), schedule=schedule)
        ends = out.y_end.reshape(nodes.shape)
        return self.assemble(nodes, ends), out.nodes

    def jacobian(self, z):
        """Forward-difference Jacobian; every perturbed segment is re-integrated in one batch."""
        S2, k = 2 * self.S, 2 * self.n
        nodes = z.reshape(2, self.S, k)
        base = nodes.reshape(S2, k)
        steps = self.cfg.fd_jacobian_step * (1.0 + np.abs(z))
        pert = np.repeat(base, k, axis=0)
        pert[np.arange(S2 * k), np.tile(np.arange(k), S2)] += steps
        rows = np.concatenate([np.arange(S2), np.repeat(np.arange(S2), k)])
        out = self.propagate_rows(np.concatenate([base, pert]), rows)
        ends0 = out.y_end[:S2].reshape(nodes.shape)
        self.choose_pivot(nodes, ends0)
        r0 = self.assemble(nodes, ends0)
        J = np.empty((r0.size, z.size))
        for j in range(z.size):
            seg = j // k
            nodes_j = z.copy()
            nodes_j[j] += steps[j]
            ends_j = ends0.reshape(S2, k).copy()
            ends_j[seg] = out.y_end[S2 + j]
            J[:, j] = (self.assemble(nodes_j.reshape(nodes.shape), ends_j.reshape(nodes.shape)) - r0) / steps[j]
        return J, r0, out.nodes


def solve_two_phase(
    p: SwitchedOCP,
    tau: float,
    form: Formulation = Formulation.JUMP_MAGNITUDE,
    cfg: ShootingConfig = ShootingConfig(),
    guess: Optional[BvpGuess] = None,
) -> TwoPhaseSolution:
    """Solve the two-phase extremal problem for a fixed switching time ``tau``."""
    tau = float(tau)
    if not p.t0 < tau < p.tf:
        raise ContractViolation(f"switching time {tau} outside ({p.t0}, {p.tf})")
    S = cfg.segments_per_phase
    if guess is None:
        guess = BvpGuess.linear(p, tau, S)
    if guess.nodes.shape != (2, S, 2 * p.n):
        raise ContractViolation(f"guess has shape {guess.nodes.shape}, expected {(2, S, 2 * p.n)}")
    shooter = _Shooter(p, tau, form, cfg)
    z = np.array(guess.nodes, dtype=float).ravel()
    trace: list[float] = []
    iters = 0
    while True:
        try:
            J, r0, schedule = shooter.jacobian(z)
        except _RECOVERABLE as exc:
            raise BvpDiverged(f"residual evaluation failed at tau={tau:.6g}: {exc}", trace) from exc
        norm = float(np.max(np.abs(r0)))
        trace.append(norm)
        if not np.isfinite(norm):
            raise BvpDiverged(f"non-finite shooting residual at tau={tau:.6g}", trace)
        if norm <= cfg.newton_tol:
            break
        if iters >= cfg.max_newton_iters:
            raise BvpDiverged(f"no convergence in {cfg.max_newton_iters} Newton iterations (|r|={norm:.3e})", trace)
        cond = np.linalg.cond(J)
        if not cond <= cfg.max_condition:
            raise SingularJacobian(f"shooting Jacobian condition estimate {cond:.3e}", condition=float(cond))
        dz = np.linalg.solve(J, r0)
        alpha = 1.0
        for _ in range(cfg.max_halvings + 1):
            z_try = z - alpha * dz
            try:
                r_try, _ = shooter.residual(z_try, schedule)
                ok = float(np.max(np.abs(r_try))) < norm
            except _RECOVERABLE:
                ok = False
            if ok:
                break
            alpha *= 0.5
        else:
            raise BvpDiverged(f"line search failed at |r|={norm:.3e} (tau={tau:.6g})", trace)
        z = z_try
        iters += 1
    return _finish(p, shooter, z, iters, trace)


def _finish(p, shooter, z, iters, trace) -> TwoPhaseSolution:
    n, S, tau = p.n, shooter.S, shooter.tau
    nodes = z.reshape(2, S, 2 * n)
    out = shooter.propagate_rows(nodes.reshape(-1, 2 * n), np.arange(2 * S), record=True)
    phases = []
    for phase in range(2):
        times, vals, ders = [], [], []
        for seg in range(S):
            row = phase * S + seg
            t = shooter.t_a[row] + out.nodes * (shooter.t_b[row] - shooter.t_a[row])
            t[-1] = shooter.t_b[row]
            start = 0 if seg == 0 else 1
            times.append(t[start:])
            vals.append(out.states[start:, row])
            ders.append(out.derivs[start:, row])
        phases.append(OdeTrajectory(np.concatenate(times), np.concatenate(vals), np.concatenate(ders)))
    ph1, ph2 = phases
    u1 = optimal_control(p, ModeId.BEFORE, ph1.values[:, :n], ph1.values[:, n:], ph1.times)
    u2 = optimal_control(p, ModeId.AFTER, ph2.values[:, :n], ph2.values[:, n:], ph2.times)
    x_s = out.y_end[S - 1, :n].copy()
    lam_m = out.y_end[S - 1, n:].copy()
    lam_p = nodes[1, 0, n:].copy()
    partial = TwoPhaseSolution(
        tau=tau,
        formulation=shooter.form,
        phase1=ph1,
        phase2=ph2,
        u1=u1,
        u2=u2,
        x_switch=x_s,
        lambda_minus=lam_m,
        lambda_plus=lam_p,
        cost_J=float("nan"),
        hamiltonian_gap=float("nan"),
        newton_iters=iters,
        residual_norm=trace[-1],
        nodes=nodes.copy(),
        newton_trace=tuple(trace),
        x_switch_plus=nodes[1, 0, :n].copy(),
    )
    try:
        gap = hamiltonian_gap(p, partial.switch_data(p))
    except ContractViolation:
        gap = float("nan")
    cost = evaluate_cost(p, partial)
    return replace(partial, cost_J=cost, hamiltonian_gap=gap)


def _simpson_phase(p, mode, traj: OdeTrajectory, rel_tol=1e-8, max_sub=1 << 12) -> float:
    """Composite Simpson over every integration step, refined until stable."""
    n = p.n
    t = traj.times
    h = np.diff(t)
    cost = p.cost(mode)

    def integral(sub):
        frac = np.linspace(0.0, 1.0, sub + 1)
        pts = (t[:-1, None] + h[:, None] * frac[None, :]).ravel()
        y = traj(pts)
        u = optimal_control(p, mode, y[:, :n], y[:, n:], pts)
        L = np.asarray(cost.value(y[:, :n], u, pts), dtype=float).reshape(h.size, sub + 1)
        if not np.all(np.isfinite(L)):
            raise NumericalBlowup("non-finite stage cost during quadrature")
        w = np.ones(sub + 1)
        w[1:-1:2], w[2:-1:2] = 4.0, 2.0
        return float(np.sum(h * (L @ w)) / (3.0 * sub))

    sub = 2
    prev = integral(sub)
    while sub < max_sub:
        sub *= 2
        cur = integral(sub)
        if abs(cur - prev) <= rel_tol * abs(cur) + 1e-15:
            return cur
        prev = cur
    return prev


def evaluate_cost(p: SwitchedOCP, sol: TwoPhaseSolution) -> float:
    """Stage-cost quadrature over both phases plus the terminal cost."""
    total = _simpson_phase(p, ModeId.BEFORE, sol.phase1) + _simpson_phase(p, ModeId.AFTER, sol.phase2)
    x_end = sol.phase2.values[-1, : p.n]
    total += float(p.terminal_cost(x_end))
    if not np.isfinite(total):
        raise NumericalBlowup("non-finite cost")
    return total
