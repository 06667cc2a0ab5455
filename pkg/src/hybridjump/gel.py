"""Switching-time Newton iteration driven by the co-state jump law.

Each residual evaluation solves the two-phase boundary value problem at a
fixed switching time and returns the one scalar condition held out of it.
The derivative is a forward difference with perturbation ``delta_tau``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .bvp import BvpGuess, Formulation, ShootingConfig, TwoPhaseSolution, solve_two_phase
from .errors import ContractViolation, DerivativeVanished, HybridJumpError, InnerFailure
from .jump import compute_jump
from .problem import SwitchedOCP


class StopReason(str, Enum):
    RESIDUAL_BELOW_TOL = "residual-below-tol"
    STEP_BELOW_TOL = "step-below-tol"
    MAX_ITERS = "max-iters"
    INNER_FAILURE = "inner-failure"


@dataclass(frozen=True)
class GelConfig:
    tau0: float = 0.5
    tol: float = 1e-4
    delta_tau: float = 0.1
    alpha: float = 1.0
    max_iters: int = 30
    formulation: Formulation = Formulation.JUMP_MAGNITUDE
    backtracking: bool = True
    max_backtracks: int = 8
    startup_probes: int = 12

    def __post_init__(self):
        if self.tol <= 0 or self.delta_tau <= 0:
            raise ContractViolation("tol and delta_tau must be positive")
        if not 0 < self.alpha <= 1:
            raise ContractViolation("alpha must lie in (0, 1]")
        if self.max_iters < 1 or self.max_backtracks < 0 or self.startup_probes < 0:
            raise ContractViolation("max_iters must be >= 1 and probe counts >= 0")
        object.__setattr__(self, "formulation", Formulation(self.formulation))


@dataclass(frozen=True)
class GelIteration:
    k: int
    tau: float
    F: float
    dF: Optional[float]
    step: Optional[float]
    inner_iters: int
    inner_residual: float
    backtracks: int = 0


@dataclass
class GelTrace:
    records: list = field(default_factory=list)
    stop_reason: Optional[StopReason] = None
    # switching times tried before the first successful inner solve
    failed_starts: list = field(default_factory=list)

    @property
    def iterations(self) -> int:
        """Number of switching-time updates performed."""
        return sum(1 for r in self.records if r.step is not None)

    def taus(self) -> list[float]:
        out = [r.tau for r in self.records]
        last = self.records[-1] if self.records else None
        if last is not None and last.step is not None:
            out.append(last.tau + last.step)
        return out


@dataclass(frozen=True)
class GelResult:
    solution: TwoPhaseSolution
    trace: GelTrace
    tau_star: float
    J_star: float
    F_star: float
    delta_lambda_empirical: np.ndarray
    delta_lambda_law: np.ndarray

    @property
    def converged(self) -> bool:
        return self.trace.stop_reason in (StopReason.RESIDUAL_BELOW_TOL, StopReason.STEP_BELOW_TOL)

    @property
    def iterations(self) -> int:
        return self.trace.iterations


def held_out_residual(p: SwitchedOCP, sol: TwoPhaseSolution, form: Formulation) -> float:
    """The scalar condition the inner solve did not impose."""
    if Formulation(form) is Formulation.INTERFACE:
        return float(p.interface.value(sol.x_switch, sol.tau))
    d = sol.switch_data(p)
    return float(d.m @ d.delta_lambda / (d.m @ d.m) + compute_jump(d).magnitude_nu)


def residual_F(
    p: SwitchedOCP,
    tau: float,
    form: Formulation = Formulation.JUMP_MAGNITUDE,
    cfg: ShootingConfig = ShootingConfig(),
    guess: Optional[BvpGuess] = None,
    trace: Optional[GelTrace] = None,
) -> tuple[float, TwoPhaseSolution]:
    """Solve the inner problem at ``tau`` and return the held-out residual with the solution."""
    try:
        sol = solve_two_phase(p, tau, form, cfg, guess)
        return held_out_residual(p, sol, form), sol
    except ContractViolation:
        raise
    except HybridJumpError as exc:
        raise InnerFailure(f"inner solve failed at tau={tau:.6g}: {exc}", trace=trace, cause=exc) from exc


def _clamp(p: SwitchedOCP, tau: float) -> float:
    eps = 1e-6 * (p.tf - p.t0)
    return float(min(max(tau, p.t0 + eps), p.tf - eps))


def _start(p, cfg, shooting, trace):
    """First residual evaluation, probing ``tau0 +- k delta_tau`` if the inner problem fails.

    Away from the optimum the inner problem of the interface formulation can
    lack a solution, so a failed start is not yet a failed run.
    """
    tau0 = _clamp(p, cfg.tau0)
    candidates = [tau0]
    for k in range(1, cfg.startup_probes + 1):
        for sign in (1.0, -1.0):
            t = tau0 + sign * k * cfg.delta_tau
            if p.t0 < t < p.tf:
                candidates.append(t)
    candidates = candidates[: cfg.startup_probes + 1]
    for tau in candidates:
        try:
            F, sol = residual_F(p, tau, cfg.formulation, shooting, None, trace)
            return tau, F, sol
        except InnerFailure as exc:
            trace.failed_starts.append(tau)
            last = exc
    trace.stop_reason = StopReason.INNER_FAILURE
    raise InnerFailure(f"inner problem unsolvable at every start tried: {last}", trace=trace, cause=last.cause)


def _slope(p, cfg, shooting, tau, F, warm, trace):
    dt = cfg.delta_tau
    while tau + dt >= p.tf and dt > 1e-6:
        dt = max(0.5 * dt, 1e-6)
    steps = [dt, -dt] if tau + dt < p.tf else [-dt]
    for h in steps:
        if not p.t0 < tau + h < p.tf:
            continue
        try:
            F_pert, _ = residual_F(p, tau + h, cfg.formulation, shooting, warm, trace)
        except InnerFailure:
            if h is steps[-1]:
                raise
            continue
        return (F_pert - F) / h
    raise InnerFailure(f"no admissible perturbation at tau={tau:.6g}", trace=trace)


def solve_gel(
    p: SwitchedOCP,
    cfg: GelConfig = GelConfig(),
    shooting: ShootingConfig = ShootingConfig(),
) -> GelResult:
    """Newton iteration on the switching time, warm-starting every inner solve."""
    form = cfg.formulation
    trace = GelTrace()
    tau, F, sol = _start(p, cfg, shooting, trace)
    best = (abs(F), tau, F, sol)

    for k in range(cfg.max_iters):
        if abs(F) < cfg.tol:
            trace.records.append(GelIteration(k, tau, F, None, None, sol.newton_iters, sol.residual_norm))
            trace.stop_reason = StopReason.RESIDUAL_BELOW_TOL
            break
        warm = BvpGuess.warm_start(sol)
        dF = _slope(p, cfg, shooting, tau, F, warm, trace)
        if not abs(dF) >= 1e-14:
            raise DerivativeVanished(f"dF/dtau = {dF:.3e} at tau={tau:.6g}", trace=trace)
        step = -cfg.alpha * F / dF
        while not p.t0 < tau + step < p.tf:
            step *= 0.5

        accepted = None
        tried = []
        backtracks = 0
        for backtracks in range(cfg.max_backtracks + 1):
            try:
                F_new, sol_new = residual_F(p, tau + step, form, shooting, warm, trace)
            except InnerFailure:
                F_new = sol_new = None
            if F_new is not None:
                tried.append((abs(F_new), step, F_new, sol_new))
                if not cfg.backtracking or abs(F_new) < abs(F):
                    accepted = tried[-1]
                    break
            step *= 0.5
        if accepted is None:
            if not tried:
                trace.stop_reason = StopReason.INNER_FAILURE
                raise InnerFailure(f"no admissible step from tau={tau:.6g}", trace=trace)
            accepted = min(tried, key=lambda item: item[0])
        _, step, F_new, sol_new = accepted
        trace.records.append(GelIteration(k, tau, F, dF, step, sol.newton_iters, sol.residual_norm, backtracks))
        tau, F, sol = tau + step, F_new, sol_new
        if abs(F) < best[0]:
            best = (abs(F), tau, F, sol)
        if abs(step) < cfg.tol:
            trace.stop_reason = StopReason.STEP_BELOW_TOL
            break
    else:
        trace.stop_reason = StopReason.MAX_ITERS
        _, tau, F, sol = best

    d = sol.switch_data(p)
    return GelResult(
        solution=sol,
        trace=trace,
        tau_star=float(sol.tau),
        J_star=float(sol.cost_J),
        F_star=float(F),
        delta_lambda_empirical=sol.delta_lambda.copy(),
        delta_lambda_law=compute_jump(d).delta_lambda,
    )


def absolute_error(tau: float, tau_ref: float) -> float:
    """Distance of a switching time from a reference switching time."""
    return abs(float(tau) - float(tau_ref))
