"""Co-state jump laws at a state-dependent switch and Hamiltonian diagnostics.

With ``D = dL + <lam> . df`` and ``den = m . <f> + mu`` the jump is

    lam_plus - lam_minus = -(D / den) m,

where ``<.>`` is the average of the values before and after the switch and
``d.`` the difference (after minus before).  ``mu = 0`` is the time-invariant
case.  The jump is parallel to ``m`` with magnitude ``nu = D / den``, the
multiplier of the interface constraint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, TangentialCrossing
from .problem import ModeId, SwitchedOCP, hamiltonian, optimal_control

TANGENTIAL_TOL = 1e-10


@dataclass(frozen=True)
class SwitchPointData:
    x_s: np.ndarray
    tau: float
    u_minus: np.ndarray
    u_plus: np.ndarray
    lambda_minus: np.ndarray
    lambda_plus: np.ndarray
    f_minus: np.ndarray
    f_plus: np.ndarray
    L_minus: float
    L_plus: float
    m: np.ndarray
    mu: float = 0.0

    def __post_init__(self):
        for name in ("x_s", "u_minus", "u_plus", "lambda_minus", "lambda_plus", "f_minus", "f_plus", "m"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        for name in ("tau", "L_minus", "L_plus", "mu"):
            object.__setattr__(self, name, float(getattr(self, name)))
        values = [getattr(self, k) for k in self.__dataclass_fields__]
        if not all(np.all(np.isfinite(v)) for v in values):
            raise ContractViolation("switch-point data must be finite")
        if not np.linalg.norm(self.m) > 1e-12:
            raise ContractViolation("interface gradient vanishes at the switch point")

    @property
    def delta_lambda(self) -> np.ndarray:
        return self.lambda_plus - self.lambda_minus

    def swapped(self) -> "SwitchPointData":
        """The same data with the roles of the two modes exchanged."""
        return SwitchPointData(
            x_s=self.x_s,
            tau=self.tau,
            u_minus=self.u_plus,
            u_plus=self.u_minus,
            lambda_minus=self.lambda_plus,
            lambda_plus=self.lambda_minus,
            f_minus=self.f_plus,
            f_plus=self.f_minus,
            L_minus=self.L_plus,
            L_plus=self.L_minus,
            m=self.m,
            mu=self.mu,
        )


@dataclass(frozen=True)
class CostateJump:
    delta_lambda: np.ndarray
    magnitude_nu: float
    denominator: float


def _jump(d: SwitchPointData, mu: float) -> CostateJump:
    f_avg = 0.5 * (d.f_plus + d.f_minus)
    lam_avg = 0.5 * (d.lambda_plus + d.lambda_minus)
    numer = (d.L_plus - d.L_minus) + lam_avg @ (d.f_plus - d.f_minus)
    den = d.m @ f_avg + mu
    scale = (np.linalg.norm(d.m) + abs(mu)) * (1.0 + np.linalg.norm(f_avg))
    if not abs(den) > TANGENTIAL_TOL * scale:
        raise TangentialCrossing(
            f"jump-law denominator {den:.3e} vanishes: the crossing is tangential to the interface",
            denominator=float(den),
        )
    nu = numer / den
    return CostateJump(delta_lambda=-nu * d.m, magnitude_nu=float(nu), denominator=float(den))


def compute_jump_tiv(d: SwitchPointData) -> CostateJump:
    """Jump across a time-invariant interface."""
    if d.mu != 0.0:
        raise ContractViolation("time-invariant jump law needs mu = 0; use compute_jump_tv")
    return _jump(d, 0.0)


def compute_jump_tv(d: SwitchPointData) -> CostateJump:
    """Jump across a time-varying interface with time partial ``mu``."""
    return _jump(d, d.mu)


def compute_jump(d: SwitchPointData) -> CostateJump:
    return compute_jump_tv(d) if d.mu != 0.0 else compute_jump_tiv(d)


def one_sided_magnitudes(d: SwitchPointData) -> tuple[float, float]:
    """Multiplier magnitudes from the two one-sided forms of Hamiltonian continuity.

    ``(dL + lam_minus . df) / (m . f_plus + mu)`` and
    ``(dL + lam_plus . df) / (m . f_minus + mu)``.  Both equal the averaged form
    when the data satisfy the jump law.
    """
    dL = d.L_plus - d.L_minus
    df = d.f_plus - d.f_minus
    return (
        float((dL + d.lambda_minus @ df) / (d.m @ d.f_plus + d.mu)),
        float((dL + d.lambda_plus @ df) / (d.m @ d.f_minus + d.mu)),
    )


def consistent_lambda_plus(d: SwitchPointData) -> np.ndarray:
    """Post-switch co-state implied by the pre-switch side, holding f and L fixed."""
    nu = one_sided_magnitudes(d)[0]
    return d.lambda_minus - nu * d.m


def multiplier_from_jump(d: SwitchPointData) -> float:
    """Least-squares ``nu`` with ``delta_lambda ~ -nu m``."""
    return float(-(d.m @ d.delta_lambda) / (d.m @ d.m))


def tangential_part(delta_lambda, m) -> np.ndarray:
    """Component of ``delta_lambda`` orthogonal to ``m``."""
    delta_lambda = np.asarray(delta_lambda, dtype=float)
    m = np.asarray(m, dtype=float)
    return delta_lambda - m * (m @ delta_lambda) / (m @ m)


def hamiltonian_gap(p: SwitchedOCP | None, d: SwitchPointData) -> float:
    """``H_plus - H_minus`` at the switch, augmented by the time co-state jump.

    For a time-varying interface the time co-state jumps by ``-nu mu`` with
    ``nu`` taken from the observed co-state jump; that term is included so
    the result vanishes at a consistent crossing in both cases.  Without a
    problem the cached ``f`` and ``L`` values of ``d`` are used.
    """
    if p is None:
        h_minus = d.L_minus + d.lambda_minus @ d.f_minus
        h_plus = d.L_plus + d.lambda_plus @ d.f_plus
    else:
        h_minus = float(hamiltonian(p, ModeId.BEFORE, d.x_s, d.lambda_minus, d.u_minus, d.tau))
        h_plus = float(hamiltonian(p, ModeId.AFTER, d.x_s, d.lambda_plus, d.u_plus, d.tau))
    gap = h_plus - h_minus
    if d.mu != 0.0:
        gap += -multiplier_from_jump(d) * d.mu
    return float(gap)


def switch_point_data(p: SwitchedOCP, x_s, tau: float, lambda_minus, lambda_plus) -> SwitchPointData:
    """Evaluate controls, dynamics, costs and interface data at a switch."""
    x_s = np.asarray(x_s, dtype=float)
    lambda_minus = np.asarray(lambda_minus, dtype=float)
    lambda_plus = np.asarray(lambda_plus, dtype=float)
    u_m = optimal_control(p, ModeId.BEFORE, x_s, lambda_minus, tau)
    u_p = optimal_control(p, ModeId.AFTER, x_s, lambda_plus, tau)
    return SwitchPointData(
        x_s=x_s,
        tau=tau,
        u_minus=u_m,
        u_plus=u_p,
        lambda_minus=lambda_minus,
        lambda_plus=lambda_plus,
        f_minus=p.mode1.rhs(x_s, u_m, tau),
        f_plus=p.mode2.rhs(x_s, u_p, tau),
        L_minus=float(p.cost1.value(x_s, u_m, tau)),
        L_plus=float(p.cost2.value(x_s, u_p, tau)),
        m=p.interface.normal(x_s, tau),
        mu=float(p.interface.time_partial(x_s, tau)),
    )
