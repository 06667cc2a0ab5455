"""Explicit Runge-Kutta propagation: fixed-step RK4 and adaptive RKF45.

Batches of trajectories with different time spans are integrated together in
normalized time ``s in [0, 1]`` (``t = t_a + s (t_b - t_a)``), so a single step
sequence serves the whole batch.  Error control for RKF45 uses the worst
component over the batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ContractViolation, NumericalBlowup, StepBudgetExceeded

# Fehlberg 4(5) tableau; the 5th-order solution is propagated (local extrapolation).
_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_A = [
    [],
    [1 / 4],
    [3 / 32, 9 / 32],
    [1932 / 2197, -7200 / 2197, 7296 / 2197],
    [439 / 216, -8.0, 3680 / 513, -845 / 4104],
    [-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40],
]
_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])
_E = _B5 - _B4


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rkf45"
    fixed_steps_per_unit_time: int = 200
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.method not in ("rk4", "rkf45"):
            raise ContractViolation(f"unknown integrator {self.method!r} (rk4, rkf45)")
        if self.fixed_steps_per_unit_time < 50:
            raise ContractViolation("fixed_steps_per_unit_time must be >= 50")
        if self.rel_tol <= 0 or self.abs_tol <= 0 or self.max_steps <= 0:
            raise ContractViolation("tolerances and step budget must be positive")


@dataclass(frozen=True)
class OdeTrajectory:
    """Samples of an ODE solution; ``derivs`` enables cubic Hermite evaluation."""

    times: np.ndarray
    values: np.ndarray
    derivs: Optional[np.ndarray] = None

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.derivs is None:
            return np.stack([np.interp(t, self.times, col) for col in self.values.T], axis=-1)
        return hermite(self.times, self.values, self.derivs, t)

    @property
    def t_a(self) -> float:
        return float(self.times[0])

    @property
    def t_b(self) -> float:
        return float(self.times[-1])


@dataclass(frozen=True)
class Propagation:
    """End states plus the normalized step schedule (and samples if recorded)."""

    y_end: np.ndarray
    nodes: np.ndarray
    states: Optional[np.ndarray] = None
    derivs: Optional[np.ndarray] = None


def hermite(times, values, derivs, t) -> np.ndarray:
    """Piecewise cubic Hermite interpolation; exact at the sample times."""
    t = np.asarray(t, dtype=float)
    flat = np.atleast_1d(t)
    idx = np.clip(np.searchsorted(times, flat, side="right") - 1, 0, len(times) - 2)
    t0, t1 = times[idx], times[idx + 1]
    h = t1 - t0
    th = ((flat - t0) / h)[:, None]
    y0, y1 = values[idx], values[idx + 1]
    f0, f1 = derivs[idx] * h[:, None], derivs[idx + 1] * h[:, None]
    th2, th3 = th * th, th * th * th
    out = (2 * th3 - 3 * th2 + 1) * y0 + (th3 - 2 * th2 + th) * f0 + (-2 * th3 + 3 * th2) * y1 + (th3 - th2) * f1
    exact = np.searchsorted(times, flat)
    hit = (exact < len(times)) & (times[np.minimum(exact, len(times) - 1)] == flat)
    out[hit] = values[exact[hit]]
    return out.reshape(t.shape + values.shape[1:])


def _checked(f, s, t_a, length):
    if not np.all(np.isfinite(f)):
        bad = np.argwhere(~np.all(np.isfinite(f), axis=-1))[0, 0]
        t_bad = float(t_a[bad] + s * length[bad])
        raise NumericalBlowup(f"non-finite right-hand side at t={t_bad:.6g}", t=t_bad)
    return f


def propagate(
    rhs: Callable[[np.ndarray, np.ndarray], np.ndarray],
    y0,
    t_a,
    t_b,
    cfg: IntegratorConfig = IntegratorConfig(),
    *,
    steps: Optional[int] = None,
    schedule: Optional[np.ndarray] = None,
    record: bool = False,
    check_finite: bool = True,
) -> Propagation:
    """Integrate a batch ``y0`` of shape ``(B, k)`` from ``t_a`` to ``t_b``.

    ``t_a`` and ``t_b`` are scalars or arrays of shape ``(B,)``.  ``steps``
    forces a fixed RK4 step count for every trajectory.  ``schedule`` replays
    a previously accepted RKF45 step sequence (normalized times starting at 0
    and ending at 1) without error control, which makes the end state a
    smooth function of ``y0``.  With ``check_finite=False`` rows that blow up
    carry NaN to the end instead of raising, so one bad row cannot sink a batch.
    """
    y = np.array(y0, dtype=float)
    if y.ndim != 2:
        raise ContractViolation("propagate expects a (B, k) batch")
    B = y.shape[0]
    t_a = np.broadcast_to(np.asarray(t_a, dtype=float), (B,)).copy()
    t_b = np.broadcast_to(np.asarray(t_b, dtype=float), (B,)).copy()
    length = t_b - t_a
    if np.any(length <= 0):
        raise ContractViolation("need t_a < t_b for every trajectory")
    if check_finite and not np.all(np.isfinite(y)):
        raise ContractViolation("initial state must be finite")

    scale = length[:, None]

    def fs(yy, s):
        f = rhs(yy, t_a + s * length)
        return _checked(f, s, t_a, length) if check_finite else f

    s = 0.0
    f = fs(y, s)
    nodes = [0.0]
    Ys, Fs = ([y.copy()], [f.copy()]) if record else (None, None)

    if cfg.method == "rk4" or steps is not None:
        n_steps = steps if steps is not None else max(1, math.ceil(cfg.fixed_steps_per_unit_time * float(length.max())))
        if n_steps > cfg.max_steps:
            raise StepBudgetExceeded(f"{n_steps} steps exceed the budget of {cfg.max_steps}")
        h = 1.0 / n_steps
        for i in range(n_steps):
            k1 = f * scale
            k2 = fs(y + 0.5 * h * k1, s + 0.5 * h) * scale
            k3 = fs(y + 0.5 * h * k2, s + 0.5 * h) * scale
            k4 = fs(y + h * k3, s + h) * scale
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            s = (i + 1) / n_steps
            f = fs(y, s)
            nodes.append(s)
            if record:
                Ys.append(y.copy())
                Fs.append(f.copy())
    elif schedule is not None:
        sched = np.asarray(schedule, dtype=float)
        for s_next in sched[1:]:
            h = s_next - s
            k = [f * scale]
            for j in range(1, 6):
                acc = y + h * sum(_A[j][i] * k[i] for i in range(j))
                k.append(fs(acc, s + _C[j] * h) * scale)
            y = y + h * sum(_B5[i] * k[i] for i in range(6) if _B5[i] != 0.0)
            s = float(s_next)
            f = fs(y, s)
            nodes.append(s)
            if record:
                Ys.append(y.copy())
                Fs.append(f.copy())
    else:
        h = 0.05
        n_steps = 0
        while s < 1.0:
            if n_steps >= cfg.max_steps:
                raise StepBudgetExceeded(f"step budget {cfg.max_steps} exhausted at s={s:.6g}")
            h = min(h, 1.0 - s)
            if h < 1e-14:
                t_bad = float(t_a[0] + s * length[0])
                raise NumericalBlowup(f"step size underflow at t={t_bad:.6g}", t=t_bad)
            k = [f * scale]
            for j in range(1, 6):
                acc = y + h * sum(_A[j][i] * k[i] for i in range(j))
                k.append(fs(acc, s + _C[j] * h) * scale)
            y_new = y + h * sum(_B5[i] * k[i] for i in range(6) if _B5[i] != 0.0)
            err = h * sum(_E[i] * k[i] for i in range(6) if _E[i] != 0.0)
            tol = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            e = float(np.max(np.abs(err) / tol)) if err.size else 0.0
            if e <= 1.0:
                s = 1.0 if 1.0 - (s + h) < 1e-13 else s + h
                y = y_new
                f = fs(y, s)
                n_steps += 1
                nodes.append(s)
                if record:
                    Ys.append(y.copy())
                    Fs.append(f.copy())
            fac = 5.0 if e == 0.0 else min(5.0, max(0.2, 0.9 * e ** -0.2))
            h = h * fac
    if record:
        return Propagation(y, np.array(nodes), np.stack(Ys), np.stack(Fs))
    return Propagation(y, np.array(nodes))


def integrate(
    rhs: Callable[[np.ndarray, float], np.ndarray],
    y_a,
    t_a: float,
    t_b: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    output_grid=None,
) -> OdeTrajectory:
    """Integrate one trajectory, returning step samples or samples on ``output_grid``.

    Grid values are integrated onto exactly, not interpolated.
    """
    y_a = np.asarray(y_a, dtype=float).ravel()
    t_a, t_b = float(t_a), float(t_b)
    if not t_a < t_b:
        raise ContractViolation(f"need t_a < t_b, got {t_a} and {t_b}")
    if output_grid is None:
        out = propagate(rhs, y_a[None, :], t_a, t_b, cfg, record=True)
        times = t_a + out.nodes * (t_b - t_a)
        times[-1] = t_b
        return OdeTrajectory(times, out.states[:, 0, :], out.derivs[:, 0, :])
    grid = np.unique(np.asarray(output_grid, dtype=float))
    if grid[0] < t_a or grid[-1] > t_b:
        raise ContractViolation("output grid must lie within [t_a, t_b]")
    grid = np.unique(np.concatenate([[t_a], grid, [t_b]]))
    values = [y_a]
    for lo, hi in zip(grid[:-1], grid[1:]):
        values.append(propagate(rhs, values[-1][None, :], lo, hi, cfg).y_end[0])
    return OdeTrajectory(grid, np.stack(values), None)
