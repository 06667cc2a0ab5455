"""Brute-force oracle: grid search over switching time and switching state.

Each grid cell fixes a switch point ``(tau, x_s)`` on the interface and solves
the two phases as separate single-mode extremal problems by batched single
shooting on the initial co-state.  Nothing about the switch is imposed beyond
continuity of the state, so the co-state jump and Hamiltonian continuity
emerge at the minimizer and can be compared against the jump law.

A fixed RK4 step count per phase keeps ``J`` smooth in ``(tau, x_s)``, which
matters more for locating the argmin than absolute accuracy.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import BvpDiverged, ContractViolation, OracleExhausted
from .integrate import IntegratorConfig, OdeTrajectory, propagate
from .jump import SwitchPointData, switch_point_data
from .problem import FixedState, ModeId, SwitchedOCP, state_costate_rhs

_RK4 = IntegratorConfig(method="rk4")


@dataclass(frozen=True)
class SweepConfig:
    """Grid sizes, refinement and per-cell shooting settings.

    Each refinement round re-grids ``refine_halfwidth`` cells either side of
    the incumbent at ``refine_factor`` times the previous resolution, in
    both ``tau`` and the interface coordinate.
    """

    tau_count: int = 400
    sigma_count: int = 200
    refinement_rounds: int = 2
    refine_factor: int = 10
    refine_halfwidth: int = 2
    coarse_steps: int = 64
    fine_steps: int = 400
    newton_tol: float = 1e-11
    max_newton_iters: int = 30
    workers: int = 1
    chunk_size: int = 4096

    def __post_init__(self):
        if self.tau_count < 10 or self.sigma_count < 10:
            raise ContractViolation("grid counts must be >= 10")
        if self.refinement_rounds < 0 or self.refine_factor < 2 or self.refine_halfwidth < 1:
            raise ContractViolation("invalid refinement settings")
        if self.coarse_steps < 4 or self.fine_steps < 4:
            raise ContractViolation("step counts must be >= 4")
        if self.workers < 1 or self.chunk_size < 1:
            raise ContractViolation("workers and chunk_size must be >= 1")

    def epsilon(self, p: SwitchedOCP) -> float:
        return 1e-3 * (p.tf - p.t0)


@dataclass(frozen=True)
class PhaseSolution:
    """One single-mode extremal between fixed end conditions."""

    x: OdeTrajectory
    lam: OdeTrajectory
    J: float
    lambda_a: np.ndarray
    lambda_b: np.ndarray
    newton_iters: int


@dataclass(frozen=True)
class SurfaceTable:
    """Every evaluated cell: refinement round, ``tau``, chart coordinate, ``x_s`` and ``J``.

    ``J`` is NaN where a phase problem failed.
    """

    round: np.ndarray
    tau: np.ndarray
    sigma: np.ndarray
    x_s: np.ndarray
    J: np.ndarray

    def __len__(self) -> int:
        return len(self.tau)

    def rows(self):
        for i in range(len(self)):
            yield int(self.round[i]), float(self.tau[i]), float(self.sigma[i]), self.x_s[i], float(self.J[i])


@dataclass(frozen=True)
class OracleResult:
    tau_star: float
    x_s_star: np.ndarray
    J_star: float
    lambda_minus: np.ndarray
    lambda_plus: np.ndarray
    sigma_star: float
    J_surface: SurfaceTable
    failures: list = field(default_factory=list)
    final_tau_step: float = 0.0
    interior_minimum: bool = True
    phase1: Optional[PhaseSolution] = None
    phase2: Optional[PhaseSolution] = None
    wall_time: float = 0.0

    @property
    def delta_lambda_empirical(self) -> np.ndarray:
        return self.lambda_plus - self.lambda_minus

    def switch_data(self, p: SwitchedOCP) -> SwitchPointData:
        return switch_point_data(p, self.x_s_star, self.tau_star, self.lambda_minus, self.lambda_plus)


def _shoot(p, mode, x_a, t_a, t_b, target, steps, tol, max_iters):
    """Batched single shooting on ``lam(t_a)``.

    ``target`` is an array of end states, or None for the terminal-cost
    transversality condition.  Rows are frozen once converged, so each row's
    result does not depend on the rest of the batch.
    """
    B, n = x_a.shape
    rhs = state_costate_rhs(p, mode, with_cost=True)
    t_a = np.broadcast_to(np.asarray(t_a, dtype=float), (B,))
    t_b = np.broadcast_to(np.asarray(t_b, dtype=float), (B,))

    def run(lam, rows):
        k = len(rows)
        y0 = np.concatenate([x_a[rows], lam, np.zeros((k, 1))], axis=1)
        return propagate(rhs, y0, t_a[rows], t_b[rows], _RK4, steps=steps, check_finite=False).y_end

    def resid(y, rows):
        xb, lb = y[:, :n], y[:, n : 2 * n]
        if target is not None:
            return xb - target[rows]
        return lb - p.terminal.grad(xb)

    lam = np.zeros((B, n))
    y = np.full((B, 2 * n + 1), np.nan)
    r = np.full((B, n), np.inf)
    done = np.zeros(B, dtype=bool)
    iters = np.zeros(B, dtype=int)
    rows = np.arange(B)
    y[rows] = run(lam, rows)
    r[rows] = resid(y[rows], rows)
    scale = 1.0 + (np.abs(target).max(axis=1) if target is not None else 0.0)
    for _ in range(max_iters):
        norm = np.max(np.abs(r), axis=1)
        done |= np.isfinite(norm) & (norm <= tol * scale)
        act = np.flatnonzero(~done & np.isfinite(norm))
        if act.size == 0:
            break
        iters[act] += 1
        h = 1e-6 * np.maximum(1.0, np.abs(lam[act]).max(axis=1))
        pert = np.repeat(lam[act], n, axis=0) + np.tile(np.eye(n), (act.size, 1)) * np.repeat(h, n)[:, None]
        rows_p = np.repeat(act, n)
        r_p = resid(run(pert, rows_p), rows_p).reshape(act.size, n, n)
        jac = np.swapaxes(r_p - r[act][:, None, :], 1, 2) / h[:, None, None]
        with np.errstate(all="ignore"):
            try:
                step = np.linalg.solve(jac, r[act][..., None])[..., 0]
            except np.linalg.LinAlgError:
                step = np.stack([np.linalg.lstsq(j, rr, rcond=None)[0] for j, rr in zip(jac, r[act])])
        alpha = np.ones(act.size)
        pending = np.arange(act.size)
        for _ in range(10):
            sub = act[pending]
            lam_try = lam[sub] - alpha[pending, None] * step[pending]
            y_try = run(lam_try, sub)
            r_try = resid(y_try, sub)
            ok = np.max(np.abs(r_try), axis=1) < np.max(np.abs(r[sub]), axis=1)
            lam[sub[ok]], y[sub[ok]], r[sub[ok]] = lam_try[ok], y_try[ok], r_try[ok]
            pending = pending[~ok]
            if pending.size == 0:
                break
            alpha[pending] *= 0.5
        # rows whose line search failed cannot make progress
        r[act[pending]] = np.nan
    norm = np.max(np.abs(r), axis=1)
    done |= np.isfinite(norm) & (norm <= tol * scale)
    return lam, y, done, iters


def solve_phase_fixed_endpoints(
    p: SwitchedOCP,
    mode: ModeId,
    x_a,
    t_a: float,
    x_b,
    t_b: float,
    steps: int = 400,
    tol: float = 1e-11,
    max_iters: int = 30,
) -> PhaseSolution:
    """Solve one single-mode extremal problem by shooting.

    ``x_b`` is the fixed end state, or None to impose ``lam(t_b) = grad phi``
    from the problem's terminal cost.  ``J`` includes the terminal cost in
    that case.
    """
    if not t_a < t_b:
        raise ContractViolation(f"need t_a < t_b, got {t_a} and {t_b}")
    x_a = np.atleast_2d(np.asarray(x_a, dtype=float))
    target = None if x_b is None else np.atleast_2d(np.asarray(x_b, dtype=float))
    if target is None and isinstance(p.terminal, FixedState):
        target = p.terminal.target[None, :]
    with np.errstate(all="ignore"):
        lam, y, done, iters = _shoot(p, ModeId(mode), x_a, t_a, t_b, target, steps, tol, max_iters)
    if not done[0]:
        raise BvpDiverged(f"phase shooting did not converge on [{t_a:.6g}, {t_b:.6g}]", [])
    n = p.n
    rhs = state_costate_rhs(p, ModeId(mode), with_cost=True)
    y0 = np.concatenate([x_a[0], lam[0], [0.0]])[None, :]
    out = propagate(rhs, y0, t_a, t_b, _RK4, steps=steps, record=True)
    times = t_a + out.nodes * (t_b - t_a)
    times[-1] = t_b
    Y, F = out.states[:, 0, :], out.derivs[:, 0, :]
    J = float(Y[-1, -1])
    if target is None:
        J += float(p.terminal_cost(Y[-1, :n]))
    return PhaseSolution(
        x=OdeTrajectory(times, Y[:, :n], F[:, :n]),
        lam=OdeTrajectory(times, Y[:, n : 2 * n], F[:, n : 2 * n]),
        J=J,
        lambda_a=Y[0, n : 2 * n].copy(),
        lambda_b=Y[-1, n : 2 * n].copy(),
        newton_iters=int(iters[0]),
    )


def _evaluate_cells(p, taus, xs, steps, cfg):
    """Total cost and switch co-states for a batch of switch points."""
    n = p.n
    B = len(taus)
    with np.errstate(all="ignore"):
        lam1, y1, ok1, _ = _shoot(p, ModeId.BEFORE, np.broadcast_to(p.x0, (B, n)).copy(), p.t0, taus, xs, steps,
                                  cfg.newton_tol, cfg.max_newton_iters)
        target = p.terminal.target[None, :].repeat(B, 0) if isinstance(p.terminal, FixedState) else None
        lam2, y2, ok2, _ = _shoot(p, ModeId.AFTER, xs, taus, p.tf, target, steps, cfg.newton_tol, cfg.max_newton_iters)
        J = y1[:, -1] + y2[:, -1]
        if target is None:
            J = J + p.terminal_cost(y2[:, :n])
    ok = ok1 & ok2 & np.isfinite(J)
    J = np.where(ok, J, np.nan)
    return J, y1[:, n : 2 * n], lam2


def _box(p: SwitchedOCP):
    xf = p.target_guess()
    return np.minimum(p.x0, xf) - 1.0, np.maximum(p.x0, xf) + 1.0


def _switch_states(p: SwitchedOCP, taus: np.ndarray, sigmas: np.ndarray):
    """Switch states on the interface slice for each ``(tau, sigma)``, with a validity mask."""
    if p.n == 1:
        if p.interface.linear is not None:
            m, mu, c = p.interface.linear
            xs = (-(mu * taus + c) / m[0])[:, None]
        else:
            g = lambda x: p.interface.value(x[:, None], taus)
            xs = optimize.newton(g, np.full(len(taus), p.x0[0]))[:, None]
        return xs, np.isfinite(xs[:, 0])
    if p.n != 2 or p.interface.curve is None:
        raise ContractViolation("the oracle samples interfaces with a planar chart (n <= 2)")
    lo, hi = _box(p)
    xs = np.empty((len(taus), 2))
    valid = np.empty(len(taus), dtype=bool)
    for t in np.unique(taus):
        sel = taus == t
        pts, ok = p.interface.curve(sigmas[sel], t, lo, hi)
        xs[sel], valid[sel] = pts, ok
    return xs, valid


def _run_cells(p, taus, sigmas, steps, cfg):
    xs, valid = _switch_states(p, taus, sigmas)
    J = np.full(len(taus), np.nan)
    lm = np.full((len(taus), p.n), np.nan)
    lp = np.full((len(taus), p.n), np.nan)
    idx = np.flatnonzero(valid)
    chunks = [idx[i : i + cfg.chunk_size] for i in range(0, idx.size, cfg.chunk_size)]
    work = lambda rows: _evaluate_cells(p, taus[rows], xs[rows], steps, cfg)
    if cfg.workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(rows) for rows in chunks]
    for rows, (Jc, lmc, lpc) in zip(chunks, results):
        J[rows], lm[rows], lp[rows] = Jc, lmc, lpc
    return xs, valid, J, lm, lp


def _argmin(taus, xs, J) -> int:
    """Smallest ``J``; ties go to smaller ``tau``, then lexicographically smaller ``x_s``."""
    best = np.nanmin(J)
    cand = np.flatnonzero(J == best)
    keys = [xs[cand, k] for k in reversed(range(xs.shape[1]))] + [taus[cand]]
    return int(cand[np.lexsort(keys)[0]])


def _axis(center, step, half, lo, hi, periodic=False):
    pts = center + step * np.arange(-half, half + 1)
    if periodic:
        return np.mod(pts, 1.0)
    return np.unique(np.clip(pts, lo, hi))


def sweep(p: SwitchedOCP, cfg: SweepConfig = SweepConfig()) -> OracleResult:
    """Grid search for the switch point minimizing the total cost."""
    start = time.perf_counter()
    eps = cfg.epsilon(p)
    t_lo, t_hi = p.t0 + eps, p.tf - eps
    periodic = p.n == 2 and p.interface.periodic
    tau_axis = np.linspace(t_lo, t_hi, cfg.tau_count)
    if p.n == 1:
        sig_axis = np.zeros(1)
    else:
        sig_axis = np.linspace(0.0, 1.0, cfg.sigma_count, endpoint=not periodic)
    d_tau = tau_axis[1] - tau_axis[0]
    d_sig = sig_axis[1] - sig_axis[0] if sig_axis.size > 1 else 0.0

    tables, failures = [], []
    best = None
    for rnd in range(cfg.refinement_rounds + 1):
        steps = cfg.coarse_steps if rnd == 0 else cfg.fine_steps
        T, S = np.meshgrid(tau_axis, sig_axis, indexing="ij")
        taus, sigmas = T.ravel(), S.ravel()
        xs, valid, J, lm, lp = _run_cells(p, taus, sigmas, steps, cfg)
        bad = valid & ~np.isfinite(J)
        failures.extend((float(t), float(s)) for t, s in zip(taus[bad], sigmas[bad]))
        keep = valid
        tables.append((np.full(keep.sum(), rnd), taus[keep], sigmas[keep], xs[keep], J[keep]))
        if not np.any(np.isfinite(J)):
            if best is None:
                raise OracleExhausted(f"every grid cell failed for {len(taus)} cells")
            break
        i = _argmin(taus, xs, np.where(np.isfinite(J), J, np.inf))
        best = dict(tau=taus[i], sigma=sigmas[i], x_s=xs[i], J=J[i], lm=lm[i], lp=lp[i], T=T, Jg=J.reshape(T.shape),
                    ti=int(np.searchsorted(tau_axis, taus[i])), rnd=rnd, d_tau=d_tau)
        if rnd == cfg.refinement_rounds:
            break
        d_tau /= cfg.refine_factor
        tau_axis = _axis(best["tau"], d_tau, cfg.refine_halfwidth * cfg.refine_factor, t_lo, t_hi)
        if p.n == 2:
            d_sig /= cfg.refine_factor
            sig_axis = _axis(best["sigma"], d_sig, cfg.refine_halfwidth * cfg.refine_factor, 0.0, 1.0, periodic)

    # interior check on the last evaluated grid, at the minimizer's chart coordinate
    Jg, ti = best["Jg"], best["ti"]
    si = int(np.argmin(np.abs(sig_axis - best["sigma"]))) if p.n == 2 else 0
    at_edge = best["tau"] <= t_lo + 0.5 * best["d_tau"] or best["tau"] >= t_hi - 0.5 * best["d_tau"]
    neighbors = [Jg[j, si] for j in (ti - 1, ti + 1) if 0 <= j < Jg.shape[0]]
    interior = (not at_edge) and all(not np.isfinite(v) or v >= best["J"] for v in neighbors)

    table = SurfaceTable(*(np.concatenate(col) for col in zip(*tables)))
    tau_s, x_s = float(best["tau"]), np.array(best["x_s"])
    phase1 = phase2 = None
    try:
        phase1 = solve_phase_fixed_endpoints(p, ModeId.BEFORE, p.x0, p.t0, x_s, tau_s, cfg.fine_steps, cfg.newton_tol)
        target = p.terminal.target if isinstance(p.terminal, FixedState) else None
        phase2 = solve_phase_fixed_endpoints(p, ModeId.AFTER, x_s, tau_s, target, p.tf, cfg.fine_steps, cfg.newton_tol)
    except BvpDiverged:
        pass
    return OracleResult(
        tau_star=tau_s,
        x_s_star=x_s,
        J_star=float(best["J"]),
        lambda_minus=np.array(best["lm"]),
        lambda_plus=np.array(best["lp"]),
        sigma_star=float(best["sigma"]),
        J_surface=table,
        failures=failures,
        final_tau_step=float(best["d_tau"]),
        interior_minimum=bool(interior),
        phase1=phase1,
        phase2=phase2,
        wall_time=time.perf_counter() - start,
    )
