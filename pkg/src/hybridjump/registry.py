"""Dynamics templates and the built-in problem registry.

A problem is described declaratively by a plain dict (the same structure a
TOML problem file parses to) naming a template plus numeric parameters.
``build_problem`` turns that description into a :class:`SwitchedOCP`.
"""

from __future__ import annotations

import copy
import math
from typing import Callable

import numpy as np

from .errors import ContractViolation, NotFound, ProblemFileError
from .problem import (
    AnalyticControl,
    FixedState,
    ModeDynamics,
    ModeId,
    StageCost,
    SwitchedOCP,
    TerminalCost,
    circle_interface,
    linear_interface,
)


def _pair(value, name):
    arr = np.asarray(value, dtype=float).ravel()
    if arr.size == 1:
        arr = np.repeat(arr, 2)
    if arr.size != 2:
        raise ProblemFileError("expected one value per mode (2 entries)", field=f"modes.{name}")
    return arr


def _pick(coefs, mode):
    return coefs[0] if mode is ModeId.BEFORE else coefs[1]


# --- templates -------------------------------------------------------------
# Each builder returns (mode1, mode2, cost1, cost2, control, n, m_dim).


def _double_integrator(a=(2.0, 1.0), w=(0.125, 0.5)):
    """x1' = a_k x2, x2' = u with stage cost w_k u^2."""
    a, w = _pair(a, "a"), _pair(w, "w")
    if np.any(w <= 0):
        raise ProblemFileError("control weights must be positive", field="modes.w")

    def mode(k):
        def rhs(x, u, t):
            return np.stack([a[k] * x[..., 1], u[..., 0]], axis=-1)

        def jac_x(x, u, t):
            J = np.zeros(x.shape[:-1] + (2, 2))
            J[..., 0, 1] = a[k]
            return J

        def jac_u(x, u, t):
            J = np.zeros(x.shape[:-1] + (2, 1))
            J[..., 1, 0] = 1.0
            return J

        return ModeDynamics(rhs, jac_x, jac_u)

    def cost(k):
        return StageCost(
            value=lambda x, u, t: w[k] * u[..., 0] ** 2,
            grad_x=lambda x, u, t: np.zeros(np.broadcast_shapes(x.shape[:-1], u.shape[:-1]) + (2,)),
            grad_u=lambda x, u, t: 2.0 * w[k] * u,
        )

    def law(x, lam, t, m):
        return (-lam[..., 1] / (2.0 * _pick(w, m)))[..., None]

    return mode(0), mode(1), cost(0), cost(1), AnalyticControl(law), 2, 1


def _scalar_tv(a=(1.0, 0.0), w=(0.5, 0.125)):
    """x' = a_k t x + u with stage cost w_k (x^2 + u^2)."""
    a, w = _pair(a, "a"), _pair(w, "w")
    if np.any(w <= 0):
        raise ProblemFileError("cost weights must be positive", field="modes.w")

    def mode(k):
        def rhs(x, u, t):
            return a[k] * np.asarray(t, dtype=float)[..., None] * x + u

        def jac_x(x, u, t):
            tt = np.broadcast_to(np.asarray(t, dtype=float), np.broadcast_shapes(x.shape[:-1], np.shape(t)))
            return (a[k] * tt)[..., None, None] * np.ones((1, 1))

        def jac_u(x, u, t):
            return np.ones(np.broadcast_shapes(x.shape[:-1], u.shape[:-1]) + (1, 1))

        return ModeDynamics(rhs, jac_x, jac_u)

    def cost(k):
        return StageCost(
            value=lambda x, u, t: w[k] * (x[..., 0] ** 2 + u[..., 0] ** 2),
            grad_x=lambda x, u, t: 2.0 * w[k] * np.broadcast_to(x, np.broadcast_shapes(x.shape, u.shape)),
            grad_u=lambda x, u, t: 2.0 * w[k] * np.broadcast_to(u, np.broadcast_shapes(x.shape, u.shape)),
        )

    def law(x, lam, t, m):
        return -lam / (2.0 * _pick(w, m))

    return mode(0), mode(1), cost(0), cost(1), AnalyticControl(law), 1, 1


def _linear(A1, A2, b, w=(0.5, 0.5)):
    """x' = A_k x + b u with stage cost w_k u^2."""
    A = [np.atleast_2d(np.asarray(A1, dtype=float)), np.atleast_2d(np.asarray(A2, dtype=float))]
    b = np.asarray(b, dtype=float).ravel()
    w = _pair(w, "w")
    n = b.size
    for k, Ak in enumerate(A):
        if Ak.shape != (n, n):
            raise ProblemFileError(f"matrix must be {n}x{n}", field=f"modes.A{k + 1}")
    if np.any(w <= 0):
        raise ProblemFileError("control weights must be positive", field="modes.w")

    def mode(k):
        def rhs(x, u, t):
            return x @ A[k].T + u[..., :1] * b

        def jac_x(x, u, t):
            return np.broadcast_to(A[k], x.shape[:-1] + (n, n)).copy()

        def jac_u(x, u, t):
            return np.broadcast_to(b[:, None], np.broadcast_shapes(x.shape[:-1], u.shape[:-1]) + (n, 1)).copy()

        return ModeDynamics(rhs, jac_x, jac_u)

    def cost(k):
        return StageCost(
            value=lambda x, u, t: w[k] * u[..., 0] ** 2,
            grad_x=lambda x, u, t: np.zeros(np.broadcast_shapes(x.shape[:-1], u.shape[:-1]) + (n,)),
            grad_u=lambda x, u, t: 2.0 * w[k] * u,
        )

    def law(x, lam, t, m):
        return (-(lam @ b) / (2.0 * _pick(w, m)))[..., None]

    return mode(0), mode(1), cost(0), cost(1), AnalyticControl(law), n, 1


def _bilinear(a=(1.0, -1.0), w=(0.5, 0.5)):
    """x' = a_k x + u x with stage cost w_k u^2."""
    a, w = _pair(a, "a"), _pair(w, "w")
    if np.any(w <= 0):
        raise ProblemFileError("control weights must be positive", field="modes.w")

    def mode(k):
        return ModeDynamics(
            rhs=lambda x, u, t: (a[k] + u) * x,
            jac_x=lambda x, u, t: (a[k] + u)[..., None] * np.ones((1, 1)),
            jac_u=lambda x, u, t: np.broadcast_to(x, np.broadcast_shapes(x.shape, u.shape))[..., None],
        )

    def cost(k):
        return StageCost(
            value=lambda x, u, t: w[k] * u[..., 0] ** 2,
            grad_x=lambda x, u, t: np.zeros(np.broadcast_shapes(x.shape, u.shape)),
            grad_u=lambda x, u, t: 2.0 * w[k] * np.broadcast_to(u, np.broadcast_shapes(x.shape, u.shape)),
        )

    def law(x, lam, t, m):
        return -lam * x / (2.0 * _pick(w, m))

    return mode(0), mode(1), cost(0), cost(1), AnalyticControl(law), 1, 1


TEMPLATES: dict[str, tuple[Callable, str]] = {
    "double-integrator": (_double_integrator, "x1' = a_k x2, x2' = u; L = w_k u^2"),
    "scalar-tv": (_scalar_tv, "x' = a_k t x + u; L = w_k (x^2 + u^2)"),
    "linear": (_linear, "x' = A_k x + b u; L = w_k u^2"),
    "bilinear": (_bilinear, "x' = a_k x + u x; L = w_k u^2"),
}


# --- registry --------------------------------------------------------------

_REGISTRY: dict[str, dict] = {
    "circle-tiv": {
        "description": "double integrator variant, quarter-unit-circle interface",
        "origin": "jump-law demo, time-invariant interface",
        "template": "double-integrator",
        "modes": {"a": [2.0, 1.0], "w": [0.125, 0.5]},
        "interface": {"kind": "unit-circle"},
        "x0": [0.0, 0.0],
        "t0": 0.0,
        "tf": 2.0,
        "terminal": {"kind": "fixed", "state": [2.0, 2.0]},
        "solver": {"tau0": 0.5},
        "reference": {
            "tau": 0.8881,
            "J": 0.7382,
            "delta_lambda": [-0.0840, -0.1807],
            "delta_lambda_law": [-0.0840, -0.1807],
            "rows": [],
        },
    },
    "linear-tv": {
        "description": "double integrator variant, moving line x1 + x2 + t - 1 = 0",
        "origin": "jump-law demo, time-varying interface",
        "template": "double-integrator",
        "modes": {"a": [2.0, 1.0], "w": [1.0, 0.5]},
        "interface": {"kind": "linear", "normal": [1.0, 1.0], "time_coeff": 1.0, "offset": -1.0},
        "x0": [0.0, 0.0],
        "t0": 0.0,
        "tf": 2.0,
        "terminal": {"kind": "fixed", "state": [2.0, 2.0]},
        "solver": {"tau0": 0.5},
        "reference": {
            "tau": 0.4790,
            "J": 1.1539,
            "delta_lambda": [0.1317, 0.1318],
            "delta_lambda_law": [0.1318, 0.1318],
            "rows": [],
        },
    },
    "ex1-scalar-tv": {
        "description": "scalar time-varying system, interface x + t - 1 = 0",
        "origin": "benchmark example 1",
        "template": "scalar-tv",
        "modes": {"a": [1.0, 0.0], "w": [0.5, 0.125]},
        "interface": {"kind": "linear", "normal": [1.0], "time_coeff": 1.0, "offset": -1.0},
        "x0": [0.0],
        "t0": 0.0,
        "tf": 2.0,
        "terminal": {"kind": "fixed", "state": [2.0]},
        "solver": {"tau0": 0.5},
        "reference": {
            "tau": 0.7495,
            "J": 0.5558,
            "rows": [
                {"method": "ICLOCS2", "tau": 0.7495, "J": 0.5558, "time_s": None, "iterations": None},
                {"method": "HMPMAS", "tau": 0.7230, "x_s": [0.2368], "J": None, "time_s": 31.0038, "iterations": 19},
                {"method": "GEL", "tau": 0.7495, "J": 0.5558, "time_s": 16.8556, "iterations": 5},
            ],
        },
    },
    "ex2-linear-terminal": {
        "description": "planar linear modes, line x1 + x2 = 7, quadratic terminal cost",
        "origin": "benchmark example 2",
        "template": "linear",
        "modes": {
            "A1": [[1.5, 0.0], [0.0, 1.0]],
            "A2": [[0.5, 0.866], [0.866, -0.5]],
            "b": [1.0, 1.0],
            "w": [0.5, 0.5],
        },
        "interface": {"kind": "linear", "normal": [1.0, 1.0], "time_coeff": 0.0, "offset": -7.0},
        "x0": [1.0, 1.0],
        "t0": 0.0,
        "tf": 2.0,
        "terminal": {"kind": "quadratic", "target": [10.0, 6.0], "weight": [0.5, 0.5]},
        "solver": {"tau0": 1.5},
        "reference": {
            "tau": 1.1625,
            "J": 0.1130,
            "x_s": [4.5562, 2.4438],
            "rows": [
                {"method": "ICLOCS2", "tau": 1.1624, "x_s": [4.5556, 2.4444], "J": 0.1130, "time_s": None, "iterations": None},
                {"method": "HMPMAS", "tau": 1.1630, "x_s": [4.5456, 2.4326], "J": None, "time_s": 83.1040, "iterations": 20},
                {"method": "GEL", "tau": 1.1625, "x_s": [4.5562, 2.4438], "J": 0.1130, "time_s": 21.3326, "iterations": 5},
            ],
        },
    },
    "ex3-bilinear-tv": {
        "description": "bilinear scalar system, moving interface e t - x = 0",
        "origin": "benchmark example 3",
        "template": "bilinear",
        "modes": {"a": [1.0, -1.0], "w": [0.5, 0.5]},
        # oriented so that g(x0, t0) < 0 holds in mode 1
        "interface": {"kind": "linear", "normal": [-1.0], "time_coeff": math.e, "offset": 0.0},
        "x0": [1.0],
        "t0": 0.0,
        "tf": 2.0,
        "terminal": {"kind": "fixed", "state": [1.0]},
        "solver": {"tau0": 0.5},
        "reference": {
            "tau": 1.0004,
            "J": 8.1008e-04,
            "rows": [
                {"method": "ICLOCS", "tau": 1.0000, "J": 0.0, "time_s": None, "iterations": None},
                {"method": "HMPMAS", "tau": 0.9678, "J": 0.0032, "time_s": 576.2577, "iterations": 102},
                {"method": "GEL", "tau": 1.0004, "J": 8.1008e-04, "time_s": 45.2587, "iterations": 5},
            ],
        },
    },
}

# Identical modes: the switch is fictitious and the co-state must not jump.
IDENTICAL_MODES_SPEC: dict = {
    "name": "identical-modes",
    "description": "double integrator in both modes, unit-circle interface",
    "origin": "degenerate check",
    "template": "double-integrator",
    "modes": {"a": [1.0, 1.0], "w": [0.5, 0.5]},
    "interface": {"kind": "unit-circle"},
    "x0": [0.0, 0.0],
    "t0": 0.0,
    "tf": 2.0,
    "terminal": {"kind": "fixed", "state": [2.0, 2.0]},
    "solver": {"tau0": 0.5},
}


def registry_names() -> list[str]:
    return list(_REGISTRY)


def registry_spec(name: str) -> dict:
    """Deep copy of the declarative description of a registered problem."""
    if name not in _REGISTRY:
        raise NotFound(name, _REGISTRY)
    spec = copy.deepcopy(_REGISTRY[name])
    spec["name"] = name
    return spec


def registry_get(name: str, **overrides) -> SwitchedOCP:
    """Build a registered problem, optionally overriding top-level numeric fields."""
    spec = registry_spec(name)
    for key, value in overrides.items():
        if key not in ("x0", "t0", "tf", "modes", "interface", "terminal"):
            raise ContractViolation(f"cannot override {key!r}")
        if isinstance(value, dict) and isinstance(spec.get(key), dict):
            spec[key].update(value)
        else:
            spec[key] = value
    return build_problem(spec)


def _build_interface(desc: dict, n: int):
    kind = desc.get("kind")
    if kind == "unit-circle":
        if n != 2:
            raise ProblemFileError("unit-circle interface needs n = 2", field="interface.kind")
        return circle_interface((0.0, 0.0), 1.0, name="unit-circle")
    if kind == "circle":
        if n != 2:
            raise ProblemFileError("circle interface needs n = 2", field="interface.kind")
        return circle_interface(desc.get("center", (0.0, 0.0)), float(desc.get("radius", 1.0)), name="circle")
    if kind == "linear":
        if "normal" not in desc:
            raise ProblemFileError("missing normal vector", field="interface.normal")
        normal = np.asarray(desc["normal"], dtype=float).ravel()
        if normal.size != n:
            raise ProblemFileError(f"normal must have {n} entries", field="interface.normal")
        return linear_interface(normal, float(desc.get("time_coeff", 0.0)), float(desc.get("offset", 0.0)))
    raise ProblemFileError(f"unknown interface kind {kind!r} (linear, unit-circle, circle)", field="interface.kind")


def _build_terminal(desc: dict, n: int):
    kind = desc.get("kind")
    if kind == "fixed":
        state = np.asarray(desc.get("state", []), dtype=float).ravel()
        if state.size != n:
            raise ProblemFileError(f"terminal state must have {n} entries", field="terminal.state")
        return FixedState(state)
    if kind == "quadratic":
        target = np.asarray(desc.get("target", []), dtype=float).ravel()
        if target.size != n:
            raise ProblemFileError(f"terminal target must have {n} entries", field="terminal.target")
        weight = np.broadcast_to(np.asarray(desc.get("weight", 0.5), dtype=float), (n,)).copy()
        return TerminalCost(
            phi=lambda x: np.sum(weight * (x - target) ** 2, axis=-1),
            grad=lambda x: 2.0 * weight * (x - target),
            aim=target,
        )
    raise ProblemFileError(f"unknown terminal kind {kind!r} (fixed, quadratic)", field="terminal.kind")


def build_problem(spec: dict) -> SwitchedOCP:
    """Instantiate a problem from its declarative description."""
    template = spec.get("template")
    if template not in TEMPLATES:
        raise ProblemFileError(f"unknown template {template!r}; available: {', '.join(TEMPLATES)}", field="template")
    builder = TEMPLATES[template][0]
    try:
        mode1, mode2, cost1, cost2, control, n, m_dim = builder(**spec.get("modes", {}))
    except TypeError as exc:
        raise ProblemFileError(str(exc), field="modes") from exc
    if "n" in spec and int(spec["n"]) != n:
        raise ProblemFileError(f"template {template!r} has n={n}", field="n")
    if "m" in spec and int(spec["m"]) != m_dim:
        raise ProblemFileError(f"template {template!r} has m={m_dim}", field="m")
    for key in ("x0", "tf", "interface", "terminal"):
        if key not in spec:
            raise ProblemFileError("required field missing", field=key)
    interface = _build_interface(spec["interface"], n)
    terminal = _build_terminal(spec["terminal"], n)
    x0 = np.asarray(spec["x0"], dtype=float).ravel()
    if x0.size != n:
        raise ProblemFileError(f"x0 must have {n} entries", field="x0")
    try:
        return SwitchedOCP(
            mode1=mode1,
            mode2=mode2,
            cost1=cost1,
            cost2=cost2,
            interface=interface,
            x0=x0,
            t0=float(spec.get("t0", 0.0)),
            tf=float(spec["tf"]),
            terminal=terminal,
            control=control,
            n=n,
            m_dim=m_dim,
            name=spec.get("name", ""),
            description=spec.get("description", ""),
            source=spec.get("origin", ""),
            params=copy.deepcopy(spec),
        )
    except ContractViolation as exc:
        raise ProblemFileError(str(exc), field=_field_of(str(exc))) from exc


def _field_of(message: str):
    """Best guess at the field a model-level validation message refers to."""
    for needle, field in (("initial state", "x0"), ("x0", "x0"), ("t0 < tf", "tf"), ("terminal", "terminal.state")):
        if needle in message:
            return field
    return None
