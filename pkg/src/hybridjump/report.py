"""Run reports and delimited-text outputs.

Floats are written with 17 significant digits so that parsing and
re-serializing a report reproduces it byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .jump import SwitchPointData, compute_jump, hamiltonian_gap
from .problem import ModeId, SwitchedOCP, optimal_control

SCHEMA_VERSION = 1


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = f"{x:.17g}"
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _plain(obj: Any) -> Any:
    """Convert numpy values and dataclasses to JSON-ready builtins."""
    if hasattr(obj, "__dataclass_fields__"):
        return {f.name: _plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):  # str enums
        return obj.value
    return obj


def dumps(obj: Any, indent: int = 2) -> str:
    """Deterministic JSON with 17-significant-digit floats."""

    def enc(o, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if o is None:
            return "null"
        if isinstance(o, bool):
            return "true" if o else "false"
        if isinstance(o, int):
            return str(o)
        if isinstance(o, float):
            return _fmt_float(o)
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, list):
            if not o:
                return "[]"
            if all(isinstance(v, (int, float)) and not isinstance(v, bool) or v is None for v in o):
                return "[" + ", ".join(enc(v, level + 1) for v in o) + "]"
            return "[\n" + ",\n".join(pad + enc(v, level + 1) for v in o) + "\n" + end + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(_plain(obj), 0) + "\n"


def parameter_hash(spec: dict) -> str:
    """SHA-256 of the canonical serialization of a problem description."""
    canonical = dumps(_sorted(spec), indent=0)
    return hashlib.sha256(canonical.encode()).hexdigest()


def _sorted(obj):
    if isinstance(obj, dict):
        return {k: _sorted(obj[k]) for k in sorted(obj)}
    if isinstance(obj, (list, tuple)):
        return [_sorted(v) for v in obj]
    return obj


def is_fictitious_switch(p: SwitchedOCP, d: SwitchPointData, rtol: float = 1e-9) -> bool:
    """True when both modes have the same dynamics and running cost at the switch point."""
    out = []
    for u in (d.u_minus, d.u_plus):
        f1, f2 = p.mode1.rhs(d.x_s, u, d.tau), p.mode2.rhs(d.x_s, u, d.tau)
        l1, l2 = float(p.cost1.value(d.x_s, u, d.tau)), float(p.cost2.value(d.x_s, u, d.tau))
        out.append(np.allclose(f1, f2, rtol=rtol, atol=rtol) and math.isclose(l1, l2, rel_tol=rtol, abs_tol=rtol))
    return all(out)


@dataclass
class RunReport:
    """Outcome of one solver run.

    Everything except ``timing`` is a deterministic function of the inputs
    when the fixed-step integrator is used.
    """

    problem: str
    parameter_hash: str
    solver: str
    status: str
    converged: bool
    tau_star: Optional[float] = None
    J_star: Optional[float] = None
    x_s: Optional[list] = None
    delta_lambda_empirical: Optional[list] = None
    delta_lambda_law: Optional[list] = None
    hamiltonian_gap: Optional[float] = None
    fictitious_switch: bool = False
    iterations: Optional[int] = None
    trace: list = field(default_factory=list)
    sweep: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)
    error: Optional[str] = None
    timing: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION
    tool_version: str = __version__

    def to_json(self) -> str:
        return dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        data = json.loads(text)
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {data.get('schema_version')!r}")
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json())
        return path


def fill_switch_fields(report: RunReport, p: SwitchedOCP, d: SwitchPointData) -> None:
    """Record switch point, both jumps and the Hamiltonian gap."""
    report.x_s = d.x_s.tolist()
    report.delta_lambda_empirical = d.delta_lambda.tolist()
    try:
        report.delta_lambda_law = compute_jump(d).delta_lambda.tolist()
    except Exception as exc:  # tangential crossing: the law is undefined here
        report.delta_lambda_law = None
        report.error = report.error or str(exc)
    report.hamiltonian_gap = hamiltonian_gap(p, d)
    report.fictitious_switch = is_fictitious_switch(p, d)


def write_table(path, header: list[str], rows) -> Path:
    """Comma-separated table with a one-line header and 17-digit floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) if isinstance(v, (int, np.integer, str)) else f"{float(v):.17g}" for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def trajectory_rows(p: SwitchedOCP, phases) -> tuple[list[str], list]:
    """Rows ``(phase, t, x, lam, u)`` for a sequence of ``(times, x, lam)`` per phase."""
    n = p.n
    header = ["phase", "t"] + [f"x{i + 1}" for i in range(n)] + [f"lam{i + 1}" for i in range(n)]
    rows, width = [], None
    for k, (times, X, Lam) in enumerate(phases, start=1):
        mode = ModeId(k)
        U = np.atleast_2d(optimal_control(p, mode, X, Lam, times).reshape(len(times), -1))
        width = U.shape[1]
        for i, t in enumerate(times):
            rows.append([k, t, *X[i], *Lam[i], *U[i]])
    header += [f"u{i + 1}" for i in range(width or 1)]
    return header, rows
