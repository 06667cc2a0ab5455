"""TOML problem files.

A file holds the same declarative description as a registry entry::

    name = "my-problem"
    template = "double-integrator"
    x0 = [0.0, 0.0]
    tf = 2.0

    [modes]
    a = [1.0, 1.0]
    w = [0.5, 0.5]

    [interface]
    kind = "unit-circle"

    [terminal]
    kind = "fixed"
    state = [2.0, 2.0]

Errors name the file, the line and the offending field where possible.
"""

from __future__ import annotations

import re
from pathlib import Path

import tomli

from .errors import NotFound, ProblemFileError
from .problem import SwitchedOCP
from .registry import build_problem, registry_names, registry_spec

ALLOWED_KEYS = {
    "name", "description", "origin", "template", "n", "m", "modes", "interface",
    "x0", "t0", "tf", "terminal", "solver", "reference",
}
_SECTION_KEYS = {
    "solver": {"tau0", "tol", "delta_tau", "alpha", "max_iters", "formulation"},
    "interface": {"kind", "normal", "time_coeff", "offset", "center", "radius"},
    "terminal": {"kind", "state", "target", "weight"},
}


def _line_of(text: str, field: str | None) -> int | None:
    """Line number where ``field`` (``key`` or ``section.key``) is defined."""
    if not field:
        return None
    head, _, tail = field.partition(".")
    section = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        header = re.match(r"^\[\s*([^\]]+?)\s*\]$", line)
        if header:
            section = header.group(1)
            if not tail and section == head:
                return i
            continue
        key = re.match(r"^([A-Za-z0-9_\-]+)\s*=", line)
        if not key:
            continue
        if tail and section == head and key.group(1) == tail.split(".")[0]:
            return i
        if not tail and section is None and key.group(1) == head:
            return i
    return None


def parse_problem_text(text: str, path=None) -> tuple[dict, SwitchedOCP]:
    """Parse TOML text into a (spec, problem) pair."""
    try:
        spec = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ProblemFileError(f"malformed TOML: {exc}", path=path, line=int(m.group(1)) if m else None) from exc
    for key in spec:
        if key not in ALLOWED_KEYS:
            raise ProblemFileError(
                f"unknown field; allowed: {', '.join(sorted(ALLOWED_KEYS))}", path=path, field=key, line=_line_of(text, key)
            )
    for section, allowed in _SECTION_KEYS.items():
        for key in spec.get(section, {}):
            if key not in allowed:
                field = f"{section}.{key}"
                raise ProblemFileError(
                    f"unknown {section} field; allowed: {', '.join(sorted(allowed))}",
                    path=path, field=field, line=_line_of(text, field),
                )
    if "name" not in spec:
        spec["name"] = Path(path).stem if path is not None else "unnamed"
    try:
        problem = build_problem(spec)
    except ProblemFileError as exc:
        raise ProblemFileError(
            exc.message,
            path=path,
            field=exc.field,
            line=_line_of(text, exc.field),
        ) from exc
    except (TypeError, ValueError) as exc:
        raise ProblemFileError(str(exc), path=path) from exc
    return spec, problem


def load_problem_file(path) -> tuple[dict, SwitchedOCP]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemFileError(f"cannot read file: {exc.strerror}", path=path) from exc
    return parse_problem_text(text, path)


def load_problem_dir(directory) -> dict[str, dict]:
    """All ``*.toml`` problem specs in ``directory``, keyed by name, in file-name order."""
    out = {}
    for path in sorted(Path(directory).glob("*.toml")):
        spec, _ = load_problem_file(path)
        out[spec["name"]] = spec
    return out


def resolve_problem(name_or_path: str, problems_dir=None) -> tuple[dict, SwitchedOCP]:
    """Look up a registry name, a name in ``problems_dir``, or a path to a problem file."""
    if name_or_path in registry_names():
        spec = registry_spec(name_or_path)
        return spec, build_problem(spec)
    if problems_dir is not None:
        user = load_problem_dir(problems_dir)
        if name_or_path in user:
            return user[name_or_path], build_problem(user[name_or_path])
    path = Path(name_or_path)
    if path.suffix == ".toml" or path.exists():
        return load_problem_file(path)
    available = registry_names()
    if problems_dir is not None:
        available += list(load_problem_dir(problems_dir))
    raise NotFound(name_or_path, available)
