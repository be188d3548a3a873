"""Plain-text serialization of binary ILPs (minimize c^T a over a in {0,1}^m).

Format, one record per line, ``#`` starts a comment::

    vars 3
    var 0 -1.5 appear E>4
    var 1 0.0
    var 2 0.25 continuation 4>9
    row le 1.0 0:1.0 1:1.0
    row eq 0.0 0:1.0 2:-1.0

A ``var`` line holds index and cost, optionally followed by the assignment
kind and its endpoints (``sources>targets``, comma separated, ``E`` for the
end node); the annotation is informational and ignored when reading.
Unlisted costs are zero. Floats are written with ``repr`` so a round trip is
exact and the text is byte-stable.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .ilp_solver import IlpProblem, IlpSolution, Row
from .image_model import DataError


def _endpoints(ids) -> str:
    return ",".join("E" if h < 0 else str(h) for h in ids)


def dumps(p: IlpProblem, variables=None) -> str:
    """Text form of ``p``; ``variables`` (AssignmentVariables) add kind and endpoints."""
    if variables is not None and len(variables) != p.m:
        raise ValueError("one variable description per column required")
    lines = [f"vars {p.m}"]
    for j, v in enumerate(p.c):
        line = f"var {j} {float(v)!r}"
        if variables is not None:
            a = variables[j]
            line += f" {a.kind} {_endpoints(a.sources)}>{_endpoints(a.targets)}"
        lines.append(line)
    for r in p.rows:
        terms = " ".join(f"{int(i)}:{float(a)!r}" for i, a in zip(r.indices, r.coefs))
        lines.append(f"row {r.relation} {float(r.rhs)!r} {terms}".rstrip())
    return "\n".join(lines) + "\n"


def loads(text: str) -> IlpProblem:
    m = None
    c = None
    rows = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "vars":
                if m is not None:
                    raise ValueError("duplicate vars line")
                m = int(tok[1])
                if m < 0:
                    raise ValueError("negative variable count")
                c = np.zeros(m)
            elif m is None:
                raise ValueError("'vars' must come first")
            elif tok[0] == "var":
                j = int(tok[1])
                if not 0 <= j < m:
                    raise ValueError(f"variable {j} out of range")
                c[j] = float(tok[2])
            elif tok[0] == "row":
                if tok[1] not in ("le", "eq"):
                    raise ValueError(f"unknown relation {tok[1]!r}")
                pairs = [t.split(":") for t in tok[3:]]
                idx = np.array([int(i) for i, _ in pairs], dtype=np.int64)
                if idx.size and (idx.min() < 0 or idx.max() >= m):
                    raise ValueError("row references a variable out of range")
                rows.append(Row(idx, np.array([float(a) for _, a in pairs]), tok[1], float(tok[2])))
            else:
                raise ValueError(f"unknown record {tok[0]!r}")
        except (ValueError, IndexError) as exc:
            raise DataError(f"line {n}: {exc}") from exc
    if m is None:
        raise DataError("missing 'vars' line")
    return IlpProblem(c, rows)


def load(path) -> IlpProblem:
    try:
        return loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def dump(p: IlpProblem, path, variables=None) -> None:
    Path(path).write_text(dumps(p, variables))


def solution_json(sol: IlpSolution) -> dict:
    return {"status": sol.status,
            "objective": sol.objective if sol.status == "optimal" else None,
            "assignment": [int(v) for v in sol.assignment],
            "nodes": sol.node_count}
