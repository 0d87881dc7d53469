"""Free-format MPS reader/writer.

Layout written::

    NAME          <name>
    ROWS
     N  COST
     L  <row>            (L, G or E)
    COLUMNS
        <col>  COST  <c>  <row>  <a>
    RHS
        RHS  <row>  <b>
        RHS  COST  <-offset>
    BOUNDS
     LO|UP|FX|FR|MI BND <col> [<value>]
    ENDATA

Names must not contain whitespace.  Numbers are written with 17 significant
digits so a write/read cycle is bit-exact.  The objective constant uses the
usual convention that the RHS entry of the objective row is its negation.
"""
from __future__ import annotations

import math
from pathlib import Path

from ..lp import LinearProgram

OBJ = "COST"


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _num(v: float) -> str:
    text = format(v, ".17g")
    return "0" if text in ("0", "-0") else text


def _check_name(name: str) -> str:
    if not name or any(ch.isspace() for ch in name):
        raise ValueError(f"MPS names may not contain whitespace: {name!r}")
    return name


def write_standard_format(lp: LinearProgram) -> str:
    out = [f"NAME          {_check_name(lp.name)}", "ROWS", f" N  {OBJ}"]
    for name, sense in zip(lp.row_names, lp.senses):
        out.append(f" {sense}  {_check_name(name)}")
    out.append("COLUMNS")
    by_col: list[list[tuple[int, float]]] = [[] for _ in range(lp.num_vars)]
    for r, c, v in lp.triplets():
        by_col[c].append((r, v))
    for j, name in enumerate(lp.var_names):
        _check_name(name)
        entries = sorted(by_col[j])
        cost = lp.cost[j]
        if cost != 0.0 or not entries:
            out.append(f"    {name}  {OBJ}  {_num(cost)}")
        for r, v in entries:
            out.append(f"    {name}  {lp.row_names[r]}  {_num(v)}")
    out.append("RHS")
    for name, b in zip(lp.row_names, lp.rhs):
        if b != 0.0:
            out.append(f"    RHS  {name}  {_num(b)}")
    if lp.objective_offset != 0.0:
        out.append(f"    RHS  {OBJ}  {_num(-lp.objective_offset)}")
    out.append("BOUNDS")
    for name, lo, up in zip(lp.var_names, lp.lower, lp.upper):
        if lo == up:
            out.append(f" FX BND  {name}  {_num(lo)}")
            continue
        if lo == -math.inf and up == math.inf:
            out.append(f" FR BND  {name}")
            continue
        if lo == -math.inf:
            out.append(f" MI BND  {name}")
        elif lo != 0.0:
            out.append(f" LO BND  {name}  {_num(lo)}")
        if up != math.inf:
            out.append(f" UP BND  {name}  {_num(up)}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def read_standard_format(text: str) -> LinearProgram:
    section = None
    name = "lp"
    obj_row: str | None = None
    rows: list[tuple[str, str]] = []
    row_index: dict[str, int] = {}
    cols: dict[str, list[tuple[str, float]]] = {}
    col_order: list[str] = []
    rhs: dict[str, float] = {}
    bounds: dict[str, list[float]] = {}
    ended = False

    def number(tok: str, lineno: int) -> float:
        try:
            return float(tok)
        except ValueError:
            raise ParseError(lineno, f"expected a number, got {tok!r}") from None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if not line.strip() or line.lstrip().startswith("*"):
            continue
        if ended:
            raise ParseError(lineno, "content after ENDATA")
        toks = line.split()
        if not line[0].isspace():
            head = toks[0].upper()
            if head == "NAME":
                name = toks[1] if len(toks) > 1 else "lp"
                section = "NAME"
            elif head in ("ROWS", "COLUMNS", "RHS", "BOUNDS"):
                section = head
            elif head == "RANGES":
                raise ParseError(lineno, "RANGES section is not supported")
            elif head == "OBJSENSE":
                raise ParseError(lineno, "OBJSENSE section is not supported (minimisation only)")
            elif head == "ENDATA":
                ended = True
            else:
                raise ParseError(lineno, f"unknown section {toks[0]!r}")
            continue
        if section == "ROWS":
            if len(toks) != 2 or toks[0].upper() not in ("N", "L", "G", "E"):
                raise ParseError(lineno, f"malformed ROWS entry {line.strip()!r}")
            kind, rname = toks[0].upper(), toks[1]
            if kind == "N":
                if obj_row is not None:
                    raise ParseError(lineno, "more than one objective row")
                obj_row = rname
            else:
                if rname in row_index:
                    raise ParseError(lineno, f"duplicate row {rname!r}")
                row_index[rname] = len(rows)
                rows.append((rname, kind))
        elif section == "COLUMNS":
            if "'MARKER'" in toks:
                raise ParseError(lineno, "integer markers are not supported")
            if len(toks) not in (3, 5):
                raise ParseError(lineno, f"malformed COLUMNS entry {line.strip()!r}")
            cname = toks[0]
            if cname not in cols:
                cols[cname] = []
                col_order.append(cname)
            for k in range(1, len(toks), 2):
                rname, val = toks[k], number(toks[k + 1], lineno)
                if rname != obj_row and rname not in row_index:
                    raise ParseError(lineno, f"unknown row {rname!r}")
                cols[cname].append((rname, val))
        elif section == "RHS":
            if len(toks) not in (3, 5):
                raise ParseError(lineno, f"malformed RHS entry {line.strip()!r}")
            for k in range(1, len(toks), 2):
                rname, val = toks[k], number(toks[k + 1], lineno)
                if rname != obj_row and rname not in row_index:
                    raise ParseError(lineno, f"unknown row {rname!r}")
                rhs[rname] = val
        elif section == "BOUNDS":
            if len(toks) < 3:
                raise ParseError(lineno, f"malformed BOUNDS entry {line.strip()!r}")
            kind, cname = toks[0].upper(), toks[2]
            if cname not in cols:
                raise ParseError(lineno, f"bound on unknown column {cname!r}")
            b = bounds.setdefault(cname, [0.0, math.inf])
            if kind in ("FR", "MI", "PL"):
                if kind == "FR":
                    b[0], b[1] = -math.inf, math.inf
                elif kind == "MI":
                    b[0] = -math.inf
                else:
                    b[1] = math.inf
                continue
            if len(toks) != 4:
                raise ParseError(lineno, f"bound {kind} needs a value")
            val = number(toks[3], lineno)
            if kind == "LO":
                b[0] = val
            elif kind == "UP":
                b[1] = val
            elif kind == "FX":
                b[0] = b[1] = val
            else:
                raise ParseError(lineno, f"unsupported bound type {kind!r}")
        else:
            raise ParseError(lineno, "data line outside of a section")
    if obj_row is None and (rows or cols):
        raise ParseError(0, "no objective (N) row")

    lp = LinearProgram(name=name)
    for cname in col_order:
        lo, up = bounds.get(cname, [0.0, math.inf])
        cost = sum(v for r, v in cols[cname] if r == obj_row)
        lp.add_var(cname, lo, up, cost)
    per_row: list[list[tuple[int, float]]] = [[] for _ in rows]
    for j, cname in enumerate(col_order):
        for rname, val in cols[cname]:
            if rname != obj_row:
                per_row[row_index[rname]].append((j, val))
    for i, (rname, kind) in enumerate(rows):
        lp.add_row(rname, per_row[i], kind, rhs.get(rname, 0.0))
    if obj_row is not None and obj_row in rhs:
        lp.objective_offset = -rhs[obj_row]
    return lp


def write_file(lp: LinearProgram, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(write_standard_format(lp), encoding="utf-8")
    return path


def read_file(path: str | Path) -> LinearProgram:
    return read_standard_format(Path(path).read_text(encoding="utf-8"))
