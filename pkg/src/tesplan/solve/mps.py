"""Fixed-format MPS export, a matching reader, and solution import.

Row and column names are mangled to eight characters (``R0000012``,
``C0000341``) in model order; ``names.map`` next to the MPS file maps each
mangled name back to its semantic key.  Numbers are written with ``repr`` so
that a round trip is exact, which lets long values run past the classic
12-character field; the reader therefore splits on whitespace.  The objective
constant goes on the objective row of the RHS section with flipped sign, the
convention used by most solvers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ..errors import NameCollision, ParseError

OBJ_ROW = "COST"
MAX_INDEX = 10**7


def col_name(j: int) -> str:
    if j >= MAX_INDEX:
        raise NameCollision(f"column index {j} does not fit an 8-character name")
    return f"C{j:07d}"


def row_name(i: int) -> str:
    if i >= MAX_INDEX:
        raise NameCollision(f"row index {i} does not fit an 8-character name")
    return f"R{i:07d}"


def names_map_path(mps_path) -> Path:
    return Path(mps_path).with_name("names.map")


def _num(v: float) -> str:
    return repr(float(v))


def _line(code, name, a="", va="", b="", vb=""):
    """One data line laid out on the fixed-format field grid."""
    s = f" {code:<2} {name:<8}"
    if a:
        s += f"  {a:<8}  {va:>12}"
    if b:
        s += f"   {b:<8}  {vb:>12}"
    return s.rstrip()


def export_mps(model, path, name: str = "TESPLAN") -> Path:
    """Write ``model`` to ``path`` and its name table to ``names.map`` beside it."""
    path = Path(path)
    A = sp.csc_matrix(model.A)
    A.sort_indices()
    rows = [row_name(i) for i in range(model.n_rows)]
    cols = [col_name(j) for j in range(model.n_vars)]
    out = [f"NAME          {name}", "ROWS", _line("N", OBJ_ROW)]
    out += [_line(s, r) for s, r in zip(model.sense, rows)]
    out.append("COLUMNS")
    in_int = False
    marker = 0
    for j, c in enumerate(cols):
        if bool(model.is_int[j]) != in_int:
            kind = "'INTORG'" if not in_int else "'INTEND'"
            out.append(f"    MARKER{marker:04d}  'MARKER'                 {kind}")
            marker += 1
            in_int = not in_int
        entries = []
        if model.obj[j] != 0.0:
            entries.append((OBJ_ROW, model.obj[j]))
        for k in range(A.indptr[j], A.indptr[j + 1]):
            entries.append((rows[A.indices[k]], A.data[k]))
        if not entries:
            # keep the column declared so its bounds and kind survive the trip
            entries.append((OBJ_ROW, 0.0))
        for k in range(0, len(entries), 2):
            pair = entries[k:k + 2]
            fields = [(r, _num(v)) for r, v in pair]
            if len(fields) == 2:
                out.append(_line("", c, fields[0][0], fields[0][1], fields[1][0], fields[1][1]))
            else:
                out.append(_line("", c, fields[0][0], fields[0][1]))
    if in_int:
        out.append(f"    MARKER{marker:04d}  'MARKER'                 'INTEND'")
    out.append("RHS")
    if model.obj_constant != 0.0:
        out.append(_line("", "RHS", OBJ_ROW, _num(-model.obj_constant)))
    for i, r in enumerate(rows):
        if model.rhs[i] != 0.0:
            out.append(_line("", "RHS", r, _num(model.rhs[i])))
    out.append("RANGES")
    out.append("BOUNDS")
    for j, c in enumerate(cols):
        lo, hi = float(model.lb[j]), float(model.ub[j])
        if lo == hi:
            out.append(_line("FX", "BND", c, _num(lo)))
            continue
        if lo == -np.inf and hi == np.inf:
            out.append(_line("FR", "BND", c))
            continue
        if lo == -np.inf:
            out.append(_line("MI", "BND", c))
        elif lo != 0.0 or hi < 0.0:
            out.append(_line("LO", "BND", c, _num(lo)))
        if hi != np.inf:
            out.append(_line("UP", "BND", c, _num(hi)))
        elif model.is_int[j]:
            # some readers default integer columns to [0, 1] unless told otherwise
            out.append(_line("PL", "BND", c))
    out.append("ENDATA")
    path.write_text("\n".join(out) + "\n")

    lines = [f"{r} {key}" for r, key in zip(rows, model.row_names)]
    lines += [f"{c} {key}" for c, key in zip(cols, model.var_names)]
    names_map_path(path).write_text("\n".join(lines) + ("\n" if lines else ""))
    return path


@dataclass
class MpsProblem:
    """Contents of an MPS file in array form, names as written in the file."""

    name: str
    row_names: list
    sense: np.ndarray
    rhs: np.ndarray
    ranges: dict
    col_names: list
    obj: np.ndarray
    obj_constant: float
    A: sp.csr_matrix
    lb: np.ndarray
    ub: np.ndarray
    is_int: np.ndarray
    entries: list = field(default_factory=list)

    def coefficient_multiset(self, rename=None):
        """Sorted (row, column, value) triples, objective row included."""
        rename = rename or {}
        trip = [(rename.get(r, r), rename.get(c, c), v) for r, c, v in self.entries if v != 0.0]
        return sorted(trip)


def read_mps(path) -> MpsProblem:
    """Parse an MPS file as written by :func:`export_mps` (free-format tolerant)."""
    text = Path(path).read_text().splitlines()
    section = None
    name = ""
    obj_row = None
    rows, row_sense = [], {}
    cols, col_index = [], {}
    coefs = {}
    obj = {}
    rhs, ranges = {}, {}
    bounds = {}
    ints = set()
    in_int = False
    constant = 0.0

    def number(tok, lineno):
        try:
            return float(tok)
        except ValueError:
            raise ParseError(f"line {lineno}: bad number {tok!r}") from None

    for lineno, raw in enumerate(text, 1):
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            head = raw.split()
            section = head[0].upper()
            if section == "NAME":
                name = head[1] if len(head) > 1 else ""
            elif section == "ENDATA":
                break
            elif section not in ("ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS"):
                raise ParseError(f"line {lineno}: unknown section {section!r}")
            continue
        tok = raw.split()
        if section == "ROWS":
            if len(tok) != 2 or tok[0] not in ("N", "L", "G", "E"):
                raise ParseError(f"line {lineno}: bad row line")
            if tok[0] == "N":
                if obj_row is None:
                    obj_row = tok[1]
                continue
            if tok[1] in row_sense:
                raise ParseError(f"line {lineno}: duplicate row {tok[1]}")
            rows.append(tok[1])
            row_sense[tok[1]] = tok[0]
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1] == "'MARKER'":
                if tok[2] == "'INTORG'":
                    in_int = True
                elif tok[2] == "'INTEND'":
                    in_int = False
                else:
                    raise ParseError(f"line {lineno}: bad marker {tok[2]}")
                continue
            if len(tok) not in (3, 5):
                raise ParseError(f"line {lineno}: bad column line")
            c = tok[0]
            if c not in col_index:
                col_index[c] = len(cols)
                cols.append(c)
            if in_int:
                ints.add(c)
            for r, v in zip(tok[1::2], tok[2::2]):
                val = number(v, lineno)
                if r == obj_row:
                    obj[c] = obj.get(c, 0.0) + val
                elif r in row_sense:
                    coefs[(r, c)] = coefs.get((r, c), 0.0) + val
                else:
                    raise ParseError(f"line {lineno}: unknown row {r}")
        elif section in ("RHS", "RANGES"):
            if len(tok) not in (3, 5):
                raise ParseError(f"line {lineno}: bad {section} line")
            for r, v in zip(tok[1::2], tok[2::2]):
                val = number(v, lineno)
                if section == "RHS" and r == obj_row:
                    constant = -val
                elif r in row_sense:
                    (rhs if section == "RHS" else ranges)[r] = val
                else:
                    raise ParseError(f"line {lineno}: unknown row {r}")
        elif section == "BOUNDS":
            kind = tok[0]
            if len(tok) < 3:
                raise ParseError(f"line {lineno}: bad bound line")
            c = tok[2]
            if c not in col_index:
                raise ParseError(f"line {lineno}: bound on unknown column {c}")
            val = number(tok[3], lineno) if len(tok) > 3 else None
            lo, hi = bounds.get(c, (0.0, np.inf))
            if kind == "UP":
                hi = val
                if val < 0 and lo == 0.0:
                    lo = -np.inf
            elif kind == "LO":
                lo = val
            elif kind == "FX":
                lo = hi = val
            elif kind == "FR":
                lo, hi = -np.inf, np.inf
            elif kind == "MI":
                lo = -np.inf
            elif kind == "PL":
                hi = np.inf
            elif kind == "BV":
                lo, hi = 0.0, 1.0
                ints.add(c)
            elif kind in ("LI", "UI"):
                ints.add(c)
                if kind == "LI":
                    lo = val
                else:
                    hi = val
            else:
                raise ParseError(f"line {lineno}: unknown bound type {kind}")
            bounds[c] = (lo, hi)
        else:
            raise ParseError(f"line {lineno}: data outside a section")
    if obj_row is None:
        raise ParseError("no objective row")

    ri = {r: i for i, r in enumerate(rows)}
    entries = [(obj_row, c, v) for c, v in obj.items()]
    r_idx, c_idx, vals = [], [], []
    for (r, c), v in coefs.items():
        r_idx.append(ri[r])
        c_idx.append(col_index[c])
        vals.append(v)
        entries.append((r, c, v))
    A = sp.csr_matrix((vals, (r_idx, c_idx)), shape=(len(rows), len(cols)))
    A.sort_indices()
    lb = np.array([bounds.get(c, (0.0, np.inf))[0] for c in cols], dtype=float)
    ub = np.array([bounds.get(c, (0.0, np.inf))[1] for c in cols], dtype=float)
    return MpsProblem(
        name=name,
        row_names=rows,
        sense=np.array([row_sense[r] for r in rows], dtype="<U1"),
        rhs=np.array([rhs.get(r, 0.0) for r in rows], dtype=float),
        ranges=ranges,
        col_names=cols,
        obj=np.array([obj.get(c, 0.0) for c in cols], dtype=float),
        obj_constant=constant,
        A=A,
        lb=lb,
        ub=ub,
        is_int=np.array([c in ints for c in cols], dtype=bool),
        entries=entries,
    )


def read_names_map(path) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        mangled, sep, key = line.partition(" ")
        if not sep or not key:
            raise ParseError(f"names.map line {lineno}: expected '<mangled> <key>'")
        if mangled in out:
            raise NameCollision(f"names.map line {lineno}: {mangled} mapped twice")
        out[mangled] = key
    return out


def model_multiset(model):
    """The (row, column, value) triples of ``model`` keyed by semantic names."""
    A = model.A.tocoo()
    trip = [("__objective__", model.var_names[j], float(v)) for j, v in enumerate(model.obj) if v != 0.0]
    trip += [(model.row_names[i], model.var_names[j], float(v)) for i, j, v in zip(A.row, A.col, A.data) if v != 0.0]
    return sorted(trip)


def import_solution(model, path, names_map=None) -> np.ndarray:
    """Primal vector from a ``<mangled name> <value>`` file; absent columns are zero."""
    mapping = read_names_map(names_map) if names_map is not None else {
        col_name(j): key for j, key in enumerate(model.var_names)}
    x = np.zeros(model.n_vars)
    seen = set()
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#*":
            continue
        tok = s.split()
        if len(tok) != 2:
            raise ParseError(f"{path} line {lineno}: expected 'name value'")
        key = mapping.get(tok[0])
        if key is None or key not in model.registry:
            if key is not None and key in model.row_registry:
                continue
            raise ParseError(f"{path} line {lineno}: unknown column {tok[0]}")
        if key in seen:
            raise ParseError(f"{path} line {lineno}: {tok[0]} given twice")
        seen.add(key)
        try:
            x[model.registry[key]] = float(tok[1])
        except ValueError:
            raise ParseError(f"{path} line {lineno}: bad value {tok[1]!r}") from None
    return x


def write_values(model, x, path) -> Path:
    """Write a primal vector in the import format (handy for external solvers' output)."""
    path = Path(path)
    path.write_text("".join(f"{col_name(j)} {_num(v)}\n" for j, v in enumerate(x)))
    return path
