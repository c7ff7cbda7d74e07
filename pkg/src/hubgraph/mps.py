"""Fixed-format MPS emission and parsing.

Names are mangled to ``R<base36>`` / ``C<base36>`` so they always fit the
8-character name fields; the sidecar name map is the reverse lookup.
Numbers are written with ``repr`` so that a round trip is bit-exact.
"""

from __future__ import annotations

import numpy as np

from .assemble import SparseLP

OBJ_ROW = "OBJ"
RHS_SET = "RHS"
BOUND_SET = "BND"
SECTIONS = ("NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA")
UNSUPPORTED = ("RANGES", "SOS", "QUADOBJ", "QMATRIX", "QSECTION", "OBJSENSE", "OBJSENSE MAX")

_DIGITS = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"


class MpsError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def base36(n: int) -> str:
    if n == 0:
        return "0"
    out = []
    while n:
        n, r = divmod(n, 36)
        out.append(_DIGITS[r])
    return "".join(reversed(out))


def row_name(i: int) -> str:
    return "R" + base36(i)


def col_name(j: int) -> str:
    return "C" + base36(j)


def _num(x: float) -> str:
    return repr(float(x))


def _field_line(code: str, a: str, b: str = "", num: str = "") -> str:
    # standard columns 2-3, 5-12, 15-22, 25-36; long numbers simply run on
    line = f" {code:<2} {a:<8}"
    if b:
        line += f"  {b:<8}"
    if num:
        line += f"  {num:>12}"
    return line.rstrip()


def _nonzero(x: float) -> bool:
    return x != 0 or bool(np.signbit(x))


def emit_mps(lp: SparseLP) -> str:
    if lp.n_cols >= 36 ** 7 or lp.n_rows >= 36 ** 7:
        raise MpsError("too many rows or columns for 8-character names")
    out = [f"NAME          {lp.name[:8] or 'MODEL'}", "ROWS", f" N  {OBJ_ROW}"]
    for i, s in enumerate(lp.senses):
        out.append(f" {s}  {row_name(i)}")
    out.append("COLUMNS")
    order = np.lexsort((lp.rows, lp.cols))
    rows = lp.rows[order]
    cols = lp.cols[order]
    vals = lp.vals[order]
    starts = np.searchsorted(cols, np.arange(lp.n_cols + 1))
    for j in range(lp.n_cols):
        cname = col_name(j)
        lo, hi = starts[j], starts[j + 1]
        if _nonzero(lp.c[j]) or lo == hi:
            out.append(_field_line("", cname, OBJ_ROW, _num(lp.c[j])))
        for k in range(lo, hi):
            out.append(_field_line("", cname, row_name(int(rows[k])), _num(vals[k])))
    out.append("RHS")
    if _nonzero(lp.obj_const):
        out.append(_field_line("", RHS_SET, OBJ_ROW, _num(-lp.obj_const)))
    for i in np.flatnonzero((lp.rhs != 0) | np.signbit(lp.rhs)):
        out.append(_field_line("", RHS_SET, row_name(int(i)), _num(lp.rhs[i])))
    out.append("BOUNDS")
    for j in range(lp.n_cols):
        lb, ub = lp.lb[j], lp.ub[j]
        cname = col_name(j)
        if lb == ub:
            out.append(_field_line("FX", BOUND_SET, cname, _num(lb)))
            continue
        if lb == -np.inf:
            if ub == np.inf:
                out.append(_field_line("FR", BOUND_SET, cname))
                continue
            out.append(_field_line("MI", BOUND_SET, cname))
        elif _nonzero(lb):
            out.append(_field_line("LO", BOUND_SET, cname, _num(lb)))
        if ub != np.inf:
            out.append(_field_line("UP", BOUND_SET, cname, _num(ub)))
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def _label_field(v) -> str:
    return "" if v is None else str(v)


def emit_name_map(lp: SparseLP) -> str:
    """Tab-separated reverse lookup: mangled, kind, block, name, period."""
    out = ["mangled\tkind\tblock\tname\tt"]
    for i, lab in enumerate(lp.row_labels):
        out.append("\t".join((row_name(i), "row", str(lab[0]), str(lab[1]), _label_field(lab[2]))))
    for j, lab in enumerate(lp.col_labels):
        out.append("\t".join((col_name(j), "col", str(lab[0]), str(lab[1]), _label_field(lab[2]))))
    return "\n".join(out) + "\n"


def read_name_map(text: str) -> dict[str, tuple[str, str, str, int | None]]:
    out = {}
    lines = text.splitlines()
    if not lines or lines[0].split("\t")[0] != "mangled":
        raise MpsError("name map lacks its header")
    for n, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise MpsError("name map line needs 5 fields", n)
        mangled, kind, block, name, t = parts
        out[mangled] = (kind, block, name, int(t) if t else None)
    return out


def apply_name_map(lp: SparseLP, text: str) -> SparseLP:
    """Replace mangled labels of a parsed LP by their original block labels."""
    table = read_name_map(text)
    lp.row_labels = [table[lab[1]][1:] if lab[1] in table else lab for lab in lp.row_labels]
    lp.col_labels = [table[lab[1]][1:] if lab[1] in table else lab for lab in lp.col_labels]
    return lp


def _check_name(name: str, lineno: int):
    if len(name) > 8:
        raise MpsError(f"name {name!r} exceeds 8 characters", lineno)


def _float(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise MpsError(f"malformed number {tok!r}", lineno) from None


def parse_mps(text: str) -> SparseLP:
    section = None
    obj_name = None
    row_index: dict[str, int] = {}
    row_names: list[str] = []
    senses: list[str] = []
    col_index: dict[str, int] = {}
    col_names: list[str] = []
    c: list[float] = []
    trip_r: list[int] = []
    trip_c: list[int] = []
    trip_v: list[float] = []
    rhs_pairs: list[tuple[int, float]] = []
    obj_const = 0.0
    bounds: list[tuple[str, int, float | None, int]] = []
    name = "MODEL"
    seen_end = False
    last_col = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if not line or line.startswith("*"):
            continue
        if not line[0].isspace():
            head = line.split()
            key = head[0].upper()
            if key in UNSUPPORTED or (key not in SECTIONS):
                raise MpsError(f"unsupported section {head[0]}", lineno)
            if seen_end:
                raise MpsError("data after ENDATA", lineno)
            section = key
            if key == "NAME":
                name = head[1] if len(head) > 1 else "MODEL"
            elif key == "ENDATA":
                seen_end = True
            elif len(head) > 1:
                raise MpsError(f"unexpected fields after {key}", lineno)
            continue

        fields = line.split()
        if section == "ROWS":
            if len(fields) != 2:
                raise MpsError("ROWS entry needs a type and a name", lineno)
            kind, rname = fields[0].upper(), fields[1]
            _check_name(rname, lineno)
            if kind not in ("N", "E", "L", "G"):
                raise MpsError(f"unknown row type {kind!r}", lineno)
            if rname in row_index or rname == obj_name:
                raise MpsError(f"duplicate row name {rname!r}", lineno)
            if kind == "N":
                if obj_name is None:
                    obj_name = rname
                continue
            row_index[rname] = len(row_names)
            row_names.append(rname)
            senses.append(kind)
        elif section == "COLUMNS":
            if "'MARKER'" in fields:
                raise MpsError("integer markers are not supported", lineno)
            if len(fields) not in (3, 5):
                raise MpsError("COLUMNS entry needs 3 or 5 fields", lineno)
            cname = fields[0]
            _check_name(cname, lineno)
            if cname not in col_index:
                col_index[cname] = len(col_names)
                col_names.append(cname)
                c.append(0.0)
            elif cname != last_col:
                raise MpsError(f"column {cname!r} entries are not contiguous", lineno)
            last_col = cname
            j = col_index[cname]
            for rname, tok in zip(fields[1::2], fields[2::2]):
                _check_name(rname, lineno)
                v = _float(tok, lineno)
                if rname == obj_name:
                    c[j] = v
                elif rname in row_index:
                    trip_r.append(row_index[rname])
                    trip_c.append(j)
                    trip_v.append(v)
                else:
                    raise MpsError(f"unknown row {rname!r}", lineno)
        elif section == "RHS":
            if len(fields) not in (2, 3, 4, 5):
                raise MpsError("RHS entry has a wrong number of fields", lineno)
            pairs = fields[1:] if len(fields) % 2 == 1 else fields
            for rname, tok in zip(pairs[0::2], pairs[1::2]):
                _check_name(rname, lineno)
                v = _float(tok, lineno)
                if rname == obj_name:
                    obj_const = -v
                elif rname in row_index:
                    rhs_pairs.append((row_index[rname], v))
                else:
                    raise MpsError(f"unknown row {rname!r}", lineno)
        elif section == "BOUNDS":
            if len(fields) < 3:
                raise MpsError("BOUNDS entry has too few fields", lineno)
            kind = fields[0].upper()
            if kind in ("FR", "MI", "PL", "BV"):
                cname = fields[2] if len(fields) >= 3 else fields[1]
                value = None
            else:
                if len(fields) != 4:
                    raise MpsError(f"{kind} bound needs a value", lineno)
                cname = fields[2]
                value = _float(fields[3], lineno)
            _check_name(cname, lineno)
            if cname not in col_index:
                raise MpsError(f"bound on unknown column {cname!r}", lineno)
            if kind not in ("UP", "LO", "FX", "FR", "MI", "PL"):
                raise MpsError(f"unsupported bound type {kind!r}", lineno)
            bounds.append((kind, col_index[cname], value, lineno))
        elif section in (None, "NAME"):
            raise MpsError("data outside a section", lineno)
        else:
            raise MpsError(f"unexpected data in {section}", lineno)

    if not seen_end:
        raise MpsError("missing ENDATA")
    m, n = len(row_names), len(col_names)
    rhs = np.zeros(m)
    for i, v in rhs_pairs:
        rhs[i] = v
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    for kind, j, v, _ in bounds:
        if kind == "UP":
            ub[j] = v
        elif kind == "LO":
            lb[j] = v
        elif kind == "FX":
            lb[j] = ub[j] = v
        elif kind == "FR":
            lb[j], ub[j] = -np.inf, np.inf
        elif kind == "MI":
            lb[j] = -np.inf
        elif kind == "PL":
            ub[j] = np.inf
    lp = SparseLP.from_triplets(
        m, n, np.array(trip_r, dtype=np.int64), np.array(trip_c, dtype=np.int64), np.array(trip_v),
        senses, rhs, np.array(c), lb, ub, obj_const,
        col_names=[("", cn, None) for cn in col_names],
        row_names=[("", rn, None) for rn in row_names],
    )
    lp.name = name
    return lp
