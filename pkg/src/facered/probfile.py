"""Self-describing text format for conic feasibility problems.

Canonical coordinates are explicit in the file: psd blocks use svec order
(columns j = 1..n, within a column rows i = j..n) with off-diagonal entries
pre-scaled by sqrt(2), and soc blocks carry the overall sqrt(2) scaling.
``parse(..., raw_matrix=True)`` accepts unscaled psd entries and converts.

Layout (canonical writer order, floats formatted %.17g)::

    facered-problem 1
    name <name>           # optional
    seed <int>            # optional
    block psd 3
    block orthant 2
    rows 2
    cols 8
    A sparse 3            # or "A dense" followed by <rows> lines
    0 0 1
    1 2 1
    1 4 -0.707...
    b 0 0
    end
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import algebra as al
from .errors import ParseError

KIND_TO_BLOCK = {"psd": al.SYM, "soc": al.SPIN, "orthant": al.ORTHANT}
BLOCK_TO_KIND = {v: k for k, v in KIND_TO_BLOCK.items()}

HEADER = "facered-problem 1"


@dataclass
class ProblemFile:
    blocks: list[tuple[str, int]]  # (kind, n) with kind in psd|soc|orthant
    A: np.ndarray
    b: np.ndarray
    name: str | None = None
    seed: int | None = None

    def spec(self) -> al.AlgebraSpec:
        return al.AlgebraSpec(
            tuple(al.Block(KIND_TO_BLOCK[k], n) for k, n in self.blocks)
        )


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def serialize(pf: ProblemFile) -> str:
    spec = pf.spec()
    rows, cols = pf.A.shape
    if cols != spec.dim:
        raise ParseError(f"A has {cols} columns, blocks give dimension {spec.dim}")
    out = [HEADER]
    if pf.name is not None:
        out.append(f"name {pf.name}")
    if pf.seed is not None:
        out.append(f"seed {int(pf.seed)}")
    for kind, n in pf.blocks:
        out.append(f"block {kind} {n}")
    out.append(f"rows {rows}")
    out.append(f"cols {cols}")
    nz = np.argwhere(pf.A != 0.0)
    if 3 * len(nz) <= rows * cols:
        out.append(f"A sparse {len(nz)}")
        for i, j in nz:
            out.append(f"{i} {j} {_fmt(pf.A[i, j])}")
    else:
        out.append("A dense")
        for i in range(rows):
            out.append(" ".join(_fmt(v) for v in pf.A[i]))
    out.append("b " + " ".join(_fmt(v) for v in pf.b) if rows else "b")
    out.append("end")
    return "\n".join(out) + "\n"


def _raw_scale_columns(spec: al.AlgebraSpec) -> np.ndarray:
    """Per-column factors converting unscaled psd entries to canonical."""
    parts = []
    for b in spec.blocks:
        if b.kind == al.SYM:
            rows, cols, scale = al._svec_table(b.n)
            parts.append(scale)
        else:
            parts.append(np.ones(b.dim))
    return np.concatenate(parts)


def parse(text: str, raw_matrix: bool = False) -> ProblemFile:
    lines = text.splitlines()
    idx = 0

    def next_line():
        nonlocal idx
        while idx < len(lines):
            raw = lines[idx]
            idx += 1
            stripped = raw.split("#", 1)[0].strip()
            if stripped:
                return stripped, idx
        return None, idx

    line, ln = next_line()
    if line != HEADER:
        raise ParseError(f"expected header {HEADER!r}", ln)

    name = None
    seed = None
    blocks: list[tuple[str, int]] = []
    rows = cols = None
    line, ln = next_line()
    while line is not None:
        fields = line.split()
        key = fields[0]
        if key == "name":
            name = line[len("name") :].strip()
        elif key == "seed":
            try:
                seed = int(fields[1])
            except (IndexError, ValueError):
                raise ParseError("seed needs one integer field", ln)
        elif key == "block":
            if len(fields) != 3 or fields[1] not in KIND_TO_BLOCK:
                raise ParseError("block line must be 'block psd|soc|orthant <n>'", ln)
            try:
                blocks.append((fields[1], int(fields[2])))
            except ValueError:
                raise ParseError("block size must be an integer", ln)
        elif key == "rows":
            rows = int(fields[1])
        elif key == "cols":
            cols = int(fields[1])
        elif key == "A":
            break
        else:
            raise ParseError(f"unexpected key {key!r}", ln)
        line, ln = next_line()

    if not blocks:
        raise ParseError("no block lines before A")
    if rows is None or cols is None:
        raise ParseError("rows/cols must precede A")
    spec_dim = sum(
        al.Block(KIND_TO_BLOCK[k], n).dim for k, n in blocks
    )
    if cols != spec_dim:
        raise ParseError(f"cols={cols} but blocks give dimension {spec_dim}", ln)
    if line is None:
        raise ParseError("missing A section")

    fields = line.split()
    a_mat = np.zeros((rows, cols))
    if len(fields) >= 2 and fields[1] == "sparse":
        try:
            nnz = int(fields[2])
        except (IndexError, ValueError):
            raise ParseError("sparse A needs an entry count", ln)
        for _ in range(nnz):
            entry, ln = next_line()
            if entry is None:
                raise ParseError("unexpected end of file in sparse A", ln)
            parts = entry.split()
            if len(parts) != 3:
                raise ParseError("sparse entry must be 'i j value'", ln)
            try:
                i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise ParseError("bad sparse entry", ln)
            if not (0 <= i < rows and 0 <= j < cols):
                raise ParseError(f"sparse index ({i},{j}) out of range", ln)
            a_mat[i, j] = v
    elif len(fields) >= 2 and fields[1] == "dense":
        for i in range(rows):
            entry, ln = next_line()
            if entry is None:
                raise ParseError("unexpected end of file in dense A", ln)
            vals = entry.split()
            if len(vals) != cols:
                raise ParseError(f"expected {cols} values in dense row", ln)
            a_mat[i] = [float(v) for v in vals]
    else:
        raise ParseError("A section must be 'A sparse <nnz>' or 'A dense'", ln)

    line, ln = next_line()
    if line is None or line.split()[0] != "b":
        raise ParseError("missing b line", ln)
    b_vals = line.split()[1:]
    if len(b_vals) != rows:
        raise ParseError(f"b has {len(b_vals)} values, expected {rows}", ln)
    b_vec = np.array([float(v) for v in b_vals]) if rows else np.zeros(0)

    line, ln = next_line()
    if line != "end":
        raise ParseError("missing end marker", ln)

    pf = ProblemFile(blocks=blocks, A=a_mat, b=b_vec, name=name, seed=seed)
    if raw_matrix:
        pf.A = pf.A * _raw_scale_columns(pf.spec())[None, :]
    return pf


def parse_point(text: str, spec: al.AlgebraSpec, raw_matrix: bool = False) -> np.ndarray:
    """Whitespace-separated canonical coordinates (comments allowed)."""
    vals = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        for tok in stripped.split():
            try:
                vals.append(float(tok))
            except ValueError:
                raise ParseError(f"bad float {tok!r}", ln)
    coords = np.array(vals)
    if coords.size != spec.dim:
        raise ParseError(
            f"point has {coords.size} coordinates, problem needs {spec.dim}"
        )
    if raw_matrix:
        coords = coords * _raw_scale_columns(spec)
    return coords
