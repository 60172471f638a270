"""Whitespace-separated UTF-8 text formats for tensors.

Sparse:  line 1 ``coo <order> <d1> <d2> ...``, then one ``i j k v`` line per
         stored entry (0-based indices).
Dense:   line 1 ``dense <order> <d1> ...``, then the values in row-major
         order with arbitrary line breaking.

Values are written with 17 significant digits so a write/parse round trip
reproduces every float64 exactly.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .tensor import CooTensor, DenseTensor, Tensor


class ParseError(ValueError):
    """Malformed tensor file; carries the offending line number."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = str(path) if path is not None else None
        self.line = line
        where = f"{self.path or '<input>'}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}")


def _parse_header(tokens, path, line_no):
    if len(tokens) < 2 or tokens[0] not in ("coo", "dense"):
        raise ParseError("header must start with 'coo' or 'dense' and an order", path, line_no)
    try:
        order = int(tokens[1])
    except ValueError:
        raise ParseError(f"non-numeric order {tokens[1]!r}", path, line_no) from None
    if order not in (3, 4):
        raise ParseError(f"order must be 3 or 4, got {order}", path, line_no)
    if len(tokens) != 2 + order:
        raise ParseError(f"header needs {order} dimensions, got {len(tokens) - 2}", path, line_no)
    dims = []
    for tok in tokens[2:]:
        try:
            d = int(tok)
        except ValueError:
            raise ParseError(f"non-numeric dimension {tok!r}", path, line_no) from None
        if d < 1:
            raise ParseError(f"dimension must be >= 1, got {d}", path, line_no)
        dims.append(d)
    return tokens[0], tuple(dims)


def parse_tensor(path) -> Tensor:
    """Read a tensor file, raising ParseError (with a line number) on bad input."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    header_line = None
    for i, raw in enumerate(lines, start=1):
        if raw.split():
            header_line = i
            break
    if header_line is None:
        raise ParseError("empty file", path, 1)
    kind, dims = _parse_header(lines[header_line - 1].split(), path, header_line)

    if kind == "coo":
        return _parse_coo(lines, header_line, dims, path)
    return _parse_dense(lines, header_line, dims, path)


def _parse_coo(lines, header_line, dims, path):
    order = len(dims)
    indices, values = [], []
    seen: dict[int, int] = {}
    for line_no in range(header_line + 1, len(lines) + 1):
        tokens = lines[line_no - 1].split()
        if not tokens:
            continue
        if len(tokens) != order + 1:
            raise ParseError(f"entry needs {order} indices and a value, got {len(tokens)} tokens", path, line_no)
        idx = []
        for m, tok in enumerate(tokens[:order]):
            try:
                i = int(tok)
            except ValueError:
                raise ParseError(f"non-numeric index {tok!r}", path, line_no) from None
            if not 0 <= i < dims[m]:
                raise ParseError(f"index {i} out of bounds for mode {m} (dim {dims[m]})", path, line_no)
            idx.append(i)
        try:
            val = float(tokens[order])
        except ValueError:
            raise ParseError(f"non-numeric value {tokens[order]!r}", path, line_no) from None
        if not math.isfinite(val):
            raise ParseError(f"non-finite value {tokens[order]!r}", path, line_no)
        if val == 0.0:
            raise ParseError("explicit zero entry in COO file", path, line_no)
        flat = int(np.ravel_multi_index(idx, dims))
        if flat in seen:
            raise ParseError(f"duplicate index (first seen on line {seen[flat]})", path, line_no)
        seen[flat] = line_no
        indices.append(idx)
        values.append(val)
    return CooTensor(dims, np.array(indices).reshape(-1, order), values)


def _parse_dense(lines, header_line, dims, path):
    expected = int(np.prod(dims))
    values = np.empty(expected)
    count = 0
    for line_no in range(header_line + 1, len(lines) + 1):
        for tok in lines[line_no - 1].split():
            if count >= expected:
                raise ParseError(f"more than {expected} values", path, line_no)
            try:
                val = float(tok)
            except ValueError:
                raise ParseError(f"non-numeric value {tok!r}", path, line_no) from None
            if not math.isfinite(val):
                raise ParseError(f"non-finite value {tok!r}", path, line_no)
            values[count] = val
            count += 1
    if count != expected:
        raise ParseError(f"expected {expected} values, got {count}", path, len(lines))
    return DenseTensor(values.reshape(dims))


def write_tensor(t: Tensor, path) -> None:
    path = Path(path)
    dims = " ".join(str(d) for d in t.shape)
    with open(path, "w", encoding="utf-8") as fh:
        if isinstance(t, CooTensor):
            fh.write(f"coo {t.order} {dims}\n")
            for idx, val in zip(t.indices, t.values):
                fh.write(" ".join(str(i) for i in idx) + f" {val:.17g}\n")
        else:
            fh.write(f"dense {t.order} {dims}\n")
            flat = t.values
            for start in range(0, len(flat), 8):
                fh.write(" ".join(f"{v:.17g}" for v in flat[start : start + 8]) + "\n")
