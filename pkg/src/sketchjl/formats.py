"""Text formats for vectors, update streams and transform descriptors.

Sparse vectors and update streams use 1-based coordinates, one
``index value`` pair per line. Dense input is either one comma or
whitespace separated row per vector, or a single column with one value per
line. Blank lines and lines starting with ``#`` are skipped.
"""

from __future__ import annotations

import json
import re

import numpy as np

from .errors import InvalidInputError, ShapeError

_SPLIT = re.compile(r"[,\s]+")


class ParseError(InvalidInputError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def _content_lines(text: str):
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield no, line


def _floats(line: str, no: int) -> list[float]:
    try:
        return [float(tok) for tok in _SPLIT.split(line) if tok]
    except ValueError as exc:
        raise ParseError(f"not a number list: {line!r}", no) from exc


def parse_dense_rows(text: str, d: int) -> list[np.ndarray]:
    """Vectors of length ``d`` from row or single-column text."""
    rows = [(no, _floats(line, no)) for no, line in _content_lines(text)]
    if not rows:
        return []
    if d > 1 and all(len(vals) == 1 for _, vals in rows):
        if len(rows) != d:
            raise ShapeError(f"column vector has {len(rows)} values, expected {d}")
        return [np.array([vals[0] for _, vals in rows])]
    out = []
    for no, vals in rows:
        if len(vals) != d:
            raise ShapeError(f"line {no}: row has {len(vals)} values, expected {d}")
        out.append(np.array(vals))
    return out


def parse_pairs(text: str, d: int | None = None) -> list[tuple[int, float]]:
    """``(index, value)`` pairs with indices converted to 0-based."""
    out = []
    for no, line in _content_lines(text):
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected 'index value', got {line!r}", no)
        try:
            j = int(parts[0])
            v = float(parts[1])
        except ValueError as exc:
            raise ParseError(f"expected 'index value', got {line!r}", no) from exc
        if j < 1 or (d is not None and j > d):
            raise ShapeError(f"line {no}: index {j} outside [1, {d}]")
        out.append((j - 1, v))
    return out


def parse_sparse_vector(text: str, d: int) -> np.ndarray:
    x = np.zeros(d)
    for j, v in parse_pairs(text, d):
        x[j] += v
    return x


def format_row(y) -> str:
    """Comma separated shortest round-trip representation of every value."""
    return ",".join(repr(float(v)) for v in y)


def load_json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno) from exc


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"
