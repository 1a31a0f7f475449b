"""JSON and CSV serialization for operators, invariant blocks and reports.

Formats
-------
operator : ``{"dim": n, "real": [[...]], "imag": [[...]]}``
blocks   : ``{"blocks": [{"l": 0, "real": [[...]], "imag": [[...]]}, ...]}``
CSV      : header row, then one row per point; floats use ``repr`` so the
           text round-trips exactly and repeated runs are byte-identical.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .rotinv import InvariantBlocks


class FormatError(ValueError):
    """Malformed operator or blocks document."""


def _finite(x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise FloatingPointError("non-finite value in output")
    return x


def _rows(a: np.ndarray) -> list:
    return [[_finite(v) for v in row] for row in a]


def operator_to_dict(op) -> dict:
    op = np.asarray(op, dtype=complex)
    return {"dim": op.shape[0], "real": _rows(op.real), "imag": _rows(op.imag)}


def _complex_matrix(doc: dict, what: str) -> np.ndarray:
    try:
        re = np.asarray(doc["real"], dtype=float)
        im = np.asarray(doc.get("imag", np.zeros_like(re)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{what}: need numeric 'real' (and optional 'imag') matrices") from exc
    re, im = np.atleast_2d(re), np.atleast_2d(im)
    if re.ndim != 2 or re.shape[0] != re.shape[1] or im.shape != re.shape:
        raise FormatError(f"{what}: entries must be square matrices of equal shape")
    return re + 1j * im


def operator_from_dict(doc: dict) -> np.ndarray:
    op = _complex_matrix(doc, "operator")
    if "dim" in doc and doc["dim"] != op.shape[0]:
        raise FormatError(f"operator: dim {doc['dim']} does not match {op.shape[0]}")
    return op


def blocks_to_dict(blocks: InvariantBlocks) -> dict:
    return {"blocks": [{"l": l, "real": _rows(m.real), "imag": _rows(m.imag)} for l, m in blocks]}


def blocks_from_dict(doc) -> InvariantBlocks:
    entries = doc.get("blocks") if isinstance(doc, dict) else doc
    if not isinstance(entries, list):
        raise FormatError("blocks document needs a 'blocks' list")
    out = {}
    for entry in entries:
        if not isinstance(entry, dict) or "l" not in entry:
            raise FormatError("each block needs an integer 'l'")
        extra = set(entry) - {"l", "real", "imag"}
        if extra:
            raise FormatError(f"unknown block keys {sorted(extra)}")
        l = entry["l"]
        if not isinstance(l, int) or isinstance(l, bool) or l < 0:
            raise FormatError(f"invalid l {l!r}")
        if l in out:
            raise FormatError(f"duplicate block l={l}")
        out[l] = _complex_matrix(entry, f"block l={l}")
    return InvariantBlocks(out)


def load_blocks(path) -> InvariantBlocks:
    with open(path) as fh:
        return blocks_from_dict(json.load(fh))


def dumps(doc) -> str:
    """Compact-but-readable JSON with a trailing newline; rejects NaN/Inf."""
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_json(path, doc):
    Path(path).write_text(dumps(doc))


def write_csv(path, header: list[str], rows: np.ndarray):
    rows = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(rows)):
        raise FloatingPointError("non-finite value in output")
    lines = [",".join(header)]
    lines += [",".join(repr(float(v)) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> tuple[list[str], np.ndarray]:
    text = Path(path).read_text().splitlines()
    header = text[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in text[1:]]).reshape(-1, len(header))
    return header, data


def coordinate_names(d: int) -> list[str]:
    return [f"q{i}" for i in range(1, d + 1)] + [f"p{i}" for i in range(1, d + 1)]
