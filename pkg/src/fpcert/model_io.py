"""Portable model and dataset serialization.

Models are stored as JSON with row-major float lists; floats are written
with Python's shortest round-trip representation, which is exact for
binary64, so save(load(f)) is byte-stable after one normalization pass.
"""

import csv
import json

import numpy as np

from .errors import ParseError, ShapeMismatch
from .mondeq import MonDeqParams

FORMAT_VERSION = "1"


def _require(cond, msg):
    if not cond:
        raise ParseError(msg)


def load_model(path):
    """Load a model JSON file into MonDeqParams."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return model_from_dict(raw, source=str(path))


def model_from_dict(raw, source="<dict>"):
    _require(isinstance(raw, dict), f"{source}: expected a JSON object")
    for key in ("format_version", "p", "q", "r", "m", "P", "Q", "U", "bias", "V", "v"):
        _require(key in raw, f"{source}: missing field '{key}'")
    _require(
        str(raw["format_version"]) == FORMAT_VERSION,
        f"{source}: unsupported format_version {raw['format_version']!r}",
    )
    try:
        p, q, r = int(raw["p"]), int(raw["q"]), int(raw["r"])
        m = float(raw["m"])
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{source}: malformed scalar field: {exc}") from exc
    _require(p >= 1 and q >= 1 and r >= 1, f"{source}: p, q, r must be positive")
    _require(m > 0, f"{source}: m must be positive")

    def grid(name, rows, cols):
        data = raw[name]
        _require(isinstance(data, list), f"{source}: field '{name}' must be a list")
        flat = np.asarray(data, dtype=float).ravel()
        if flat.size != rows * cols:
            raise ShapeMismatch(
                f"{source}: field '{name}' has {flat.size} entries, expected {rows * cols}"
            )
        return flat.reshape(rows, cols)

    def vec(name, n):
        data = raw[name]
        _require(isinstance(data, list), f"{source}: field '{name}' must be a list")
        flat = np.asarray(data, dtype=float).ravel()
        if flat.size != n:
            raise ShapeMismatch(
                f"{source}: field '{name}' has {flat.size} entries, expected {n}"
            )
        return flat

    return MonDeqParams(
        P=grid("P", p, p),
        Q=grid("Q", p, p),
        U=grid("U", p, q),
        bias=vec("bias", p),
        V=grid("V", r, p),
        v=vec("v", r),
        m=m,
    )


def model_to_dict(params):
    return {
        "format_version": FORMAT_VERSION,
        "p": params.p,
        "q": params.q,
        "r": params.n_classes,
        "m": params.m,
        "P": params.P.ravel().tolist(),
        "Q": params.Q.ravel().tolist(),
        "U": params.U.ravel().tolist(),
        "bias": params.bias.ravel().tolist(),
        "V": params.V.ravel().tolist(),
        "v": params.v.ravel().tolist(),
    }


def save_model(params, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(params), fh, indent=2)
        fh.write("\n")


def load_dataset(path, q=None):
    """Load a CSV of q feature columns plus an integer label column.

    A single non-numeric header row is skipped.  Row order is preserved.
    """
    rows = []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            raw = [row for row in reader if row and any(cell.strip() for cell in row)]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not raw:
        return []
    start = 0
    try:
        float(raw[0][0])
    except ValueError:
        start = 1  # header row
    width = None
    for idx, row in enumerate(raw[start:], start=start):
        try:
            feats = [float(cell) for cell in row[:-1]]
            label = int(row[-1])
        except (ValueError, IndexError) as exc:
            raise ParseError(f"{path}: bad row {idx}: {exc}") from exc
        if width is None:
            width = len(feats)
            if q is not None and width != q:
                raise ParseError(f"{path}: expected {q} feature columns, found {width}")
        elif len(feats) != width:
            raise ParseError(f"{path}: row {idx} has {len(feats)} features, expected {width}")
        rows.append((np.asarray(feats), label))
    return rows
