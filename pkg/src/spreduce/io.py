"""Reading and writing models.

Two formats are supported:

``json``
    One file ``{"n", "m", "p", "A", "B", "C", "labels"?}`` with row-major
    nested lists. Floats are written with 17 significant digits, so a save/load
    round trip is bit-exact. Reduced models additionally carry ``"kind":
    "reduced"``, ``"r"``, ``"D"``, ``"P"`` and ``"Q"``.

``mtx``
    A directory with ``A.mtx``, ``B.mtx``, ``C.mtx`` in Matrix Market
    coordinate (triplet) format and ``dims.json`` holding ``n``, ``m``, ``p``
    and optional labels.
"""

import json
import math
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse

from . import linalg
from .errors import DimensionMismatch, NotStable, ParseError
from .lti import ReducedModel, StateSpaceModel
from .sp import ProjectionPair

__all__ = ["load_model", "save_model", "load_reduced", "save_reduced", "FORMATS"]

FORMATS = ("json", "mtx")


def _fmt(x):
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("cannot serialize non-finite value")
    return format(x, ".17g")


def _matrix_json(M):
    rows = ["[" + ", ".join(_fmt(v) for v in row) + "]" for row in np.asarray(M)]
    return "[" + ",\n    ".join(rows) + "]"


def _dump(fields, path):
    parts = []
    for key, value in fields.items():
        if isinstance(value, np.ndarray):
            parts.append(f'  "{key}": {_matrix_json(value)}')
        else:
            parts.append(f'  "{key}": {json.dumps(value)}')
    Path(path).write_text("{\n" + ",\n".join(parts) + "\n}\n")


def _guess_format(path, fmt):
    if fmt is not None:
        if fmt not in FORMATS:
            raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
        return fmt
    return "mtx" if Path(path).is_dir() or Path(path).suffix == "" else "json"


def _read_matrix(doc, key, rows, cols):
    try:
        raw = doc[key]
    except KeyError:
        raise ParseError(f"missing field {key!r}") from None
    if rows == 0 or cols == 0:
        return np.zeros((rows, cols))
    try:
        M = np.array(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"field {key!r} is not a numeric matrix: {exc}") from exc
    if M.ndim != 2:
        raise DimensionMismatch(f"field {key!r} is not a rectangular matrix")
    if M.shape != (rows, cols):
        raise DimensionMismatch(f"{key} has shape {M.shape}, declared {(rows, cols)}")
    if not np.all(np.isfinite(M)):
        raise ParseError(f"field {key!r} has non-finite entries")
    return M


def _read_dims(doc):
    dims = []
    for key in ("n", "m", "p"):
        if key not in doc:
            raise ParseError(f"missing field {key!r}")
        val = doc[key]
        if not isinstance(val, int) or isinstance(val, bool) or val < 0:
            raise ParseError(f"field {key!r} must be a non-negative integer")
        dims.append(val)
    return dims


def _load_json_doc(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    return doc


def _build(A, B, C, labels):
    try:
        return StateSpaceModel(A, B, C, labels=labels)
    except NotStable as exc:
        raise NotStable(f"model is not stable: {exc}", exc.max_real_part) from exc


def load_model(path, format=None):
    """Load and validate a full model; raises NotStable if ``A`` is not Hurwitz."""
    fmt = _guess_format(path, format)
    if fmt == "mtx":
        return _load_mtx(Path(path))
    doc = _load_json_doc(path)
    n, m, p = _read_dims(doc)
    A = _read_matrix(doc, "A", n, n)
    B = _read_matrix(doc, "B", n, m)
    C = _read_matrix(doc, "C", p, n)
    labels = doc.get("labels")
    if labels is not None and not isinstance(labels, list):
        raise ParseError("labels must be a list of strings")
    return _build(A, B, C, labels)


def save_model(model, path, format=None):
    fmt = _guess_format(path, format)
    if fmt == "mtx":
        return _save_mtx(model, Path(path))
    fields = {"n": model.n, "m": model.m, "p": model.p,
              "A": model.A, "B": model.B, "C": model.C}
    if model.labels:
        fields["labels"] = list(model.labels)
    _dump(fields, path)


def save_reduced(reduced, path, extra=None):
    """Write a reduced model and its projection as JSON."""
    Chat, Bhat = reduced.Chat, reduced.Bhat
    fields = {"kind": "reduced", "r": reduced.order, "m": Bhat.shape[1], "p": Chat.shape[0],
              "A": reduced.Ahat, "B": Bhat, "C": Chat, "D": reduced.Dhat}
    if reduced.projection is not None:
        fields["n"] = reduced.projection.n
        fields["P"] = reduced.projection.P
        fields["Q"] = reduced.projection.Q
    for key, value in (extra or {}).items():
        fields[key] = np.asarray(value, dtype=float) if isinstance(value, np.ndarray) else value
    _dump(fields, path)


def load_reduced(path):
    """Load a reduced model written by :func:`save_reduced`.

    A full-model JSON file is also accepted and treated as a reduced model
    with zero feedthrough.
    """
    doc = _load_json_doc(path)
    if doc.get("kind") != "reduced":
        model = load_model(path, "json")
        return ReducedModel.from_model(model)
    for key in ("r", "m", "p"):
        if not isinstance(doc.get(key), int):
            raise ParseError(f"missing or invalid field {key!r}")
    r, m, p = doc["r"], doc["m"], doc["p"]
    A = _read_matrix(doc, "A", r, r)
    B = _read_matrix(doc, "B", r, m)
    C = _read_matrix(doc, "C", p, r)
    D = _read_matrix(doc, "D", p, m) if "D" in doc else np.zeros((p, m))
    proj = None
    if "P" in doc and isinstance(doc.get("n"), int):
        n = doc["n"]
        try:
            proj = ProjectionPair(_read_matrix(doc, "P", r, n), _read_matrix(doc, "Q", n - r, n))
        except ValueError as exc:
            raise ParseError(f"invalid projection: {exc}") from exc
    return ReducedModel(A, B, C, D, proj)


def _save_mtx(model, directory):
    directory.mkdir(parents=True, exist_ok=True)
    for name, M in (("A", model.A), ("B", model.B), ("C", model.C)):
        scipy.io.mmwrite(str(directory / f"{name}.mtx"), scipy.sparse.coo_matrix(M), precision=17)
    dims = {"n": model.n, "m": model.m, "p": model.p}
    if model.labels:
        dims["labels"] = list(model.labels)
    (directory / "dims.json").write_text(json.dumps(dims, indent=2) + "\n")


def _load_mtx(directory):
    if not directory.is_dir():
        raise ParseError(f"{directory} is not a directory")
    try:
        dims_doc = json.loads((directory / "dims.json").read_text())
    except FileNotFoundError:
        raise ParseError(f"{directory}: missing dims.json") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{directory}/dims.json: invalid JSON ({exc})") from exc
    n, m, p = _read_dims(dims_doc)
    mats = {}
    for name, shape in (("A", (n, n)), ("B", (n, m)), ("C", (p, n))):
        f = directory / f"{name}.mtx"
        try:
            M = scipy.io.mmread(str(f))
        except FileNotFoundError:
            raise ParseError(f"{directory}: missing {name}.mtx") from None
        except (ValueError, IndexError) as exc:
            raise ParseError(f"{f}: {exc}") from exc
        M = M.toarray() if scipy.sparse.issparse(M) else np.asarray(M, dtype=float)
        if M.shape != shape:
            raise DimensionMismatch(f"{name}.mtx has shape {M.shape}, dims.json says {shape}")
        mats[name] = linalg.as_matrix(M, name)
    return _build(mats["A"], mats["B"], mats["C"], dims_doc.get("labels"))
