"""Dataset, transport and CSV serialization.

A dataset is a JSON manifest with either inline ``data`` or a binary
sidecar (little-endian float64, row-major, items concatenated in order).
Dense items are d x d matrices; factored items are the frame ``G`` (d x r)
followed by the core ``P`` (r x r).
"""

import csv
import io as _io
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation, ParseError, ShapeMismatch, ValidationError
from .spsd import SpsdPoint, spsd_compose, spsd_factor

SCHEMA_VERSION = 1
ORTHO_TOL = 1e-10
_LE = np.dtype("<f8")


@dataclass
class MatrixSet:
    """Ordered SPSD items with optional integer labels.

    ``items`` holds :class:`SpsdPoint` objects or dense d x d arrays.
    """

    items: list
    labels: list | None = None
    r: int | None = None
    d: int | None = None
    indices: list | None = None

    def __post_init__(self):
        if self.labels is not None:
            self.labels = [int(v) for v in self.labels]
            if len(self.labels) != len(self.items):
                raise ValidationError("labels and items differ in length")
        if self.d is None and self.items:
            first = self.items[0]
            self.d = first.d if isinstance(first, SpsdPoint) else int(np.shape(first)[0])
        if self.r is None and self.items and isinstance(self.items[0], SpsdPoint):
            self.r = self.items[0].r

    def __len__(self):
        return len(self.items)

    def dense(self):
        return [spsd_compose(X) if isinstance(X, SpsdPoint) else np.asarray(X, dtype=float)
                for X in self.items]

    def points(self, r=None, truncate=False):
        r = self.r if r is None else r
        out = []
        for X in self.items:
            if isinstance(X, SpsdPoint):
                out.append(X)
            else:
                out.append(spsd_factor(X, r, truncate=truncate))
        return out


def _item_arrays(X, storage, r):
    if storage == "dense":
        return [spsd_compose(X) if isinstance(X, SpsdPoint) else np.asarray(X, dtype=float)]
    if not isinstance(X, SpsdPoint):
        X = spsd_factor(X, r)
    return [X.frame, X.core]


def write_dataset(mset, path, storage="factored", binary=True):
    """Write ``mset`` to ``path`` (a JSON manifest).

    With ``binary=True`` the payload goes to ``<path>.bin`` next to the
    manifest; otherwise it is stored inline.
    """
    if storage not in ("dense", "factored"):
        raise ValidationError(f"unknown storage {storage!r}")
    r = mset.r
    if storage == "factored" and r is None and len(mset):
        raise ValidationError("factored storage needs a rank")
    arrays = [_item_arrays(X, storage, r) for X in mset.items]
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "d": mset.d,
        "r": r,
        "count": len(mset),
        "storage": storage,
    }
    if mset.labels is not None:
        manifest["labels"] = list(mset.labels)
    if mset.indices is not None:
        manifest["indices"] = [int(i) for i in mset.indices]
    if binary:
        bin_path = str(path) + ".bin"
        offsets, pos = [], 0
        with open(bin_path, "wb") as fh:
            for parts in arrays:
                offsets.append(pos)
                for A in parts:
                    buf = np.ascontiguousarray(A, dtype=_LE).tobytes()
                    fh.write(buf)
                    pos += len(buf)
        manifest["binary_path"] = os.path.basename(bin_path)
        manifest["offsets"] = offsets
    else:
        manifest["data"] = [[A.tolist() for A in parts] for parts in arrays]
    with open(path, "w", newline="\n") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _shape_list(storage, d, r):
    return [(d, d)] if storage == "dense" else [(d, r), (r, r)]


def _check_item(storage, parts, i):
    if not all(np.all(np.isfinite(A)) for A in parts):
        raise InvariantViolation(f"item {i} has non-finite entries", index=i)
    if storage == "dense":
        C = parts[0]
        if np.max(np.abs(C - C.T)) > 1e-12 * max(np.max(np.abs(C)), 1.0):
            raise InvariantViolation(f"item {i} is not symmetric", index=i)
        return C
    G, P = parts
    if np.linalg.norm(G.T @ G - np.eye(G.shape[1])) > ORTHO_TOL:
        raise InvariantViolation(f"item {i} frame is not orthonormal", index=i)
    if np.max(np.abs(P - P.T)) > 1e-12 * max(np.max(np.abs(P)), 1.0):
        raise InvariantViolation(f"item {i} core is not symmetric", index=i)
    w = np.linalg.eigvalsh(P)
    if not (w[-1] > 0 and w[0] > 1e-12 * w[-1]):
        raise InvariantViolation(f"item {i} core is not positive definite", index=i)
    return SpsdPoint(G, P)


def read_dataset(path):
    """Read and validate a dataset manifest; returns a :class:`MatrixSet`."""
    try:
        with open(path) as fh:
            man = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read manifest {path}: {exc}") from exc
    if not isinstance(man, dict):
        raise ParseError("manifest must be a JSON object")
    if man.get("schema_version") != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {man.get('schema_version')!r}")
    try:
        d, count, storage = int(man["d"] or 0), int(man["count"]), man["storage"]
        r = None if man.get("r") is None else int(man["r"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed manifest header: {exc}") from exc
    if storage not in ("dense", "factored"):
        raise ParseError(f"unknown storage {storage!r}")
    if storage == "factored" and count and r is None:
        raise ParseError("factored storage requires r")
    shapes = _shape_list(storage, d, r)
    labels = man.get("labels")
    if labels is not None and len(labels) != count:
        raise ShapeMismatch(f"{len(labels)} labels for {count} items")

    raw = []
    if "data" in man:
        data = man["data"]
        if len(data) != count:
            raise ShapeMismatch(f"manifest declares {count} items, payload has {len(data)}")
        for i, parts in enumerate(data):
            if len(parts) != len(shapes):
                raise ShapeMismatch(f"item {i} has {len(parts)} blocks, expected {len(shapes)}")
            arrs = []
            for A, shp in zip(parts, shapes):
                try:
                    A = np.asarray(A, dtype=float)
                except (TypeError, ValueError) as exc:
                    raise ParseError(f"item {i} is not numeric") from exc
                if A.shape != shp:
                    raise ShapeMismatch(f"item {i} has shape {A.shape}, expected {shp}")
                arrs.append(A)
            raw.append(arrs)
    elif "binary_path" in man:
        bin_path = os.path.join(os.path.dirname(os.path.abspath(path)), man["binary_path"])
        try:
            with open(bin_path, "rb") as fh:
                buf = fh.read()
        except OSError as exc:
            raise ParseError(f"cannot read payload {bin_path}: {exc}") from exc
        size = sum(a * b for a, b in shapes) * _LE.itemsize
        offsets = man.get("offsets", [i * size for i in range(count)])
        if len(offsets) != count or len(buf) != size * count:
            raise ShapeMismatch(
                f"payload holds {len(buf)} bytes, expected {size * count} for {count} items"
            )
        for i, off in enumerate(offsets):
            if not 0 <= int(off) <= len(buf) - size:
                raise ShapeMismatch(f"item {i} offset {off} lies outside the payload")
            flat = np.frombuffer(buf, dtype=_LE, count=size // 8, offset=int(off)).astype(float)
            arrs, pos = [], 0
            for a, b in shapes:
                arrs.append(flat[pos : pos + a * b].reshape(a, b))
                pos += a * b
            raw.append(arrs)
    else:
        raise ParseError("manifest has neither data nor binary_path")

    indices = man.get("indices")
    if indices is not None and len(indices) != count:
        raise ShapeMismatch(f"{len(indices)} indices for {count} items")
    items = [_check_item(storage, parts, i) for i, parts in enumerate(raw)]
    return MatrixSet(items, labels, r, d, indices)


def transport_to_dict(t):
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "spsd_transport",
        "source_frame": t.source_frame.tolist(),
        "source_core": t.source_core.tolist(),
        "target_frame": t.target_frame.tolist(),
        "target_core": t.target_core.tolist(),
        "rotation": t.rotation.tolist(),
        "E": t.E.tolist(),
    }


def write_transport(t, path):
    with open(path, "w", newline="\n") as fh:
        json.dump(transport_to_dict(t), fh, sort_keys=True)
        fh.write("\n")


def read_transport(path):
    from .adaptation import SpsdTransport

    try:
        with open(path) as fh:
            obj = json.load(fh)
        if obj.get("schema_version") != SCHEMA_VERSION or obj.get("kind") != "spsd_transport":
            raise ParseError("not a version-1 transport file")
        fields = {k: np.asarray(obj[k], dtype=float) for k in
                  ("source_frame", "source_core", "target_frame", "target_core", "rotation", "E")}
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"cannot read transport {path}: {exc}") from exc
    d, r = fields["source_frame"].shape
    expected = {"source_core": (r, r), "target_frame": (d, r), "target_core": (r, r),
                "rotation": (d, d), "E": (r, r)}
    for k, shp in expected.items():
        if fields[k].shape != shp:
            raise ShapeMismatch(f"transport field {k} has shape {fields[k].shape}, expected {shp}")
    return SpsdTransport(**fields)


def fmt(x):
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    """CSV with a header row, LF line endings and 17 significant digits."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path} is empty")
    return rows[0], rows[1:]
