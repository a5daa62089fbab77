"""CVF1 field files.

Layout: the 4 bytes ``CVF1``, one line of UTF-8 JSON (``dim``, ``sizes``,
``kind``, ``length`` plus free metadata), a newline, then ``length``
little-endian float64 values in row-major node order with the components of
a vector or map interleaved per node.
"""

from __future__ import annotations

import json
import os
from typing import Union

import numpy as np

from .errors import FormatError, PasteError
from .grid import GridMap, GridSpec, ScalarField, VectorField
from .regions import RegionSet
from .symplectic import MapPatch

MAGIC = b"CVF1"
KINDS = ("scalar", "vector", "map")
MAX_HEADER = 1 << 20
RESERVED = ("dim", "sizes", "kind", "length")

Storable = Union[ScalarField, VectorField, GridMap]


def _payload(values: np.ndarray, components: int) -> bytes:
    if components == 1:
        flat = values.ravel()
    else:
        flat = np.moveaxis(values, 0, -1).ravel()
    return flat.astype("<f8").tobytes()


def _write(path, header: dict, payload: bytes):
    line = json.dumps(header, sort_keys=True, separators=(",", ":"))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(line.encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)


def write_field(path: str | os.PathLike, field: Storable, metadata: dict | None = None) -> None:
    meta = dict(metadata or {})
    clash = [k for k in RESERVED if k in meta]
    if clash:
        raise FormatError(f"metadata may not override {clash}")
    spec = field.spec
    kind = field.kind
    comps = 1 if kind == "scalar" else spec.dim
    header = {"dim": spec.dim, "sizes": list(spec.sizes), "kind": kind, "length": spec.n_nodes * comps, **meta}
    _write(path, header, _payload(field.values, comps))


def write_regions(path, rs: RegionSet) -> None:
    """Region labels (V = 0, annulus = 1, W = 2) as a scalar field with the region metadata."""
    write_field(path, ScalarField(rs.spec, rs.labels()), {"regions": rs.metadata()})


def write_patch(path, patch: MapPatch) -> None:
    """Map samples on a symplectic patch; nodes outside the chart's validity are NaN."""
    n = patch.n
    vals = np.where(patch.valid, patch.values, np.nan)
    header = {"dim": 2, "sizes": [n, n], "kind": "map", "length": 2 * n * n, "patch": patch.header()}
    _write(path, header, _payload(vals, 2))


def read_header(path) -> tuple[dict, bytes]:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if blob[:4] != MAGIC:
        raise FormatError("bad magic: not a CVF1 file")
    end = blob.find(b"\n", 4, 4 + MAX_HEADER)
    if end < 0:
        raise FormatError("header line is missing or too long")
    try:
        header = json.loads(blob[4:end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"header is not JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise FormatError("header must be a JSON object")
    _check_header(header)
    return header, blob[end + 1:]


def _check_header(h: dict):
    for key in RESERVED:
        if key not in h:
            raise FormatError(f"header lacks {key!r}")
    if h["kind"] not in KINDS:
        raise FormatError(f"unknown kind {h['kind']!r}")
    sizes = h["sizes"]
    if not isinstance(sizes, list) or not all(isinstance(s, int) and s > 0 for s in sizes):
        raise FormatError("sizes must be a list of positive integers")
    if h["dim"] != len(sizes):
        raise FormatError(f"dim {h['dim']} does not match sizes {sizes}")
    comps = 1 if h["kind"] == "scalar" else h["dim"]
    if h["length"] != comps * int(np.prod(sizes)):
        raise FormatError(f"length {h['length']} does not match {comps} x {sizes}")


def _values(header: dict, payload: bytes) -> np.ndarray:
    n = header["length"]
    if len(payload) != 8 * n:
        raise FormatError(f"payload holds {len(payload)} bytes, header promises {8 * n}")
    flat = np.frombuffer(payload, dtype="<f8").astype(float)
    sizes = tuple(header["sizes"])
    if header["kind"] == "scalar":
        return flat.reshape(sizes)
    return np.moveaxis(flat.reshape(sizes + (header["dim"],)), -1, 0)


def read_field(path) -> Storable | MapPatch:
    header, payload = read_header(path)
    vals = _values(header, payload)
    if "patch" in header:
        p = header["patch"]
        try:
            return MapPatch(tuple(p["center"]), float(p["delta"]), vals, np.all(np.isfinite(vals), axis=0))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad patch header: {exc}") from exc
    try:
        spec = GridSpec(tuple(header["sizes"]))
        if header["kind"] == "scalar":
            return ScalarField(spec, vals)
        if header["kind"] == "vector":
            return VectorField(spec, vals)
        return GridMap(VectorField(spec, vals))
    except PasteError as exc:
        raise FormatError(f"payload does not form a valid field: {exc}") from exc
