"""CIFLD1 field files and TripleState directories.

A CIFLD1 file is one JSON header line followed by fixed-size little-endian
records: three int32 frequencies, then (re, im) float64 pairs per component.
"""
import json
import os

import numpy as np

from .errors import FormatError
from .spectral import NCOMP, SpectralField, pack
from .timefield import TimeField

FORMAT = "CIFLD1"
RANK_NAMES = {"scalar": "scalar", "vector": "vector3", "tensor_sym": "tensor3x3-symmetric",
              "tensor": "tensor3x3"}
_RANK_FROM_FILE = {v: k for k, v in RANK_NAMES.items()}


def _record_dtype(ncomp):
    return np.dtype([("k", "<i4", (3,)), ("c", "<f8", (ncomp, 2))])


def field_to_bytes(f, time=None):
    header = {"format": FORMAT, "rank": RANK_NAMES[f.rank], "ncomponents": f.ncomp,
              "nmodes": f.nmodes}
    if time is not None:
        header["time"] = float(time)
    rec = np.zeros(f.nmodes, _record_dtype(f.ncomp))
    rec["k"] = f.modes
    rec["c"][..., 0] = f.coeffs.real
    rec["c"][..., 1] = f.coeffs.imag
    return (json.dumps(header, sort_keys=True) + "\n").encode() + rec.tobytes()


def field_from_bytes(data):
    """Parse CIFLD1 bytes; returns (field, header)."""
    nl = data.find(b"\n")
    if nl < 0:
        raise FormatError("missing header line")
    try:
        header = json.loads(data[:nl].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad header: {exc}") from exc
    if not isinstance(header, dict) or header.get("format") != FORMAT:
        raise FormatError(f"unknown format {header.get('format') if isinstance(header, dict) else header!r}")
    rank = _RANK_FROM_FILE.get(header.get("rank"))
    if rank is None:
        raise FormatError(f"unknown rank {header.get('rank')!r}")
    ncomp, nmodes = int(header.get("ncomponents", -1)), int(header.get("nmodes", -1))
    if ncomp != NCOMP[rank] or nmodes < 0:
        raise FormatError("component or mode count inconsistent with rank")
    dt = _record_dtype(ncomp)
    body = data[nl + 1:]
    if len(body) != nmodes * dt.itemsize:
        raise FormatError(f"expected {nmodes * dt.itemsize} payload bytes, got {len(body)}")
    rec = np.frombuffer(body, dt)
    modes = rec["k"].astype(np.int64)
    coeffs = rec["c"][..., 0] + 1j * rec["c"][..., 1]
    keys = pack(modes)
    order = np.argsort(keys, kind="stable")
    keys, coeffs = keys[order], coeffs[order]
    if len(keys) > 1 and np.any(np.diff(keys) == 0):
        raise FormatError("duplicate modes")
    f = SpectralField(keys, coeffs, rank, real=False)
    if f.reality_defect() == 0.0:
        f = SpectralField(keys, coeffs, rank, real=True)
    return f, header


def write_field(path, f, time=None):
    with open(path, "wb") as fh:
        fh.write(field_to_bytes(f, time))


def read_field(path):
    with open(path, "rb") as fh:
        return field_from_bytes(fh.read())


# TripleState directories ------------------------------------------------------
def _write_tf(dirpath, name, tf):
    entries = []
    for i, jet in enumerate(tf.jets):
        names = []
        for m, f in enumerate(jet):
            fn = f"{name}_{i:03d}_{m}.cifld"
            write_field(os.path.join(dirpath, fn), f, tf.times[i])
            names.append(fn)
        entries.append(names)
    return {"files": entries, "support": None if tf.support is None else list(tf.support)}


def _read_tf(dirpath, times, spec):
    jets = [[read_field(os.path.join(dirpath, fn))[0] for fn in names] for names in spec["files"]]
    return TimeField(times, jets, spec.get("support"))


def save_state(state, dirpath, extra=None):
    """Write v, p, R as CIFLD1 files plus ``manifest.json``."""
    os.makedirs(dirpath, exist_ok=True)
    manifest = {"format": "TRIPLE1", "times": [float(t) for t in state.times],
                "v": _write_tf(dirpath, "v", state.v), "p": _write_tf(dirpath, "p", state.p),
                "R": _write_tf(dirpath, "R", state.R),
                "params": None if state.params_used is None else state.params_used.to_dict()}
    if extra:
        manifest.update(extra)
    with open(os.path.join(dirpath, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def load_state(dirpath):
    from .params import ParamSet
    from .step import TripleState
    path = os.path.join(dirpath, "manifest.json")
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad manifest: {exc}") from exc
    if manifest.get("format") != "TRIPLE1":
        raise FormatError(f"unknown manifest format {manifest.get('format')!r}")
    times = manifest["times"]
    params = manifest.get("params")
    return TripleState(_read_tf(dirpath, times, manifest["v"]),
                       _read_tf(dirpath, times, manifest["p"]),
                       _read_tf(dirpath, times, manifest["R"]),
                       None if params is None else ParamSet.from_dict(params))
