"""Parameter archives: a zip holding a metadata document plus one raw
little-endian float32 payload per parameter. Round-trips are byte-exact and
archives are written with fixed entry timestamps so identical parameters
produce identical files."""

from __future__ import annotations

import io
import json
import zipfile

import numpy as np

from ..errors import FormatError

FORMAT_VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


def save_params(path, named_values, extra=None):
    """Write ``name -> ndarray`` to ``path``. ``extra`` is an arbitrary
    JSON-serializable metadata dict stored alongside."""
    entries = []
    payloads = []
    for i, name in enumerate(sorted(named_values)):
        arr = np.ascontiguousarray(named_values[name], dtype="<f4")
        fname = f"params/{i:05d}.bin"
        entries.append({"name": name, "shape": list(arr.shape), "file": fname})
        payloads.append((fname, arr.tobytes()))
    meta = {
        "format_version": FORMAT_VERSION,
        "dtype": "float32",
        "params": entries,
        "extra": extra or {},
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        info = zipfile.ZipInfo("meta.json", date_time=_EPOCH)
        zf.writestr(info, json.dumps(meta, indent=1, sort_keys=True))
        for fname, blob in payloads:
            info = zipfile.ZipInfo(fname, date_time=_EPOCH)
            zf.writestr(info, blob)


def load_params(path):
    """Read an archive back; returns (name -> float32 ndarray, extra dict)."""
    try:
        with zipfile.ZipFile(path, "r") as zf:
            try:
                meta = json.loads(zf.read("meta.json"))
            except KeyError:
                raise FormatError(f"{path}: missing meta.json")
            if meta.get("format_version") != FORMAT_VERSION:
                raise FormatError(f"{path}: unsupported format version "
                                  f"{meta.get('format_version')!r}")
            if meta.get("dtype") != "float32":
                raise FormatError(f"{path}: unsupported dtype {meta.get('dtype')!r}")
            out = {}
            for entry in meta["params"]:
                blob = zf.read(entry["file"])
                shape = tuple(entry["shape"])
                expected = int(np.prod(shape, dtype=np.int64)) * 4 if shape else 4
                if len(blob) != expected:
                    raise FormatError(f"{path}: parameter '{entry['name']}' payload is "
                                      f"{len(blob)} bytes, expected {expected}")
                out[entry["name"]] = np.frombuffer(blob, dtype="<f4").reshape(shape).copy()
            return out, meta.get("extra", {})
    except zipfile.BadZipFile as e:
        raise FormatError(f"{path}: not a readable archive ({e})")
    except OSError as e:
        raise FormatError(f"cannot read checkpoint: {e}")


def _roundtrip_bytes(named_values):
    buf = io.BytesIO()
    save_params(buf, named_values)
    return buf.getvalue()
