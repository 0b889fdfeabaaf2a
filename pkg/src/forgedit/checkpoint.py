"""Checkpoint archive: parameter-path -> array plus a layout manifest.

Format: an uncompressed zip with fixed (epoch) timestamps holding
`manifest.json` and one little-endian `.npy` entry per parameter path.
Fixed metadata makes save -> load -> save reproduce identical bytes.
"""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path

import numpy as np

from .errors import ArgumentError
from .unet import DenoiserParams, StageLayout

_FORMAT = "forgedit-checkpoint-v1"
_EPOCH = (1980, 1, 1, 0, 0, 0)


def _zip_entry(zf: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def checkpoint_bytes(params: DenoiserParams, layout: StageLayout) -> bytes:
    manifest = {
        "format": _FORMAT,
        "layout": layout.to_dict(),
        "paths": params.paths(),
    }
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        _zip_entry(zf, "manifest.json", json.dumps(manifest, sort_keys=True).encode())
        for path, arr in params.items():
            a = io.BytesIO()
            np.save(a, np.ascontiguousarray(arr, dtype="<f8"))
            _zip_entry(zf, f"params/{path}.npy", a.getvalue())
    return buf.getvalue()


def save_checkpoint(path, params: DenoiserParams, layout: StageLayout) -> None:
    Path(path).write_bytes(checkpoint_bytes(params, layout))


def load_checkpoint(path) -> tuple[DenoiserParams, StageLayout]:
    raw = Path(path).read_bytes() if not isinstance(path, (bytes, bytearray)) else bytes(path)
    with zipfile.ZipFile(io.BytesIO(raw)) as zf:
        manifest = json.loads(zf.read("manifest.json"))
        if manifest.get("format") != _FORMAT:
            raise ArgumentError(f"not a checkpoint archive: format={manifest.get('format')!r}")
        layout = StageLayout.from_dict(manifest["layout"])
        entries = {}
        for p in manifest["paths"]:
            entries[p] = np.load(io.BytesIO(zf.read(f"params/{p}.npy")))
    return DenoiserParams(entries), layout
