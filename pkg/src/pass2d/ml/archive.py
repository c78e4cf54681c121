"""Deterministic model files: a zip with ``meta.json`` plus one ``.npy`` per array.

``np.savez`` stamps entries with the wall clock, which breaks byte-identical
reruns, so entries here get a fixed timestamp.
"""

from __future__ import annotations

import io
import json
import zipfile

import numpy as np

FORMAT = "pass2d-model"
VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


def save(path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    header = {"format": FORMAT, "version": VERSION, "kind": kind, **meta}
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        info = zipfile.ZipInfo("meta.json", _EPOCH)
        info.compress_type = zipfile.ZIP_DEFLATED
        zf.writestr(info, json.dumps(header, sort_keys=True, indent=1))
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.save(buf, np.ascontiguousarray(arrays[name]), allow_pickle=False)
            info = zipfile.ZipInfo(f"{name}.npy", _EPOCH)
            info.compress_type = zipfile.ZIP_DEFLATED
            zf.writestr(info, buf.getvalue())


def load(path) -> tuple[dict, dict[str, np.ndarray]]:
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("meta.json"))
        if meta.get("format") != FORMAT:
            raise ValueError(f"{path}: not a {FORMAT} file")
        if meta.get("version") != VERSION:
            raise ValueError(f"{path}: unsupported model version {meta.get('version')}")
        arrays = {}
        for name in zf.namelist():
            if name.endswith(".npy"):
                arrays[name[:-4]] = np.load(io.BytesIO(zf.read(name)), allow_pickle=False)
    return meta, arrays


def peek_kind(path) -> str:
    with zipfile.ZipFile(path) as zf:
        return json.loads(zf.read("meta.json"))["kind"]
