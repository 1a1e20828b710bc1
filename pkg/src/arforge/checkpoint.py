"""Checkpoint files: a text manifest plus a raw little-endian float64 blob.

`<prefix>.manifest` holds one line per tensor, `name<TAB>d1,d2,...<TAB>f64`,
in save order; `<prefix>.blob` is the concatenation of the tensors' values
as little-endian 64-bit floats in that same order.  Load errors name the
offending file.
"""

from __future__ import annotations

import os
from typing import Iterable, Mapping

import numpy as np

from .tensor import Tensor


class CheckpointError(ValueError):
    pass


def save_tensors(prefix: str | os.PathLike, named: Mapping[str, Tensor] | Iterable[tuple[str, Tensor]]) -> None:
    items = list(named.items()) if isinstance(named, Mapping) else list(named)
    lines = []
    chunks = []
    for name, tensor in items:
        if "\t" in name or "\n" in name:
            raise CheckpointError(f"tensor name {name!r} may not contain tabs or newlines")
        values = tensor.values if isinstance(tensor, Tensor) else np.asarray(tensor, dtype=np.float64)
        dims = ",".join(str(d) for d in values.shape)
        lines.append(f"{name}\t{dims}\tf64")
        chunks.append(np.ascontiguousarray(values, dtype="<f8").tobytes())
    with open(f"{prefix}.manifest", "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))
    with open(f"{prefix}.blob", "wb") as fh:
        fh.write(b"".join(chunks))


def load_tensors(prefix: str | os.PathLike) -> dict[str, np.ndarray]:
    """Read a checkpoint back into an ordered name -> float64 array dict."""
    manifest_path = f"{prefix}.manifest"
    blob_path = f"{prefix}.blob"
    entries: list[tuple[str, tuple[int, ...]]] = []
    try:
        fh = open(manifest_path, encoding="utf-8")
    except OSError as exc:
        raise CheckpointError(f"{manifest_path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3 or parts[2] != "f64":
                raise CheckpointError(f"{manifest_path}:{lineno}: malformed entry {line!r}")
            try:
                dims = tuple(int(d) for d in parts[1].split(",")) if parts[1] else ()
            except ValueError:
                raise CheckpointError(
                    f"{manifest_path}:{lineno}: malformed shape {parts[1]!r}") from None
            entries.append((parts[0], dims))
    try:
        blob = np.fromfile(blob_path, dtype="<f8")
    except OSError as exc:
        raise CheckpointError(f"{blob_path}: {exc.strerror}") from None
    expected = sum(int(np.prod(dims, dtype=np.int64)) if dims else 1 for _, dims in entries)
    if blob.size != expected:
        raise CheckpointError(
            f"{blob_path}: holds {blob.size} values but the manifest lists {expected}")
    out: dict[str, np.ndarray] = {}
    offset = 0
    for name, dims in entries:
        count = int(np.prod(dims, dtype=np.int64)) if dims else 1
        out[name] = blob[offset:offset + count].astype(np.float64).reshape(dims)
        offset += count
    return out


def save_config_sidecar(path: str | os.PathLike, fields: Mapping[str, object]) -> None:
    """Plain key=value text file, one field per line, in insertion order."""
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in fields.items():
            fh.write(f"{key}={value}\n")


def load_config_sidecar(path: str | os.PathLike) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "=" not in line:
                raise CheckpointError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            out[key] = value
    return out
