"""Named parameter store and the binary checkpoint format.

Checkpoint layout: magic "SDEXPARM", version u32 LE, then one block per
parameter: name length u32 + UTF-8 name, rank u32, extents u32 each,
row-major float64 LE payload. Blocks repeat until EOF.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from shelfdex.errors import DataError, DimensionError
from shelfdex.numkit.tensor import Tensor

MAGIC = b"SDEXPARM"
VERSION = 1


class ParamStore:
    """Ordered map name -> trainable Tensor, with a parallel gradient view."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data) -> Tensor:
        if name in self._params:
            raise DimensionError(f"duplicate parameter name {name!r}")
        t = Tensor(data, requires_grad=True, name=name)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def grad(self, name: str) -> np.ndarray:
        t = self._params[name]
        if t.grad is None:
            return np.zeros_like(t.data)
        if t.grad.shape != t.data.shape:
            raise DimensionError(f"gradient shape mismatch for {name!r}")
        return t.grad

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def n_entries(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def clone(self) -> "ParamStore":
        out = ParamStore()
        for name, t in self._params.items():
            out.add(name, t.data.copy())
        return out

    # -- checkpoint I/O ---------------------------------------------------------

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<I", VERSION))
            for name, t in self._params.items():
                raw = name.encode("utf-8")
                f.write(struct.pack("<I", len(raw)))
                f.write(raw)
                arr = np.ascontiguousarray(t.data, dtype="<f8")
                f.write(struct.pack("<I", arr.ndim))
                f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
                f.write(arr.tobytes())

    @staticmethod
    def load(path) -> "ParamStore":
        blob = Path(path).read_bytes()
        if blob[: len(MAGIC)] != MAGIC:
            raise DataError(f"{path}: bad magic, not a parameter checkpoint")
        (version,) = struct.unpack_from("<I", blob, len(MAGIC))
        if version != VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        off = len(MAGIC) + 4
        store = ParamStore()
        while off < len(blob):
            (nlen,) = struct.unpack_from("<I", blob, off)
            off += 4
            name = blob[off : off + nlen].decode("utf-8")
            off += nlen
            (rank,) = struct.unpack_from("<I", blob, off)
            off += 4
            shape = struct.unpack_from(f"<{rank}I", blob, off)
            off += 4 * rank
            count = int(np.prod(shape)) if rank else 1
            arr = np.frombuffer(blob, dtype="<f8", count=count, offset=off)
            off += 8 * count
            store.add(name, arr.reshape(shape).astype(np.float64))
        return store
