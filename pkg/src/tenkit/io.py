"""On-disk formats and atomic writers.

``.ten`` layout: 8-byte magic ``TENKIT01``, uint32 LE order d, d uint64 LE
dims, then the entries as float64 LE in first-index-fastest order.
"""

from __future__ import annotations

import io
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .core import DenseTensor, check_shape

MAGIC = b"TENKIT01"


class FormatError(ValueError):
    pass


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write to a sibling temp file, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def fmt_float(x: float) -> str:
    """17 significant digits, '.' decimal separator."""
    return format(float(x), ".17g")


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    atomic_write_text(path, dump_json(obj))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_csv_cell(v) for v in row) + "\n")
    atomic_write_text(path, buf.getvalue())


def _csv_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    return str(v)


def tensor_to_bytes(t: DenseTensor) -> bytes:
    head = MAGIC + struct.pack("<I", t.order) + struct.pack(f"<{t.order}Q", *t.shape)
    return head + t.data.astype("<f8").tobytes()


def tensor_from_bytes(buf: bytes) -> DenseTensor:
    if len(buf) < 12 or buf[:8] != MAGIC:
        raise FormatError("not a .ten file (bad magic)")
    (d,) = struct.unpack_from("<I", buf, 8)
    off = 12 + 8 * d
    if d < 1 or len(buf) < off:
        raise FormatError("truncated .ten header")
    dims = check_shape(struct.unpack_from(f"<{d}Q", buf, 12))
    count = int(np.prod(dims))
    if len(buf) != off + 8 * count:
        raise FormatError(f"expected {count} float64 entries after header")
    data = np.frombuffer(buf, dtype="<f8", count=count, offset=off)
    return DenseTensor(data, dims)


def write_ten(path, t: DenseTensor) -> None:
    atomic_write_bytes(path, tensor_to_bytes(t))


def read_ten(path) -> DenseTensor:
    return tensor_from_bytes(Path(path).read_bytes())


def write_matrix_ten(path, m) -> None:
    """Matrices are stored as 2-way ``.ten`` tensors (column-major)."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    write_ten(path, DenseTensor(m))


def read_matrix_ten(path) -> np.ndarray:
    t = read_ten(path)
    if t.order == 1:
        return np.array(t.array)[:, None]
    if t.order != 2:
        raise FormatError(f"{path}: expected a matrix, got order {t.order}")
    # row-major like freshly built arrays, so loaded models compute bit-identically
    return np.ascontiguousarray(t.array)


def tensor_to_json(t: DenseTensor) -> dict:
    return {"shape": list(t.shape), "data": [float(x) for x in t.data]}


def tensor_from_json(obj) -> DenseTensor:
    try:
        return DenseTensor(np.asarray(obj["data"], dtype=np.float64), obj["shape"])
    except KeyError as exc:
        raise FormatError(f"tensor JSON missing field {exc}") from None


def read_tensor(path) -> DenseTensor:
    """Read either a ``.ten`` file or a JSON sidecar tensor."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return tensor_from_json(read_json(path))
    return read_ten(path)


def write_tensor(path, t: DenseTensor) -> None:
    path = Path(path)
    if path.suffix.lower() == ".json":
        write_json(path, tensor_to_json(t))
    else:
        write_ten(path, t)
