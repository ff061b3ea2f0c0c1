"""Dense kernels shared by all operators, plus the NRTF tensor file format.

Thin numpy wrappers: the value they add is shape validation (ShapeError) and
finiteness checking (NumericError) at the package boundary. NaN or Inf anywhere
is treated as an error state, not a value.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ConfigError, NumericError, ShapeError


def _require_finite(x: np.ndarray, op: str) -> None:
    if not np.isfinite(x).all():
        raise NumericError(f"{op}: non-finite operand")


def matvec(W: np.ndarray, x: np.ndarray) -> np.ndarray:
    if W.ndim != 2 or x.ndim != 1 or W.shape[1] != x.shape[0]:
        raise ShapeError(f"matvec: incompatible shapes {W.shape} @ {x.shape}")
    y = W @ x
    if not np.isfinite(y).all():
        raise NumericError("matvec: non-finite result")
    return y


def relu(x: np.ndarray) -> np.ndarray:
    _require_finite(x, "relu")
    return np.maximum(x, 0)


def leaky_relu(x: np.ndarray, negative_slope: float = 0.2) -> np.ndarray:
    _require_finite(x, "leaky_relu")
    return np.where(x >= 0, x, negative_slope * x)


def elu(x: np.ndarray, alpha: float = 1.0) -> np.ndarray:
    _require_finite(x, "elu")
    return np.where(x >= 0, x, alpha * np.expm1(np.minimum(x, 0)))


def sigmoid(x: np.ndarray) -> np.ndarray:
    _require_finite(x, "sigmoid")
    # two-branch form, stable for large |x|
    pos = 1.0 / (1.0 + np.exp(-np.maximum(x, 0)))
    ex = np.exp(np.minimum(x, 0))
    neg = ex / (1.0 + ex)
    return np.where(x >= 0, pos, neg)


def exp(x: np.ndarray) -> np.ndarray:
    _require_finite(x, "exp")
    y = np.exp(x)
    if not np.isfinite(y).all():
        raise NumericError("exp: overflow to non-finite")
    return y


def axpy(alpha: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if x.shape != y.shape:
        raise ShapeError(f"axpy: shape mismatch {x.shape} vs {y.shape}")
    out = y + alpha * x
    if not np.isfinite(out).all():
        raise NumericError("axpy: non-finite result")
    return out


# ---- NRTF: binary container for one 2-D tensor ----
#
# Layout (little-endian): magic "NRTF", u32 version (=1), u8 dtype code
# (0 = float32, 1 = float64), u64 rows, u64 cols, then rows*cols values
# row-major.

_MAGIC = b"NRTF"
_VERSION = 1
_HEADER = struct.Struct("<4sIBQQ")
_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def write_tensor(path: str, array: np.ndarray) -> None:
    arr = np.asarray(array)
    if arr.ndim != 2:
        raise ConfigError(f"NRTF stores 2-D tensors, got shape {arr.shape}")
    if arr.dtype == np.float32:
        code = 0
    elif arr.dtype == np.float64:
        code = 1
    else:
        raise ConfigError(f"NRTF supports float32/float64, got {arr.dtype}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, code, arr.shape[0], arr.shape[1]))
        fh.write(np.ascontiguousarray(arr, dtype=_DTYPE_CODES[code]).tobytes())


def read_tensor(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ConfigError(f"{path}: truncated NRTF header")
        magic, version, code, rows, cols = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise ConfigError(f"{path}: bad magic {magic!r}")
        if version != _VERSION:
            raise ConfigError(f"{path}: unsupported NRTF version {version}")
        if code not in _DTYPE_CODES:
            raise ConfigError(f"{path}: unknown dtype code {code}")
        dt = _DTYPE_CODES[code]
        payload = fh.read()
    expect = rows * cols * dt.itemsize
    if len(payload) != expect:
        raise ConfigError(f"{path}: payload is {len(payload)} bytes, expected {expect}")
    data = np.frombuffer(payload, dtype=dt).reshape(rows, cols)
    return data.astype(dt.newbyteorder("="), copy=True)
