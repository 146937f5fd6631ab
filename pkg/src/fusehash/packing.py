"""Bit-packed binary codes and popcount Hamming distances.

In memory a code matrix is an ``(r, n)`` integer array over {-1, +1} with
one column per sample. Packed form stores each column as ``ceil(r / 8)``
bytes, LSB-first: bit ``i`` of a column sits at byte ``i // 8``, bit
``i % 8``, with +1 mapped to 1 and -1 to 0. Padding bits are zero on both
sides of a comparison, so packed distances are exact.
"""

from __future__ import annotations

import numpy as np

from .exceptions import InvalidParameterError, ShapeError


def sign_to_pm1(values) -> np.ndarray:
    """Elementwise sign with the deterministic tie rule sign(0) = +1."""
    arr = np.asarray(values)
    return np.where(arr >= 0, 1, -1).astype(np.int8)


def pack_codes(codes) -> np.ndarray:
    """Pack an ``(r, n)`` matrix over {-1, +1} into ``(ceil(r/8), n)`` uint8."""
    arr = np.asarray(codes)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-d code matrix, got shape {arr.shape}")
    if not np.all(np.abs(arr) == 1):
        raise InvalidParameterError("code entries must be -1 or +1")
    bits = (arr > 0).astype(np.uint8)
    return np.packbits(bits, axis=0, bitorder="little")


def unpack_codes(packed, code_length: int) -> np.ndarray:
    """Inverse of :func:`pack_codes` for a known code length."""
    arr = np.asarray(packed, dtype=np.uint8)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-d packed matrix, got shape {arr.shape}")
    if code_length < 1 or arr.shape[0] != (code_length + 7) // 8:
        raise ShapeError(
            f"{arr.shape[0]} packed rows cannot hold {code_length} code bits"
        )
    bits = np.unpackbits(arr, axis=0, count=code_length, bitorder="little")
    return np.where(bits > 0, 1, -1).astype(np.int8)


def packed_hamming(query, database) -> np.ndarray:
    """Hamming distances between one packed column and every packed column.

    ``query`` is the ``(bytes,)`` packed form of a single code, ``database``
    the ``(bytes, n)`` packed form of ``n`` codes with the same length.
    """
    q = np.asarray(query, dtype=np.uint8)
    db = np.asarray(database, dtype=np.uint8)
    if q.ndim != 1 or db.ndim != 2 or q.shape[0] != db.shape[0]:
        raise ShapeError(
            f"packed shapes {q.shape} and {db.shape} are not comparable"
        )
    xored = np.bitwise_xor(db, q[:, None])
    return np.bitwise_count(xored).sum(axis=0, dtype=np.int64)
