"""Bit-packed GF(2) linear algebra.

Rows are stored as little-endian uint64 words (bit ``c`` of the row lives in
word ``c >> 6`` at position ``c & 63``), so row XOR is a vectorized word XOR
and dot products are popcounts.  Enough for the systematic-form precode
encoder and for rank/solvability oracles at simulation sizes.
"""
from __future__ import annotations

import numpy as np


def _num_words(ncols: int) -> int:
    return (ncols + 63) >> 6


def rows_from_support(supports, ncols: int) -> np.ndarray:
    """Packed rows from per-row column-index lists.

    Repeated indices within a row cancel mod 2, matching GF(2) semantics.
    """
    packed = np.zeros((len(supports), _num_words(ncols)), dtype=np.uint64)
    for r, cols in enumerate(supports):
        cols = np.asarray(cols, dtype=np.int64)
        if cols.size == 0:
            continue
        if cols.min() < 0 or cols.max() >= ncols:
            raise ValueError(f"row {r} has column indices outside [0, {ncols})")
        np.bitwise_xor.at(
            packed[r],
            cols >> 6,
            np.uint64(1) << (cols & 63).astype(np.uint64),
        )
    return packed


def pack_rows(dense) -> np.ndarray:
    """Packed rows from a dense 0/1 matrix."""
    dense = np.asarray(dense, dtype=np.uint64) & np.uint64(1)
    m, n = dense.shape
    padded = np.zeros((m, _num_words(n) * 64), dtype=np.uint64)
    padded[:, :n] = dense
    weights = np.uint64(1) << np.arange(64, dtype=np.uint64)
    return (padded.reshape(m, -1, 64) * weights).sum(axis=2, dtype=np.uint64)


def unpack_rows(packed: np.ndarray, ncols: int) -> np.ndarray:
    """Dense uint8 0/1 matrix from packed rows."""
    packed = np.atleast_2d(packed)
    bits = (packed[:, :, None] >> np.arange(64, dtype=np.uint64)) & np.uint64(1)
    return bits.reshape(packed.shape[0], -1)[:, :ncols].astype(np.uint8)


def get_column(packed: np.ndarray, col: int) -> np.ndarray:
    return ((packed[:, col >> 6] >> np.uint64(col & 63)) & np.uint64(1)).astype(bool)


def rref(packed: np.ndarray, ncols: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row-echelon form over GF(2).

    Returns a copy in RREF together with the pivot column list (its length is
    the rank).  Fully reduced: each pivot column has a single 1, so solving
    for the pivot variables is a direct read-off.
    """
    a = packed.copy()
    m = a.shape[0]
    pivot_cols: list[int] = []
    pivot_row = 0
    for col in range(ncols):
        if pivot_row == m:
            break
        column = get_column(a, col)
        column[:pivot_row] = False
        hits = np.flatnonzero(column)
        if hits.size == 0:
            continue
        first = hits[0]
        if first != pivot_row:
            a[[pivot_row, first]] = a[[first, pivot_row]]
        # Eliminate everywhere else (above and below).
        column = get_column(a, col)
        column[pivot_row] = False
        a[column] ^= a[pivot_row]
        pivot_cols.append(col)
        pivot_row += 1
    return a, pivot_cols


def rank(packed: np.ndarray, ncols: int) -> int:
    return len(rref(packed, ncols)[1])


def dot_rows(packed: np.ndarray, vector_packed: np.ndarray) -> np.ndarray:
    """GF(2) inner product of every packed row with one packed vector."""
    return (
        np.bitwise_count(packed & vector_packed[None, :]).sum(axis=1) & 1
    ).astype(np.uint8)


def pack_vector(bits) -> np.ndarray:
    return pack_rows(np.asarray(bits, dtype=np.uint64)[None, :])[0]
