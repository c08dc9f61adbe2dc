"""GF(2) linear algebra on numpy uint8 arrays (entries 0/1, payload rows are bytes)."""
from __future__ import annotations

from typing import List, Optional, Tuple

import numpy as np

from ..errors import UnsolvableError


def as_matrix(rows) -> np.ndarray:
    m = np.asarray(rows, dtype=np.uint8)
    if m.ndim == 1:
        m = m.reshape(1, -1) if m.size else m.reshape(0, 0)
    return m & 1


def rank(matrix) -> int:
    work = as_matrix(matrix).copy()
    if work.size == 0:
        return 0
    n_rows, n_cols = work.shape
    r = 0
    for col in range(n_cols):
        pivots = np.nonzero(work[r:, col])[0]
        if pivots.size == 0:
            continue
        p = r + int(pivots[0])
        if p != r:
            work[[r, p]] = work[[p, r]]
        others = np.nonzero(work[:, col])[0]
        others = others[others != r]
        work[others] ^= work[r]
        r += 1
        if r == n_rows:
            break
    return r


def solve(coeffs, payloads: np.ndarray) -> np.ndarray:
    """Solve coeffs @ X = payloads over GF(2), X having one row per unknown.

    ``payloads`` rows are byte vectors combined with XOR. Raises UnsolvableError
    when coeffs does not have full column rank.
    """
    a = as_matrix(coeffs).copy()
    b = np.asarray(payloads, dtype=np.uint8).copy()
    if a.shape[0] != b.shape[0]:
        raise ValueError("one payload row per equation is required")
    n_rows, n_unknowns = a.shape if a.size else (0, 0)
    if n_unknowns == 0 or n_rows < n_unknowns:
        raise UnsolvableError(f"{n_rows} equations cannot determine {n_unknowns} unknowns")
    r = 0
    pivot_cols: List[int] = []
    for col in range(n_unknowns):
        pivots = np.nonzero(a[r:, col])[0]
        if pivots.size == 0:
            continue
        p = r + int(pivots[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
            b[[r, p]] = b[[p, r]]
        others = np.nonzero(a[:, col])[0]
        others = others[others != r]
        a[others] ^= a[r]
        b[others] ^= b[r]
        pivot_cols.append(col)
        r += 1
        if r == n_rows:
            break
    if r < n_unknowns:
        raise UnsolvableError(f"rank {r} < {n_unknowns}")
    # reduced row echelon with full column rank: row i holds unknown i
    return b[:n_unknowns]


class IncrementalBasis:
    """Row-echelon basis that reports whether a new vector adds rank."""

    def __init__(self, n_cols: int):
        self.n_cols = n_cols
        self.rows: List[Tuple[int, np.ndarray]] = []

    @property
    def rank(self) -> int:
        return len(self.rows)

    def reduce(self, vec) -> np.ndarray:
        v = as_matrix(vec).reshape(-1).copy()
        for pivot, row in self.rows:
            if v[pivot]:
                v ^= row
        return v

    def add(self, vec) -> bool:
        v = self.reduce(vec)
        nz = np.nonzero(v)[0]
        if nz.size == 0:
            return False
        self.rows.append((int(nz[0]), v))
        return True


def brute_force_solve(coeffs, payloads) -> Optional[np.ndarray]:
    """Exhaustive solver for tiny systems, one bit plane at a time.

    Returns the unique solution, or None when some bit plane has no or several
    satisfying assignments.
    """
    a = as_matrix(coeffs)
    b = np.asarray(payloads, dtype=np.uint8).reshape(a.shape[0], -1)
    n = a.shape[1]
    out = np.zeros((n, b.shape[1]), dtype=np.uint8)
    assignments = [np.array([(v >> i) & 1 for i in range(n)], dtype=np.uint8) for v in range(2 ** n)]
    for byte in range(b.shape[1]):
        for bit in range(8):
            target = (b[:, byte] >> bit) & 1
            fits = [x for x in assignments if np.array_equal(a.astype(np.int64) @ x % 2, target)]
            if len(fits) != 1:
                return None
            out[:, byte] |= (fits[0] << bit).astype(np.uint8)
    return out
