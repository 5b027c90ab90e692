"""Longest-common-subsequence kernels over integer token-id arrays.

The O(n*m) dynamic program is the one numeric hot loop in evaluation, so it
carries a numba-jitted implementation with a vectorized numpy fallback.
Set ``SOTAPIPE_NO_NUMBA=1`` to force the numpy path (the benchmark under
``benchmarks/`` compares the two).
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("SOTAPIPE_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

if not _DISABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        njit = None
else:
    njit = None

NUMBA_ENABLED = njit is not None


# -- numpy implementations ---------------------------------------------------
#
# Row sweep over the equivalent recurrence
#   L[i,j] = max(L[i-1,j], L[i-1,j-1] + eq(i,j), L[i,j-1])
# where the horizontal dependency resolves to a running maximum, so each row
# is one vectorized maximum.accumulate.

def _lcs_length_np(a: np.ndarray, b: np.ndarray) -> int:
    m = b.size
    prev = np.zeros(m + 1, dtype=np.int64)
    cur = np.empty(m + 1, dtype=np.int64)
    for ai in a:
        cur[0] = 0
        np.maximum(prev[1:], prev[:-1] + (b == ai), out=cur[1:])
        np.maximum.accumulate(cur, out=cur)
        prev, cur = cur, prev
    return int(prev[m])


def _lcs_table_np(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, m = a.size, b.size
    table = np.zeros((n + 1, m + 1), dtype=np.int64)
    for i in range(1, n + 1):
        prev = table[i - 1]
        cur = table[i]
        np.maximum(prev[1:], prev[:-1] + (b == a[i - 1]), out=cur[1:])
        np.maximum.accumulate(cur, out=cur)
    return table


# -- numba implementations ---------------------------------------------------

if NUMBA_ENABLED:

    @njit(cache=True)
    def _lcs_length_nb(a, b):  # pragma: no cover - exercised via dispatch
        n = a.size
        m = b.size
        prev = np.zeros(m + 1, dtype=np.int64)
        cur = np.zeros(m + 1, dtype=np.int64)
        for i in range(n):
            ai = a[i]
            for j in range(1, m + 1):
                if ai == b[j - 1]:
                    cur[j] = prev[j - 1] + 1
                elif prev[j] >= cur[j - 1]:
                    cur[j] = prev[j]
                else:
                    cur[j] = cur[j - 1]
            prev, cur = cur, prev
        return prev[m]

    @njit(cache=True)
    def _lcs_table_nb(a, b):  # pragma: no cover - exercised via dispatch
        n = a.size
        m = b.size
        table = np.zeros((n + 1, m + 1), dtype=np.int64)
        for i in range(1, n + 1):
            ai = a[i - 1]
            for j in range(1, m + 1):
                if ai == b[j - 1]:
                    table[i, j] = table[i - 1, j - 1] + 1
                elif table[i - 1, j] >= table[i, j - 1]:
                    table[i, j] = table[i - 1, j]
                else:
                    table[i, j] = table[i, j - 1]
        return table


# -- public dispatch ----------------------------------------------------------

def lcs_length(a: np.ndarray, b: np.ndarray) -> int:
    """Length of the LCS of two int64 id arrays."""
    if a.size == 0 or b.size == 0:
        return 0
    if NUMBA_ENABLED:
        return int(_lcs_length_nb(a, b))
    return _lcs_length_np(a, b)


def lcs_match_mask(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Boolean mask over positions of `a` participating in one LCS with `b`.

    The backtrack is deterministic (prefers consuming `a` on ties), so equal
    inputs always yield the same mask.
    """
    mask = np.zeros(a.size, dtype=bool)
    if a.size == 0 or b.size == 0:
        return mask
    table = _lcs_table_nb(a, b) if NUMBA_ENABLED else _lcs_table_np(a, b)
    i, j = a.size, b.size
    while i > 0 and j > 0:
        if a[i - 1] == b[j - 1] and table[i, j] == table[i - 1, j - 1] + 1:
            mask[i - 1] = True
            i -= 1
            j -= 1
        elif table[i - 1, j] >= table[i, j - 1]:
            i -= 1
        else:
            j -= 1
    return mask
