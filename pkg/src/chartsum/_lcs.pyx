# cython: language_level=3
# cython: boundscheck=False
# cython: wraparound=False
"""Compiled LCS kernel; must stay behaviourally identical to _lcs_py.lcs_length_ids."""

import numpy as np


def lcs_length_ids(const int[::1] a, const int[::1] b) -> int:
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    if n == 0 or m == 0:
        return 0
    if m > n:
        a, b = b, a
        n, m = m, n
    row_arr = np.zeros(m + 1, dtype=np.intc)
    cdef int[::1] row = row_arr
    cdef Py_ssize_t i, j
    cdef int prev, cur, x
    for i in range(n):
        x = a[i]
        prev = 0
        for j in range(1, m + 1):
            cur = row[j]
            if x == b[j - 1]:
                row[j] = prev + 1
            elif row[j - 1] > cur:
                row[j] = row[j - 1]
            prev = cur
    return int(row[m])
