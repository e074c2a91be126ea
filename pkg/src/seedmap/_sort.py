"""Allocation-free sorting helpers for jitted stages."""

from numba import njit


@njit(cache=True, nogil=True, inline="always")
def _row_less(keys, a, b):
    for c in range(keys.shape[1]):
        if keys[a, c] < keys[b, c]:
            return True
        if keys[a, c] > keys[b, c]:
            return False
    return a < b


@njit(cache=True, nogil=True)
def heap_sort_rows(keys, idx, lo, hi):
    """Sort idx[lo:hi] in place by lexicographic order of keys[idx[.]] (ties: by row id)."""
    n = hi - lo
    if n < 2:
        return
    if n <= 16:
        for i in range(lo + 1, hi):
            v = idx[i]
            j = i - 1
            while j >= lo and _row_less(keys, v, idx[j]):
                idx[j + 1] = idx[j]
                j -= 1
            idx[j + 1] = v
        return
    start = n // 2 - 1
    while start >= 0:
        _sift(keys, idx, lo, start, n)
        start -= 1
    end = n - 1
    while end > 0:
        tmp = idx[lo]
        idx[lo] = idx[lo + end]
        idx[lo + end] = tmp
        _sift(keys, idx, lo, 0, end)
        end -= 1


@njit(cache=True, nogil=True, inline="always")
def _sift(keys, idx, lo, root, n):
    while True:
        child = 2 * root + 1
        if child >= n:
            return
        if child + 1 < n and _row_less(keys, idx[lo + child], idx[lo + child + 1]):
            child += 1
        if _row_less(keys, idx[lo + root], idx[lo + child]):
            tmp = idx[lo + root]
            idx[lo + root] = idx[lo + child]
            idx[lo + child] = tmp
            root = child
        else:
            return


@njit(cache=True, nogil=True)
def counting_sort_stable(src, n, key, kmax, counts, dst):
    """Stable counting sort of src[:n] by key[src[i]] in [0, kmax]; writes dst[:n]."""
    for v in range(kmax + 2):
        counts[v] = 0
    for i in range(n):
        counts[key[src[i]] + 1] += 1
    for v in range(1, kmax + 2):
        counts[v] += counts[v - 1]
    for i in range(n):
        k = key[src[i]]
        dst[counts[k]] = src[i]
        counts[k] += 1
