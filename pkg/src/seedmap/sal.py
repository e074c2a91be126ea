"""Suffix-array lookup: SMEM bi-intervals to reference coordinates.

A row's text position is one read of the uncompressed suffix array.  Text
positions at or past n_ref lie on the reverse-complement half and are
folded back to the leftmost forward coordinate of the match.  A hit that
runs across the forward/reverse junction or across a record boundary of a
multi-record reference is not a real occurrence and is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .fmindex import FMIndex
from .smem import Smem

# columns of a hit row
H_QB, H_QE, H_POS, H_REV, H_S, H_TPOS, H_REC = range(7)
HIT_FIELDS = 7


@dataclass(frozen=True)
class SeedHit:
    q_begin: int
    q_end: int
    ref_pos: int
    is_reverse: bool
    interval_size: int
    text_pos: int = -1  # start in the forward+revcomp text (strand coordinates)
    record: int = 0

    @property
    def length(self) -> int:
        return self.q_end - self.q_begin


def lookup(index: FMIndex, i: int) -> int:
    """j = S[i]: a single suffix-array access."""
    if not 0 <= i < index.n:
        raise IndexError(f"row {i} outside [0, {index.n})")
    return int(index.suffix_array[i])


def record_starts(index: FMIndex) -> np.ndarray:
    """Record offsets plus a final n_ref, as an int64 array."""
    offs = [r.offset for r in index.records] + [index.n_ref]
    return np.asarray(offs, dtype=np.int64)


@njit(cache=True, nogil=True, inline="always")
def _record_of(starts, pos):
    lo = 0
    hi = starts.shape[0] - 2
    while lo < hi:
        mid = (lo + hi + 1) >> 1
        if starts[mid] <= pos:
            lo = mid
        else:
            hi = mid - 1
    return lo


@njit(cache=True, nogil=True, inline="always")
def sample_row(k, s, t, max_occ):
    """t-th sampled row of [k, k+s); uniform stride when s exceeds max_occ."""
    if s <= max_occ:
        return k + t
    return k + (t * s) // max_occ


@njit(cache=True, nogil=True)
def hits_of_interval(sa, n_ref, starts, qb, qe, k, s, max_occ, out, n):
    """Append the hits of one interval to ``out`` from row n; returns the new row count."""
    L = qe - qb
    m = s if s < max_occ else max_occ
    for t in range(m):
        p = sa[sample_row(k, s, t, max_occ)]
        if p < n_ref:
            rev = 0
            pos = p
        else:
            rev = 1
            pos = 2 * n_ref - p - L
        if pos < 0:
            continue
        r = _record_of(starts, pos)
        if pos + L > starts[r + 1]:
            continue
        out[n, H_QB] = qb
        out[n, H_QE] = qe
        out[n, H_POS] = pos
        out[n, H_REV] = rev
        out[n, H_S] = s
        out[n, H_TPOS] = p
        out[n, H_REC] = r
        n += 1
    return n


@njit(cache=True, nogil=True)
def sal_count_kernel(smems, smem_off, nreads, max_occ):
    """Upper bound on hit rows for the batch (rows looked up before any drop)."""
    total = 0
    for j in range(smem_off[nreads]):
        s = smems[j, 4]
        total += s if s < max_occ else max_occ
    return total


@njit(cache=True, nogil=True)
def sal_batch_kernel(sa, n_ref, starts, smems, smem_off, nreads, max_occ, out, hit_off):
    """SAL stage over a batch; read r owns hit rows hit_off[r]:hit_off[r+1]."""
    n = 0
    for r in range(nreads):
        hit_off[r] = n
        for j in range(smem_off[r], smem_off[r + 1]):
            n = hits_of_interval(sa, n_ref, starts, smems[j, 0], smems[j, 1], smems[j, 2],
                                 smems[j, 4], max_occ, out, n)
    hit_off[nreads] = n
    return n


def interval_to_hits(index: FMIndex, smem: Smem, max_occ: int = 500) -> list[SeedHit]:
    if max_occ < 1:
        raise ValueError("max_occ must be >= 1")
    iv = smem.interval
    if iv.s < 1:
        raise ValueError("empty interval")
    out = np.zeros((min(iv.s, max_occ), HIT_FIELDS), dtype=np.int64)
    n = hits_of_interval(index.suffix_array, index.n_ref, record_starts(index), smem.q_begin,
                         smem.q_end, iv.k, iv.s, max_occ, out, 0)
    return [hit_from_row(row) for row in out[:n]]


def hit_from_row(row) -> SeedHit:
    return SeedHit(int(row[H_QB]), int(row[H_QE]), int(row[H_POS]), bool(row[H_REV]),
                   int(row[H_S]), int(row[H_TPOS]), int(row[H_REC]))


def hits_to_rows(hits) -> np.ndarray:
    out = np.zeros((len(hits), HIT_FIELDS), dtype=np.int64)
    for i, h in enumerate(hits):
        out[i] = (h.q_begin, h.q_end, h.ref_pos, int(h.is_reverse), h.interval_size,
                  h.text_pos, h.record)
    return out
