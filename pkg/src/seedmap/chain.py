"""Greedy chaining of seed hits and selection of the extension jobs.

Chaining works in strand coordinates: on the forward strand a hit's
coordinate is its reference position, on the reverse strand it is
-(ref_pos + length), i.e. its offset along the reverse-complement text up to
a constant.  In those coordinates query and reference advance together on
both strands, so one collinearity test serves both.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ._sort import heap_sort_rows
from .bsw import BswJob, BswParams
from .fmindex import FMIndex
from .sal import H_POS, H_QB, H_QE, H_REC, H_REV, H_TPOS, SeedHit, hits_to_rows

DEFAULT_MAX_CHAIN_GAP = 10_000
DEFAULT_SLACK = 8


@dataclass(frozen=True)
class Chain:
    seeds: tuple[SeedHit, ...]
    weight: int
    anchor: SeedHit

    @property
    def is_reverse(self) -> bool:
        return self.anchor.is_reverse


def strand_coord(hit: SeedHit) -> int:
    return -(hit.ref_pos + hit.length) if hit.is_reverse else hit.ref_pos


def compatible(prev: SeedHit, nxt: SeedHit, max_chain_gap: int = DEFAULT_MAX_CHAIN_GAP,
               w: int = 100) -> bool:
    """May ``nxt`` follow ``prev`` in one chain?"""
    if prev.is_reverse != nxt.is_reverse:
        return False
    dq = nxt.q_begin - prev.q_begin
    dr = strand_coord(nxt) - strand_coord(prev)
    return 0 < dq <= max_chain_gap and 0 < dr <= max_chain_gap and abs(dr - dq) <= w


# --------------------------------------------------------------------------
# kernels; chain state lives in caller buffers indexed by global chain id


@njit(cache=True, nogil=True, inline="always")
def _coord(hits, h):
    if hits[h, H_REV] == 1:
        return -(hits[h, H_POS] + hits[h, H_QE] - hits[h, H_QB])
    return hits[h, H_POS]


@njit(cache=True, nogil=True)
def chain_read_kernel(hits, lo, hi, max_gap, w, keys, order, nxt, c_first, c_last, c_w,
                      c_cov, c_anchor, c0):
    """Chain hits[lo:hi]; chains get ids c0.. and the new chain count is returned.

    order[lo:hi] receives the hits sorted by (strand, coordinate, q_begin);
    nxt[h] links the seeds of a chain in that order (-1 ends a chain).
    """
    for h in range(lo, hi):
        order[h] = h
        keys[h, 0] = hits[h, H_REV]
        keys[h, 1] = _coord(hits, h)
        keys[h, 2] = hits[h, H_QB]
        nxt[h] = -1
    heap_sort_rows(keys, order, lo, hi)
    nc = c0
    for p in range(lo, hi):
        h = order[p]
        joined = -1
        for c in range(nc - 1, c0 - 1, -1):
            t = c_last[c]
            if hits[t, H_REV] != hits[h, H_REV]:
                continue
            dq = hits[h, H_QB] - hits[t, H_QB]
            dr = keys[h, 1] - keys[t, 1]
            drift = dr - dq
            if drift < 0:
                drift = -drift
            if 0 < dq <= max_gap and 0 < dr <= max_gap and drift <= w:
                joined = c
                break
        qb = hits[h, H_QB]
        qe = hits[h, H_QE]
        if joined < 0:
            c = nc
            nc += 1
            c_first[c] = h
            c_last[c] = h
            c_w[c] = qe - qb
            c_cov[c] = qe
            c_anchor[c] = h
        else:
            c = joined
            nxt[c_last[c]] = h
            c_last[c] = h
            start = qb if qb > c_cov[c] else c_cov[c]
            if qe > start:
                c_w[c] += qe - start
            if qe > c_cov[c]:
                c_cov[c] = qe
            a = c_anchor[c]
            if qe - qb > hits[a, H_QE] - hits[a, H_QB]:
                c_anchor[c] = h
    return nc


@njit(cache=True, nogil=True)
def chain_batch_kernel(hits, hit_off, nreads, max_gap, w, drop_ratio, keys, order, nxt,
                       c_first, c_last, c_w, c_cov, c_anchor, c_off, c_keys, c_order,
                       seeds, seed_off, seed_chain):
    """Chain every read, rank chains by weight and list the seeds to extend.

    Chains of read r: c_order[c_off[r]:c_off[r+1]] best first.  Seeds of
    read r: seeds[seed_off[r]:seed_off[r+1]] (hit rows), chain by chain,
    dropping chains lighter than drop_ratio times the read's best chain.
    """
    nc = 0
    ns = 0
    for r in range(nreads):
        c_off[r] = nc
        seed_off[r] = ns
        c1 = chain_read_kernel(hits, hit_off[r], hit_off[r + 1], max_gap, w, keys, order, nxt,
                               c_first, c_last, c_w, c_cov, c_anchor, nc)
        best = 0
        for c in range(nc, c1):
            c_order[c] = c
            c_keys[c, 0] = -c_w[c]
            c_keys[c, 1] = c
            if c_w[c] > best:
                best = c_w[c]
        heap_sort_rows(c_keys, c_order, nc, c1)
        for p in range(nc, c1):
            c = c_order[p]
            if c_w[c] < drop_ratio * best:
                continue
            h = c_first[c]
            while h >= 0:
                seeds[ns] = h
                seed_chain[ns] = c
                ns += 1
                h = nxt[h]
        nc = c1
    c_off[nreads] = nc
    seed_off[nreads] = ns
    return nc, ns


# columns of a job row
J_SEED, J_SIDE, J_WLO, J_WHI = range(4)
JOB_FIELDS = 4
SIDE_LEFT, SIDE_RIGHT = 0, 1


@njit(cache=True, nogil=True, inline="always")
def strand_span(starts, n_ref, rec, rev):
    """[lo, hi) of a record in forward+revcomp text coordinates on one strand."""
    lo = starts[rec]
    hi = starts[rec + 1]
    if rev == 1:
        return 2 * n_ref - hi, 2 * n_ref - lo
    return lo, hi


@njit(cache=True, nogil=True)
def jobs_count_kernel(hits, seeds, seed_read, ns, qlen, n_ref, starts, w, slack):
    """Job count, query bases and target bases needed by the seeds ``seeds[:ns]``."""
    nj = 0
    nq = 0
    nt = 0
    for i in range(ns):
        h = seeds[i]
        m = qlen[seed_read[i]]
        qb = hits[h, H_QB]
        qe = hits[h, H_QE]
        p = hits[h, H_TPOS]
        slo, shi = strand_span(starts, n_ref, hits[h, H_REC], hits[h, H_REV])
        if qb > 0:
            lo = p - qb - w - slack
            if lo < slo:
                lo = slo
            nj += 1
            nq += qb
            nt += p - lo
        if qe < m:
            e = p + (qe - qb)
            hi = e + (m - qe) + w + slack
            if hi > shi:
                hi = shi
            nj += 1
            nq += m - qe
            nt += hi - e
    return nj, nq, nt


@njit(cache=True, nogil=True)
def jobs_fill_kernel(hits, seeds, seed_read, ns, qcat, qoff_r, qlen, text, n_ref, starts, w,
                     slack, a, jobs, jq, qoff, jlen, jt, toff, tlen, h0):
    """Write the left (reversed) and right extension jobs of every seed."""
    nj = 0
    oq = 0
    ot = 0
    for i in range(ns):
        h = seeds[i]
        r = seed_read[i]
        m = qlen[r]
        base = qoff_r[r]
        qb = hits[h, H_QB]
        qe = hits[h, H_QE]
        p = hits[h, H_TPOS]
        L = qe - qb
        slo, shi = strand_span(starts, n_ref, hits[h, H_REC], hits[h, H_REV])
        if qb > 0:
            lo = p - qb - w - slack
            if lo < slo:
                lo = slo
            jobs[nj, J_SEED] = i
            jobs[nj, J_SIDE] = SIDE_LEFT
            jobs[nj, J_WLO] = lo
            jobs[nj, J_WHI] = p
            qoff[nj] = oq
            jlen[nj] = qb
            for x in range(qb):
                jq[oq + x] = qcat[base + qb - 1 - x]
            oq += qb
            toff[nj] = ot
            tlen[nj] = p - lo
            for x in range(p - lo):
                jt[ot + x] = text[p - 1 - x]
            ot += p - lo
            h0[nj] = L * a
            nj += 1
        if qe < m:
            e = p + L
            hi = e + (m - qe) + w + slack
            if hi > shi:
                hi = shi
            jobs[nj, J_SEED] = i
            jobs[nj, J_SIDE] = SIDE_RIGHT
            jobs[nj, J_WLO] = e
            jobs[nj, J_WHI] = hi
            qoff[nj] = oq
            jlen[nj] = m - qe
            for x in range(m - qe):
                jq[oq + x] = qcat[base + qe + x]
            oq += m - qe
            toff[nj] = ot
            tlen[nj] = hi - e
            for x in range(hi - e):
                jt[ot + x] = text[e + x]
            ot += hi - e
            h0[nj] = L * a
            nj += 1
    return nj


# --------------------------------------------------------------------------
# object API


def _chain_rows(rows, max_chain_gap, w):
    n = rows.shape[0]
    keys = np.zeros((n, 3), np.int64)
    order = np.zeros(n, np.int64)
    nxt = np.zeros(n, np.int64)
    bufs = [np.zeros(n, np.int64) for _ in range(5)]
    nc = chain_read_kernel(rows, 0, n, max_chain_gap, w, keys, order, nxt, *bufs, 0)
    return nxt, bufs, nc


def chain_seeds(hits, max_chain_gap: int = DEFAULT_MAX_CHAIN_GAP, w: int = 100) -> list[Chain]:
    """Greedy single-linkage chaining of one read's hits, heaviest chain first."""
    hits = list(hits)
    if not hits:
        return []
    rows = hits_to_rows(hits)
    nxt, (c_first, c_last, c_w, c_cov, c_anchor), nc = _chain_rows(rows, max_chain_gap, w)
    out = []
    for c in range(nc):
        seeds = []
        h = int(c_first[c])
        while h >= 0:
            seeds.append(hits[h])
            h = int(nxt[h])
        out.append(Chain(tuple(seeds), int(c_w[c]), hits[int(c_anchor[c])]))
    order = sorted(range(nc), key=lambda c: (-out[c].weight, c))
    return [out[c] for c in order]


@dataclass(frozen=True)
class ExtensionJob:
    seed: SeedHit
    left: BswJob | None
    right: BswJob | None
    left_window: tuple[int, int] | None  # forward+revcomp text coordinates
    right_window: tuple[int, int] | None


def select_extension_jobs(chains, read, index: FMIndex, params: BswParams = BswParams(),
                          drop_ratio: float = 0.5, slack: int = DEFAULT_SLACK
                          ) -> list[ExtensionJob]:
    """Left/right extension jobs for every seed of the chains that survive the weight cut."""
    from .sal import record_starts
    chains = list(chains)
    if not chains:
        return []
    best = max(c.weight for c in chains)
    kept = [c for c in chains if c.weight >= drop_ratio * best]
    seeds = [s for c in kept for s in c.seeds]
    if not seeds:
        return []
    rows = hits_to_rows(seeds)
    for i, s in enumerate(seeds):
        if s.text_pos < 0:
            rows[i, H_TPOS] = (2 * index.n_ref - s.ref_pos - s.length) if s.is_reverse \
                else s.ref_pos
    bases = np.ascontiguousarray(getattr(read, "bases", read), dtype=np.uint8)
    ns = len(seeds)
    sidx = np.arange(ns, dtype=np.int64)
    sread = np.zeros(ns, np.int64)
    qlen = np.array([bases.shape[0]], np.int64)
    starts = record_starts(index)
    nj, nq, nt = jobs_count_kernel(rows, sidx, sread, ns, qlen, index.n_ref, starts,
                                   params.w, slack)
    jobs = np.zeros((nj, JOB_FIELDS), np.int64)
    jq = np.zeros(nq, np.uint8)
    jt = np.zeros(nt, np.uint8)
    qoff, jlen, toff, tlen, h0 = (np.zeros(nj, np.int64) for _ in range(5))
    jobs_fill_kernel(rows, sidx, sread, ns, bases, np.zeros(1, np.int64), qlen, index.text,
                     index.n_ref, starts, params.w, slack, params.a, jobs, jq, qoff, jlen, jt,
                     toff, tlen, h0)
    per_seed = [[None, None, None, None] for _ in range(ns)]
    for j in range(nj):
        i, side = int(jobs[j, J_SEED]), int(jobs[j, J_SIDE])
        job = BswJob(jq[qoff[j]:qoff[j] + jlen[j]].copy(), jt[toff[j]:toff[j] + tlen[j]].copy(),
                     int(h0[j]), j)
        per_seed[i][side] = job
        per_seed[i][2 + side] = (int(jobs[j, J_WLO]), int(jobs[j, J_WHI]))
    return [ExtensionJob(seeds[i], *per_seed[i]) for i in range(ns)]

