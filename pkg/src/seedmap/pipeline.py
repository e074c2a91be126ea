"""Chunk -> batch -> stage-at-a-time mapping.

A batch runs SMEM, SAL, CHAIN, BSW and the post-filter each to completion
over all of its reads before the next stage starts.  Every stage is a jitted
kernel over flat arena buffers owned by the worker, so after the first few
batches have sized the arena nothing is allocated per batch.  Workers claim
batches from a shared counter and a reorder buffer puts the results back in
read order, so output does not depend on scheduling.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import bsw as _bsw
from . import chain as _chain
from . import sal as _sal
from . import smem as _smem
from .arena import Arena
from .bsw import (A_QB, A_QE, A_RB, A_RE, A_REV, A_S, A_SCORE, AL_FIELDS, R_BEST, R_GSCORE,
                  R_GTEND, R_QEND, R_TEND, RES_FIELDS, BatchStats, BswParams, BswWorkspace)
from .chain import J_SEED, J_SIDE, JOB_FIELDS, SIDE_LEFT
from .errors import ChunkError
from .fmindex import FMIndex
from .refseq import MAX_READ_LEN, ReadRecord
from .sal import H_QB, H_QE, H_REC, H_REV, H_S, H_TPOS, HIT_FIELDS
from .smem import SmemParams

DEFAULT_BATCH_SIZE = 512
DEFAULT_CHUNK_BYTES = 1_000_000
STAGES = ("SMEM", "SAL", "CHAIN", "BSW", "FILTER")


@dataclass(frozen=True)
class MapParams:
    smem: SmemParams = SmemParams()
    bsw: BswParams = BswParams()
    max_chain_gap: int = _chain.DEFAULT_MAX_CHAIN_GAP
    drop_ratio: float = 0.5
    slack: int = _chain.DEFAULT_SLACK
    batch_size: int = DEFAULT_BATCH_SIZE
    lane_width8: int = 64
    lane_width16: int = 32
    prefetch: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.drop_ratio <= 1.0:
            raise ValueError("drop_ratio must lie in [0, 1]")
        if self.max_chain_gap < 1 or self.slack < 0:
            raise ValueError("max_chain_gap must be >= 1 and slack >= 0")
        if self.lane_width8 < 1 or self.lane_width16 < 1:
            raise ValueError("lane widths must be >= 1")


@dataclass(frozen=True)
class MappedHit:
    record: str
    ref_pos: int  # 0-based, leftmost forward-strand base of the aligned span
    is_reverse: bool
    score: int
    q_begin: int
    q_end: int
    interval_size: int


@dataclass(frozen=True)
class MappingRecord:
    read_id: str
    hits: tuple[MappedHit, ...] = ()
    ordinal: int = 0

    @property
    def mapped(self) -> bool:
        return bool(self.hits)


def format_record(rec: MappingRecord) -> str:
    """One tab-separated line per alignment (1-based pos); ``id\\t*`` when unmapped."""
    if not rec.hits:
        return f"{rec.read_id}\t*\n"
    return "".join(
        f"{rec.read_id}\t{h.record}\t{h.ref_pos + 1}\t{'-' if h.is_reverse else '+'}\t{h.score}"
        f"\t{h.q_begin}\t{h.q_end}\t{h.interval_size}\n" for h in rec.hits)


def parse_record(text: str, ordinal: int = 0) -> MappingRecord:
    """Inverse of format_record for the lines of one read."""
    lines = [ln for ln in text.split("\n") if ln]
    if not lines:
        raise ValueError("no lines")
    rid = lines[0].split("\t", 1)[0]
    if len(lines) == 1 and lines[0] == f"{rid}\t*":
        return MappingRecord(rid, (), ordinal)
    hits = []
    for ln in lines:
        f = ln.split("\t")
        if len(f) != 8 or f[0] != rid or f[3] not in "+-":
            raise ValueError(f"malformed mapping line {ln!r}")
        hits.append(MappedHit(f[1], int(f[2]) - 1, f[3] == "-", int(f[4]), int(f[5]),
                              int(f[6]), int(f[7])))
    return MappingRecord(rid, tuple(hits), ordinal)


# --------------------------------------------------------------------------
# combine + post-filter kernels


@njit(cache=True, nogil=True)
def combine_kernel(hits, seeds, seed_read, ns, qlen, jobs, nj, res, n_ref, a, end_bonus,
                   left, right, al, al_rec):
    """One alignment row per seed from its left and right extension results.

    Each side keeps its local best unless reaching the query end scores
    better once end_bonus is counted.  Both sides start from the seed score
    h0, so the sum counts it once.  Reference spans are folded to forward
    coordinates.
    """
    for i in range(ns):
        left[i] = -1
        right[i] = -1
    for j in range(nj):
        if jobs[j, J_SIDE] == SIDE_LEFT:
            left[jobs[j, J_SEED]] = j
        else:
            right[jobs[j, J_SEED]] = j
    for i in range(ns):
        h = seeds[i]
        qb = hits[h, H_QB]
        qe = hits[h, H_QE]
        L = qe - qb
        h0 = L * a
        score = h0
        tl = 0
        j = left[i]
        if j >= 0:
            g = res[j, R_GSCORE]
            if g > 0 and g + end_bonus > res[j, R_BEST]:
                score += g - h0
                tl = res[j, R_GTEND]
                qb = 0
            else:
                score += res[j, R_BEST] - h0
                tl = res[j, R_TEND]
                qb -= res[j, R_QEND]
        tr = 0
        j = right[i]
        if j >= 0:
            g = res[j, R_GSCORE]
            if g > 0 and g + end_bonus > res[j, R_BEST]:
                score += g - h0
                tr = res[j, R_GTEND]
                qe = qlen[seed_read[i]]
            else:
                score += res[j, R_BEST] - h0
                tr = res[j, R_TEND]
                qe += res[j, R_QEND]
        p = hits[h, H_TPOS]
        cb = p - tl
        ce = p + L + tr
        al[i, A_SCORE] = score
        al[i, A_REV] = hits[h, H_REV]
        al[i, A_QB] = qb
        al[i, A_QE] = qe
        if hits[h, H_REV] == 1:
            al[i, A_RB] = 2 * n_ref - ce
            al[i, A_RE] = 2 * n_ref - cb
        else:
            al[i, A_RB] = cb
            al[i, A_RE] = ce
        al[i, A_S] = hits[h, H_S]
        al_rec[i] = hits[h, H_REC]


@njit(cache=True, nogil=True)
def filter_batch_kernel(al, keys, order, keep, seed_off, nreads, kept_off, kept):
    """Per-read containment filter; kept[kept_off[r]:kept_off[r+1]] are read r's rows, best first."""
    nk = 0
    for r in range(nreads):
        lo = seed_off[r]
        hi = seed_off[r + 1]
        kept_off[r] = nk
        for i in range(lo, hi):
            order[i] = i
            keep[i] = 0
        _bsw.post_filter_kernel(al, keys, order, lo, hi, keep)
        for p in range(lo, hi):
            if keep[order[p]] == 1:
                kept[nk] = order[p]
                nk += 1
    kept_off[nreads] = nk
    return nk


@njit(cache=True, nogil=True)
def seed_reads_kernel(seed_off, nreads, seed_read):
    for r in range(nreads):
        for i in range(seed_off[r], seed_off[r + 1]):
            seed_read[i] = r


# --------------------------------------------------------------------------
# per-worker state


class Worker:
    """Arena-backed scratch for one thread; reused for every batch it processes."""

    def __init__(self):
        self.arena = Arena()
        self.smem_scratch = _smem.new_scratch()
        self.bsw_ws = BswWorkspace(self.arena)
        self.bsw_stats = BatchStats()
        self.timings = dict.fromkeys(STAGES, 0.0)
        self.batches = 0
        self.last_counts = (0, 0, 0, 0, 0, 0)  # smems, hits, seeds, jobs, job q/t bases


@dataclass
class BatchOutput:
    """Flat per-batch result; rows refer to buffers that the next batch reuses."""
    nreads: int
    kept_off: np.ndarray
    kept: np.ndarray
    al: np.ndarray
    al_rec: np.ndarray


def _tick(worker, stage, t0):
    t1 = time.perf_counter()
    worker.timings[stage] += t1 - t0
    return t1


def run_batch_stages(reads, index: FMIndex, params: MapParams, worker: Worker) -> BatchOutput:
    """All mapping stages over one batch of reads; no formatting."""
    ar = worker.arena
    nreads = len(reads)
    total = 0
    for r in reads:
        if len(r.bases) > MAX_READ_LEN:
            raise ValueError(f"read {r.id!r} is longer than {MAX_READ_LEN} bases")
        total += len(r.bases)
    qcat = ar.get("p.qcat", max(total, 1), np.uint8)
    qoff = ar.get("p.qoff", nreads + 1, np.int64)
    qlen = ar.get("p.qlen", nreads + 1, np.int64)
    o = 0
    for i, r in enumerate(reads):
        m = len(r.bases)
        qoff[i] = o
        qlen[i] = m
        qcat[o:o + m] = r.bases
        o += m
    sp = params.smem
    bp = params.bsw
    t = time.perf_counter()

    # SMEM
    smems = ar.get2("p.smems", total + nreads + 1, 5, np.int64)
    smem_off = ar.get("p.smem_off", nreads + 1, np.int64)
    curr, prev, mem = worker.smem_scratch
    nsm = _smem.smem_batch_kernel(index.counts, index.bwt_bytes, index.D, index.sentinel_row, qcat,
                            qoff, qlen, nreads, sp.min_seed_len, sp.min_intv, params.prefetch,
                            curr, prev, mem, smems, smem_off)
    t = _tick(worker, "SMEM", t)

    # SAL
    starts = _record_starts(index)
    nh_max = _sal.sal_count_kernel(smems, smem_off, nreads, sp.max_occ)
    hits = ar.get2("p.hits", nh_max + 1, HIT_FIELDS, np.int64)
    hit_off = ar.get("p.hit_off", nreads + 1, np.int64)
    nh = _sal.sal_batch_kernel(index.suffix_array, index.n_ref, starts, smems, smem_off, nreads,
                               sp.max_occ, hits, hit_off)
    t = _tick(worker, "SAL", t)

    # CHAIN and job construction
    m1 = nh + 1
    keys = ar.get2("p.hkeys", m1, 3, np.int64)
    order = ar.get("p.horder", m1, np.int64)
    nxt = ar.get("p.nxt", m1, np.int64)
    c_first = ar.get("p.c_first", m1, np.int64)
    c_last = ar.get("p.c_last", m1, np.int64)
    c_w = ar.get("p.c_w", m1, np.int64)
    c_cov = ar.get("p.c_cov", m1, np.int64)
    c_anchor = ar.get("p.c_anchor", m1, np.int64)
    c_off = ar.get("p.c_off", nreads + 1, np.int64)
    c_keys = ar.get2("p.c_keys", m1, 2, np.int64)
    c_order = ar.get("p.c_order", m1, np.int64)
    seeds = ar.get("p.seeds", m1, np.int64)
    seed_off = ar.get("p.seed_off", nreads + 1, np.int64)
    seed_chain = ar.get("p.seed_chain", m1, np.int64)
    _, ns = _chain.chain_batch_kernel(hits, hit_off, nreads, params.max_chain_gap, bp.w,
                                      params.drop_ratio, keys, order, nxt, c_first, c_last, c_w,
                                      c_cov, c_anchor, c_off, c_keys, c_order, seeds, seed_off,
                                      seed_chain)
    seed_read = ar.get("p.seed_read", ns + 1, np.int64)
    seed_reads_kernel(seed_off, nreads, seed_read)
    nj, nq, nt = _chain.jobs_count_kernel(hits, seeds, seed_read, ns, qlen, index.n_ref, starts,
                                          bp.w, params.slack)
    jobs = ar.get2("p.jobs", nj + 1, JOB_FIELDS, np.int64)
    jq = ar.get("p.jq", nq + 1, np.uint8)
    jt = ar.get("p.jt", nt + 1, np.uint8)
    jqoff = ar.get("p.jqoff", nj + 1, np.int64)
    jqlen = ar.get("p.jqlen", nj + 1, np.int64)
    jtoff = ar.get("p.jtoff", nj + 1, np.int64)
    jtlen = ar.get("p.jtlen", nj + 1, np.int64)
    jh0 = ar.get("p.jh0", nj + 1, np.int64)
    _chain.jobs_fill_kernel(hits, seeds, seed_read, ns, qcat, qoff, qlen, index.text,
                            index.n_ref, starts, bp.w, params.slack, bp.a, jobs, jq, jqoff,
                            jqlen, jt, jtoff, jtlen, jh0)
    t = _tick(worker, "CHAIN", t)

    # BSW
    res = ar.get2("p.res", nj + 1, RES_FIELDS, np.int64)
    if nj:
        _bsw.run_batch(jq, jqoff, jqlen, jt, jtoff, jtlen, jh0, nj, bp, res, worker.bsw_ws,
                       params.lane_width8, params.lane_width16, stats=worker.bsw_stats)
    t = _tick(worker, "BSW", t)

    # combine + containment filter
    m2 = ns + 1
    left = ar.get("p.left", m2, np.int64)
    right = ar.get("p.right", m2, np.int64)
    al = ar.get2("p.al", m2, AL_FIELDS, np.int64)
    al_rec = ar.get("p.al_rec", m2, np.int64)
    combine_kernel(hits, seeds, seed_read, ns, qlen, jobs, nj, res, index.n_ref, bp.a,
                   bp.end_bonus, left, right, al, al_rec)
    akeys = ar.get2("p.akeys", m2, AL_FIELDS, np.int64)
    aorder = ar.get("p.aorder", m2, np.int64)
    keep = ar.get("p.keep", m2, np.uint8)
    kept_off = ar.get("p.kept_off", nreads + 1, np.int64)
    kept = ar.get("p.kept", m2, np.int64)
    filter_batch_kernel(al, akeys, aorder, keep, seed_off, nreads, kept_off, kept)
    _tick(worker, "FILTER", t)
    worker.batches += 1
    worker.last_counts = (nsm, nh, ns, nj, nq, nt)
    return BatchOutput(nreads, kept_off, kept, al, al_rec)


def _record_starts(index: FMIndex) -> np.ndarray:
    starts = getattr(index, "_record_starts", None)
    if starts is None:
        starts = _sal.record_starts(index)
        index._record_starts = starts
    return starts


def batch_records(reads, out: BatchOutput, index: FMIndex) -> list[MappingRecord]:
    """MappingRecords of a processed batch (Python objects, built after the stages)."""
    recs = index.records
    names = [r.name for r in recs]
    offs = [r.offset for r in recs]
    result = []
    for r, read in enumerate(reads):
        lo, hi = int(out.kept_off[r]), int(out.kept_off[r + 1])
        hs = []
        for p in range(lo, hi):
            row = out.al[out.kept[p]]
            rec = int(out.al_rec[out.kept[p]])
            hs.append(MappedHit(names[rec], int(row[A_RB]) - offs[rec], bool(row[A_REV]),
                                int(row[A_SCORE]), int(row[A_QB]), int(row[A_QE]),
                                int(row[A_S])))
        result.append(MappingRecord(read.id, tuple(hs), read.ordinal))
    return result


def process_batch(reads, index: FMIndex, params: MapParams = MapParams(),
                  worker: Worker | None = None) -> list[MappingRecord]:
    worker = worker or Worker()
    out = run_batch_stages(reads, index, params, worker)
    return batch_records(reads, out, index)


# --------------------------------------------------------------------------
# chunk driver


@dataclass
class ChunkStats:
    timings: dict = field(default_factory=lambda: dict.fromkeys(STAGES, 0.0))
    bsw: BatchStats = field(default_factory=BatchStats)
    batches: int = 0


def process_chunk(reads, index: FMIndex, params: MapParams = MapParams(), workers: int = 1,
                  pool: list[Worker] | None = None, stats: ChunkStats | None = None
                  ) -> list[MappingRecord]:
    """Map a chunk of reads with ``workers`` threads; results come back in read order.

    The chunk is cut into batches of params.batch_size reads, which workers
    claim one at a time.  A failure in any batch fails the whole chunk with
    ChunkError and none of its results are returned.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    reads = list(reads)
    if not reads:
        return []
    bs = params.batch_size
    batches = [reads[i:i + bs] for i in range(0, len(reads), bs)]
    nw = min(workers, len(batches))
    if pool is None:
        pool = [Worker() for _ in range(nw)]
    elif len(pool) < nw:
        pool = list(pool) + [Worker() for _ in range(nw - len(pool))]
    done: list[list[MappingRecord] | None] = [None] * len(batches)
    errors: list[tuple[int, BaseException]] = []
    claim = iter(range(len(batches)))
    lock = threading.Lock()

    def work(wk: Worker):
        while True:
            with lock:
                if errors:
                    return
                b = next(claim, None)
            if b is None:
                return
            try:
                done[b] = process_batch(batches[b], index, params, wk)
            except BaseException as exc:  # reported for the whole chunk below
                with lock:
                    errors.append((b, exc))
                return

    before = [dict(w.timings) for w in pool[:nw]]
    if nw == 1:
        work(pool[0])
    else:
        threads = [threading.Thread(target=work, args=(pool[i],), daemon=True) for i in range(nw)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
    if errors:
        b, exc = min(errors, key=lambda e: e[0])
        first = batches[b][0]
        raise ChunkError(f"batch {b} (reads from #{first.ordinal}, id {first.id!r}) failed: "
                         f"{type(exc).__name__}: {exc}") from exc
    if stats is not None:
        for w, t0 in zip(pool[:nw], before):
            for k in STAGES:
                stats.timings[k] += w.timings[k] - t0[k]
        stats.batches += len(batches)
    out: list[MappingRecord] = []
    for part in done:
        out.extend(part)
    return out


def chunk_reads(batches, chunk_bytes: int = DEFAULT_CHUNK_BYTES):
    """Regroup parsed read batches into chunks of about ``chunk_bytes`` sequence bytes."""
    chunk: list[ReadRecord] = []
    size = 0
    for batch in batches:
        for r in batch:
            chunk.append(r)
            size += len(r.bases)
            if size >= chunk_bytes:
                yield chunk
                chunk = []
                size = 0
    if chunk:
        yield chunk
