"""Per-stage kernel timing on intercepted stage inputs.

The reads are first mapped once batch by batch; the inputs each stage saw
are copied out of the worker's arena.  Each stage kernel is then re-run on
those inputs on its own, so a stage's time excludes every other stage and
all Python-side formatting.  BSW is timed twice: through the batched
driver and through the scalar kernel on the same jobs.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass

import numpy as np

from . import bsw as _bsw
from . import chain as _chain
from . import pipeline as _pl
from . import sal as _sal
from . import smem as _smem
from .bsw import RES_FIELDS, BatchStats, BswWorkspace
from .chain import JOB_FIELDS
from .sal import HIT_FIELDS

HEADER = ("stage", "wall_s", "pct", "jobs", "cells", "useful_ratio", "cells_per_s", "speedup")
PIPELINE_ROWS = ("SMEM", "SAL", "CHAIN", "BSW_batched")


@dataclass
class _Captured:
    qcat: np.ndarray
    qoff: np.ndarray
    qlen: np.ndarray
    nreads: int
    smems: np.ndarray
    smem_off: np.ndarray
    hits: np.ndarray
    hit_off: np.ndarray
    jobs: tuple  # jq, jqoff, jqlen, jt, jtoff, jtlen, jh0
    nj: int


def _capture(reads, index, params, worker):
    _pl.run_batch_stages(reads, index, params, worker)
    a = worker.arena._bufs
    nreads = len(reads)
    qoff = a["p.qoff"][:nreads + 1].copy()
    qlen = a["p.qlen"][:nreads + 1].copy()
    off = a["p.smem_off"][:nreads + 1].copy()
    hit_off = a["p.hit_off"][:nreads + 1].copy()
    nsm, nh, ns, nj, nq, nt = worker.last_counts
    total = int(qoff[nreads - 1] + qlen[nreads - 1])
    jobs = (a["p.jq"][:nq + 1].copy(), a["p.jqoff"][:nj + 1].copy(),
            a["p.jqlen"][:nj + 1].copy(), a["p.jt"][:nt + 1].copy(),
            a["p.jtoff"][:nj + 1].copy(), a["p.jtlen"][:nj + 1].copy(),
            a["p.jh0"][:nj + 1].copy())
    return _Captured(a["p.qcat"][:max(total, 1)].copy(), qoff, qlen, nreads,
                     a["p.smems"][:(nsm + 1) * 5].reshape(-1, 5).copy(), off,
                     a["p.hits"][:(nh + 1) * HIT_FIELDS].reshape(-1, HIT_FIELDS).copy(), hit_off, jobs, nj)


def _time_smem(caps, index, params):
    sp = params.smem
    curr, prev, mem = _smem.new_scratch()
    big = max(c.qcat.shape[0] + c.nreads + 1 for c in caps)
    out = np.zeros((big, 5), dtype=np.int64)
    off = np.zeros(max(c.nreads for c in caps) + 1, dtype=np.int64)
    t0 = time.perf_counter()
    for c in caps:
        _smem.smem_batch_kernel(index.counts, index.bwt_bytes, index.D, index.sentinel_row, c.qcat,
                                c.qoff, c.qlen, c.nreads, sp.min_seed_len, sp.min_intv,
                                params.prefetch, curr, prev, mem, out, off)
    return time.perf_counter() - t0


def _time_sal(caps, index, params):
    starts = _pl._record_starts(index)
    big = max(_sal.sal_count_kernel(c.smems, c.smem_off, c.nreads, params.smem.max_occ) for c in caps)
    out = np.zeros((big + 1, HIT_FIELDS), dtype=np.int64)
    hoff = np.zeros(max(c.nreads for c in caps) + 1, dtype=np.int64)
    t0 = time.perf_counter()
    for c in caps:
        _sal.sal_count_kernel(c.smems, c.smem_off, c.nreads, params.smem.max_occ)
        _sal.sal_batch_kernel(index.suffix_array, index.n_ref, starts, c.smems, c.smem_off,
                              c.nreads, params.smem.max_occ, out, hoff)
    return time.perf_counter() - t0


def _time_chain(caps, index, params):
    starts = _pl._record_starts(index)
    bp = params.bsw
    m = max(c.hits.shape[0] for c in caps) + 1
    r = max(c.nreads for c in caps) + 1
    i64 = np.int64
    keys = np.zeros((m, 3), i64)
    c_keys = np.zeros((m, 2), i64)
    v = [np.zeros(m, i64) for _ in range(11)]
    order, nxt, c_first, c_last, c_w, c_cov, c_anchor, c_order, seeds, seed_chain, seed_read = v
    c_off = np.zeros(r, i64)
    seed_off = np.zeros(r, i64)
    nq = max(c.jobs[0].shape[0] for c in caps)
    nt = max(c.jobs[3].shape[0] for c in caps)
    nj = max(c.nj for c in caps) + 1
    jobs = np.zeros((nj, JOB_FIELDS), i64)
    jq = np.zeros(nq, np.uint8)
    jt = np.zeros(nt, np.uint8)
    jv = [np.zeros(nj, i64) for _ in range(5)]
    t0 = time.perf_counter()
    for c in caps:
        _, ns = _chain.chain_batch_kernel(c.hits, c.hit_off, c.nreads, params.max_chain_gap, bp.w,
                                          params.drop_ratio, keys, order, nxt, c_first, c_last,
                                          c_w, c_cov, c_anchor, c_off, c_keys, c_order, seeds,
                                          seed_off, seed_chain)
        _pl.seed_reads_kernel(seed_off, c.nreads, seed_read)
        _chain.jobs_count_kernel(c.hits, seeds, seed_read, ns, c.qlen, index.n_ref, starts, bp.w,
                                 params.slack)
        _chain.jobs_fill_kernel(c.hits, seeds, seed_read, ns, c.qcat, c.qoff, c.qlen, index.text,
                                index.n_ref, starts, bp.w, params.slack, bp.a, jobs, jq, jv[0],
                                jv[1], jt, jv[2], jv[3], jv[4])
    return time.perf_counter() - t0


def _time_bsw(caps, params, W8, W16):
    p = params.bsw
    ws = BswWorkspace()
    stats = BatchStats()
    outs = [np.zeros((max(c.nj, 1), RES_FIELDS), dtype=np.int64) for c in caps]
    t0 = time.perf_counter()
    for c, res in zip(caps, outs):
        if c.nj:
            _bsw.run_batch(*c.jobs, c.nj, p, res, ws, W8, W16, stats=stats)
    return time.perf_counter() - t0, stats, outs


def _time_scalar(caps, params):
    p = params.bsw
    mt = max(int(c.jobs[5][:c.nj].max()) if c.nj else 0 for c in caps) + 1
    H = np.zeros(mt, dtype=np.int64)
    E = np.zeros(mt, dtype=np.int64)
    sels = [np.arange(max(c.nj, 1), dtype=np.int64) for c in caps]
    outs = [np.zeros((max(c.nj, 1), RES_FIELDS), dtype=np.int64) for c in caps]
    cells = 0
    t0 = time.perf_counter()
    for c, sel, res in zip(caps, sels, outs):
        cells += _bsw.bsw_scalar_many(*c.jobs, sel, c.nj, p.a, p.b, p.g_o, p.g_e, p.w, p.zdrop,
                                      H, E, res)
    return time.perf_counter() - t0, int(cells), outs


def run_bench(reads, index, params: _pl.MapParams, lane_width8=None, lane_width16=None,
              repeat: int = 3):
    """Rows of the stage report as dicts keyed by HEADER.

    Every stage is timed ``repeat`` times and the fastest pass is reported.
    """
    W8 = lane_width8 or params.lane_width8
    W16 = lane_width16 or params.lane_width16
    bs = params.batch_size
    batches = [reads[i:i + bs] for i in range(0, len(reads), bs)]
    worker = _pl.Worker()
    caps = [_capture(b, index, params, worker) for b in batches]
    if not caps:
        raise ValueError("no reads to benchmark")
    # compile everything once before timing
    _time_bsw(caps[:1], params, W8, W16)
    _time_scalar(caps[:1], params)
    _time_smem(caps[:1], index, params)
    _time_sal(caps[:1], index, params)
    _time_chain(caps[:1], index, params)

    t_smem = min(_time_smem(caps, index, params) for _ in range(repeat))
    t_sal = min(_time_sal(caps, index, params) for _ in range(repeat))
    t_chain = min(_time_chain(caps, index, params) for _ in range(repeat))
    best_b = None
    for _ in range(repeat):
        tb, stats, out_b = _time_bsw(caps, params, W8, W16)
        if best_b is None or tb < best_b[0]:
            best_b = (tb, stats, out_b)
    best_s = None
    for _ in range(repeat):
        ts, scells, out_s = _time_scalar(caps, params)
        if best_s is None or ts < best_s[0]:
            best_s = (ts, scells, out_s)
    tb, stats, out_b = best_b
    ts, scells, out_s = best_s
    for c, rb, rs in zip(caps, out_b, out_s):
        if not np.array_equal(rb[:c.nj], rs[:c.nj]):
            raise AssertionError("batched and scalar BSW results differ")

    njobs = sum(c.nj for c in caps)
    total = t_smem + t_sal + t_chain + tb
    rows = []

    def row(stage, wall, pct, jobs="", cells="", ratio="", speed=""):
        rows.append(dict(stage=stage, wall_s=f"{wall:.6f}",
                         pct="" if pct is None else f"{100.0 * pct:.2f}",
                         jobs=jobs, cells=cells,
                         useful_ratio="" if ratio == "" else f"{ratio:.4f}",
                         cells_per_s="" if cells == "" or wall <= 0 else f"{cells / wall:.4g}",
                         speedup="" if speed == "" else f"{speed:.3f}"))

    row("SMEM", t_smem, t_smem / total)
    row("SAL", t_sal, t_sal / total)
    row("CHAIN", t_chain, t_chain / total)
    row("BSW_batched", tb, tb / total, njobs, stats.cells, stats.useful_ratio,
        ts / tb if tb > 0 else float("inf"))
    row("BSW_scalar", ts, None, njobs, scells, 1.0, 1.0)
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=HEADER, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()
