"""Banded Smith-Waterman seed extension: scalar reference and inter-task batched kernels.

Conventions shared by both kernels (and by the unbanded oracle in the tests):

* rows i = 1..|X| walk the query, columns j = 1..|Y| the target;
* a gap of length k costs g_o + k*g_e; H[i,0] = max(0, h0 - g_o - g_e*i),
  H[0,j] likewise, and boundary cells only feed the diagonal;
* E and F open from H; a diagonal step out of a zero cell gives zero;
* an ambiguous base (code 4) never matches;
* after every row the live column range is trimmed of zero cells at both
  ends and clipped to the band |j - i| <= w; columns to the right of the
  planned range are still visited while a horizontal gap keeps them alive;
* a row with no positive cell, or a row whose best falls more than
  ``zdrop + g_e*|diagonal drift|`` under the best so far, stops the extension.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import llvmlite.binding as llvm
import numpy as np
from numba import njit, typeof
from numba.core.compiler import CompilerBase, DefaultPassBuilder
from numba.core.compiler_lock import global_compiler_lock

from ._sort import counting_sort_stable, heap_sort_rows

# columns of a result row
R_BEST, R_QEND, R_TEND, R_GSCORE, R_GTEND, R_MAXOFF, R_ABORTED = range(7)
RES_FIELDS = 7

PREC8 = 8
PREC16 = 16
MAX8 = 255
MAX16 = 65535


@dataclass(frozen=True)
class BswParams:
    a: int = 1
    b: int = 4
    g_o: int = 6
    g_e: int = 1
    w: int = 100
    zdrop: int = 100
    end_bonus: int = 5

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("match score a must be > 0")
        if self.b < 0 or self.g_o < 0 or self.g_e < 0:
            raise ValueError("penalties must be >= 0")
        if self.w < 1:
            raise ValueError("band width w must be >= 1")

    @property
    def mismatch(self) -> int:
        return -self.b


@dataclass
class BswJob:
    query: np.ndarray
    target: np.ndarray
    h0: int
    job_id: int = 0

    def __post_init__(self):
        self.query = np.ascontiguousarray(self.query, dtype=np.uint8)
        self.target = np.ascontiguousarray(self.target, dtype=np.uint8)


@dataclass(frozen=True)
class BswResult:
    best_score: int
    q_end: int
    t_end: int
    g_score: int
    g_t_end: int
    max_off: int
    aborted: bool

    @classmethod
    def from_row(cls, row) -> "BswResult":
        return cls(int(row[0]), int(row[1]), int(row[2]), int(row[3]), int(row[4]),
                   int(row[5]), bool(row[6]))


# --------------------------------------------------------------------------
# scalar reference kernel


@njit(cache=True, nogil=True)
def bsw_scalar_kernel(q, t, h0, a, b, go, ge, w, zdrop, H, E, res, trace):
    """One banded extension; writes a result row into ``res`` and returns cells computed.

    H and E need at least |Y|+1 entries. When ``trace`` has rows, trace[i]
    receives (first column, last planned column, last computed column) of row i.
    """
    qlen = q.shape[0]
    tlen = t.shape[0]
    oe = go + ge
    for j in range(tlen + 1):
        H[j] = 0
        E[j] = 0
    res[R_BEST] = h0
    res[R_QEND] = 0
    res[R_TEND] = 0
    res[R_MAXOFF] = 0
    res[R_ABORTED] = 0
    if qlen == 0:
        res[R_GSCORE] = h0
        res[R_GTEND] = 0
        return 0
    res[R_GSCORE] = -1
    res[R_GTEND] = -1
    tracing = trace.shape[0] > qlen

    H[0] = h0
    c1 = 0
    for j in range(1, min(tlen, w) + 1):
        v = h0 - go - ge * j
        if v <= 0:
            break
        H[j] = v
        c1 = j
    prev_lo = 0
    prev_hi = c1
    beg = 0
    end = min(c1 + 1, 1 + w, tlen)
    best = h0
    bi = 0
    bj = 0
    max_off = 0
    cells = 0

    for i in range(1, qlen + 1):
        qi = q[i - 1]
        lim = min(tlen, i + w)
        m = 0
        mj = 0
        c0 = -1
        c1 = -1
        f = 0
        if beg == 0:
            diag = H[0]
            hb = h0 - go - ge * i
            if hb < 0:
                hb = 0
            H[0] = hb
            E[0] = 0
            cells += 1
            if hb > 0:
                c0 = 0
                c1 = 0
            j = 1
        else:
            diag = H[beg - 1]
            j = beg
        while j <= lim:
            if j > end and f == 0:
                break
            up = H[j]
            e = E[j]
            if diag > 0:
                if qi == t[j - 1] and qi < 4:
                    mm = diag + a
                else:
                    mm = diag - b
                if mm < 0:
                    mm = 0
            else:
                mm = 0
            h = mm
            if e > h:
                h = e
            if f > h:
                h = f
            en = h - oe
            if e - ge > en:
                en = e - ge
            if en < 0:
                en = 0
            fn = h - oe
            if f - ge > fn:
                fn = f - ge
            if fn < 0:
                fn = 0
            f = fn
            diag = up
            H[j] = h
            E[j] = en
            if h > m:
                m = h
                mj = j
            if h > 0:
                if c0 < 0:
                    c0 = j
                c1 = j
            cells += 1
            j += 1
        row_end = j - 1
        if tracing:
            trace[i, 0] = beg
            trace[i, 1] = end
            trace[i, 2] = row_end
        # keep the row arrays zero outside the range just written
        for jj in range(prev_lo, min(beg, prev_hi + 1)):
            H[jj] = 0
            E[jj] = 0
        for jj in range(max(row_end + 1, prev_lo), prev_hi + 1):
            H[jj] = 0
            E[jj] = 0
        prev_lo = beg
        prev_hi = row_end

        if i == qlen:
            g = H[0] if beg == 0 else 0
            gj = 0
            for jj in range(max(beg, 1), row_end + 1):
                if H[jj] > g:
                    g = H[jj]
                    gj = jj
            res[R_GSCORE] = g
            res[R_GTEND] = gj
        if c0 < 0:
            if i < qlen:
                res[R_ABORTED] = 1
            break
        if m > best:
            best = m
            bi = i
            bj = mj
            off = mj - i if mj > i else i - mj
            if off > max_off:
                max_off = off
        elif zdrop > 0:
            drift = (i - bi) - (mj - bj)
            if drift < 0:
                drift = -drift
            if best - m - ge * drift > zdrop:
                if i < qlen:
                    res[R_ABORTED] = 1
                break
        beg = c0 if c0 > i + 1 - w else i + 1 - w
        end = min(c1 + 1, i + 1 + w, tlen)

    res[R_BEST] = best
    res[R_QEND] = bi
    res[R_TEND] = bj
    res[R_MAXOFF] = max_off
    return cells


@njit(cache=True, nogil=True)
def bsw_scalar_many(jq, qoff, qlen, jt, toff, tlen, h0, sel, nsel, a, b, go, ge, w, zdrop,
                    H, E, res):
    """Scalar kernel over jobs sel[:nsel]; returns total cells computed."""
    trace = res[:0, :3]
    cells = 0
    for p in range(nsel):
        k = sel[p]
        q = jq[qoff[k]:qoff[k] + qlen[k]]
        t = jt[toff[k]:toff[k] + tlen[k]]
        cells += bsw_scalar_kernel(q, t, h0[k], a, b, go, ge, w, zdrop, H, E, res[k], trace)
    return cells


# --------------------------------------------------------------------------
# batched kernel: lane l of a group runs job sel[g0 + l]

L_ACT, L_QL, L_TL, L_H0, L_LO, L_HI, L_BEST, L_BI, L_BJ, L_MOFF, L_F, L_HD, L_RB, L_RBJ, \
    L_C0, L_C1, L_TAIL, L_VHI, L_SAT, L_JOB, L_HMAX = range(21)
LANE_FIELDS = 21
BIG = 1 << 30
# row max and its first column share one int32 key; longer targets run scalar
KEY_SPAN = 1 << 15


class _NoAliasCompiler(CompilerBase):
    """Default nopython pipeline with every array argument marked noalias."""

    def define_pipelines(self):
        self.state.flags.noalias = True
        return [DefaultPassBuilder.define_nopython_pipeline(self.state)]


@njit(cache=True, nogil=True, pipeline_class=_NoAliasCompiler)
def _row_pass(Hb, Eb, QS, TS, i, j0, maxt, HI, W, F, Hd, vhi, lo, hi, rkey, tail, a, b, oe, ge,
              maxv):
    """Cells of row i for all lanes from column j0; returns the last column visited.

    Every argument must be a distinct buffer: with no aliasing to rule out at
    run time the lane loop compiles to straight vector code.
    """
    z32 = np.int32(0)
    oe32 = np.int32(oe)
    ge32 = np.int32(ge)
    b32 = np.int32(b)
    ab = np.int32(a + b)
    mx = np.int32(maxv)
    j = j0
    while j <= maxt:
        jj = np.int32(j)
        anyf = np.int32(0)
        for l in range(W):
            vh = vhi[l]
            inb = np.int32(jj <= vh) & np.int32(jj >= lo[l])
            up = np.int32(Hb[j, l])
            e = np.int32(Eb[j, l])
            d = Hd[l]
            f = F[l]
            qb = np.int32(QS[i - 1, l])
            hit = np.int32(qb == np.int32(TS[j - 1, l])) & np.int32(qb < 4)
            mm = max(d + hit * ab - b32, z32) * np.int32(d > z32)
            h = np.int32(min(max(mm, e, f), mx) * inb)
            en = np.int32(max(h - oe32, e - ge32, z32) * inb)
            fn = np.int32(max(h - oe32, f - ge32, z32) * inb)
            rkey[l] = max(rkey[l], np.int32(h * KEY_SPAN + (KEY_SPAN - 1 - jj)))
            # first column past the planned range entered with no gap alive
            opened = np.int32(jj > hi[l]) & np.int32(f == z32)
            tail[l] = min(tail[l], np.int32(BIG - opened * (BIG - jj)))
            Hd[l] = up
            Hb[j, l] = h
            Eb[j, l] = en
            F[l] = fn
            anyf = max(anyf, fn * np.int32(jj < vh))
        j += 1
        if j > HI and anyf == 0:
            break
    return j - 1


@njit(cache=True, nogil=True)
def bsw_batch_kernel(jq, qoff, qlen, jt, toff, tlen, h0, sel, nsel, W, a, b, go, ge, w, zdrop,
                     maxv, Hb, Eb, QS, TS, lane, res, sat, stats):
    """Process sel[:nsel] (already length-sorted) W jobs at a time.

    Hb/Eb: (max_tlen + 1, W) score rows in the storage precision (uint8 or
    uint16); QS/TS: SoA base buffers; lane: (LANE_FIELDS, W) int32 state.
    A lane whose score reaches ``maxv`` is flagged in ``sat`` and its result
    must be recomputed at higher precision.  stats[0] += cells computed
    (all lanes), stats[1] += cells the scalar kernel would compute.
    """
    oe = go + ge
    act = lane[L_ACT]
    ql = lane[L_QL]
    tl = lane[L_TL]
    lh0 = lane[L_H0]
    lo = lane[L_LO]
    hi = lane[L_HI]
    lbest = lane[L_BEST]
    lbi = lane[L_BI]
    lbj = lane[L_BJ]
    moff = lane[L_MOFF]
    F = lane[L_F]
    Hd = lane[L_HD]
    rkey = lane[L_RB]
    c0 = lane[L_C0]
    c1 = lane[L_C1]
    tail = lane[L_TAIL]
    vhi = lane[L_VHI]
    hmax = lane[L_HMAX]
    lsat = lane[L_SAT]
    ljob = lane[L_JOB]
    total_cells = 0
    useful_cells = 0

    for g0 in range(0, nsel, W):
        nl = min(W, nsel - g0)
        maxq = 0
        maxt = 0
        for l in range(W):
            if l < nl:
                k = sel[g0 + l]
                ljob[l] = k
                ql[l] = qlen[k]
                tl[l] = tlen[k]
                lh0[l] = h0[k]
                if ql[l] > maxq:
                    maxq = ql[l]
                if tl[l] > maxt:
                    maxt = tl[l]
            else:
                ljob[l] = -1
                ql[l] = 0
                tl[l] = 0
                lh0[l] = 0
        # AoS -> SoA; padding positions hold the never-matching code 4
        for i in range(maxq):
            for l in range(W):
                QS[i, l] = 4
        for j in range(maxt):
            for l in range(W):
                TS[j, l] = 4
        for l in range(nl):
            k = ljob[l]
            for i in range(ql[l]):
                QS[i, l] = jq[qoff[k] + i]
            for j in range(tl[l]):
                TS[j, l] = jt[toff[k] + j]
        for j in range(maxt + 1):
            for l in range(W):
                Hb[j, l] = 0
                Eb[j, l] = 0

        # row 0
        whi = min(maxt, w)
        for l in range(W):
            lsat[l] = 0
            lbest[l] = lh0[l]
            lbi[l] = 0
            lbj[l] = 0
            moff[l] = 0
            if l >= nl:
                act[l] = 0
                continue
            k = ljob[l]
            res[k, R_BEST] = lh0[l]
            res[k, R_QEND] = 0
            res[k, R_TEND] = 0
            res[k, R_MAXOFF] = 0
            res[k, R_ABORTED] = 0
            if lh0[l] >= maxv:
                lsat[l] = 1
            if ql[l] == 0:
                res[k, R_GSCORE] = lh0[l]
                res[k, R_GTEND] = 0
                act[l] = 0
                continue
            res[k, R_GSCORE] = -1
            res[k, R_GTEND] = -1
            if tl[l] >= KEY_SPAN:
                # flagged like a saturated lane, so the scalar kernel takes it
                lsat[l] = 1
                act[l] = 0
                continue
            act[l] = 1
            v0 = lh0[l] if lh0[l] < maxv else maxv
            Hb[0, l] = v0
            last = 0
            for j in range(1, min(tl[l], w) + 1):
                v = lh0[l] - go - ge * j
                if v <= 0:
                    break
                Hb[j, l] = v if v < maxv else maxv
                last = j
            lo[l] = 0
            hi[l] = min(last + 1, 1 + w, tl[l])
        wlo = 0

        for i in range(1, maxq + 1):
            nact = 0
            LO = 1 << 30
            HI = -1
            for l in range(W):
                if act[l] == 1:
                    nact += 1
                    if lo[l] < LO:
                        LO = lo[l]
                    if hi[l] > HI:
                        HI = hi[l]
            if nact == 0:
                break
            # vhi: last column this lane may hold a non-zero cell in (-1 when idle);
            # cells left of a lane's own lo are masked like those past vhi
            for l in range(W):
                F[l] = 0
                rkey[l] = -1
                c0[l] = BIG
                c1[l] = -1
                tail[l] = BIG
                hmax[l] = 0
                vhi[l] = min(tl[l], i + w) if act[l] == 1 else -1
            row_cells = 0
            if LO == 0:
                for l in range(W):
                    Hd[l] = Hb[0, l]
                    hb = lh0[l] - go - ge * i
                    if hb < 0 or act[l] == 0 or lo[l] != 0:
                        hb = 0
                    hmax[l] = hb
                    hb = min(hb, maxv)
                    Hb[0, l] = hb
                    Eb[0, l] = 0
                    if hb > 0:
                        c0[l] = 0
                        c1[l] = 0
                    if act[l] == 1 and lo[l] == 0:
                        useful_cells += 1
                row_cells += 1
                j0 = 1
            else:
                for l in range(W):
                    Hd[l] = Hb[LO - 1, l]
                j0 = LO
            # the lane loop carries few arrays so that it vectorizes
            row_end = _row_pass(Hb, Eb, QS, TS, i, j0, maxt, HI, W, F, Hd, vhi, lo, hi, rkey,
                                tail, a, b, oe, ge, maxv)
            row_cells += row_end - j0 + 1
            total_cells += row_cells * W
            # non-zero span: scan inwards from both ends of the lane's window
            for l in range(W):
                if act[l] == 0:
                    continue
                # past the scalar stop column every cell is zero here too
                top = min(vhi[l], row_end, tail[l] - 1)
                if c0[l] == BIG:
                    jj = max(j0, lo[l])
                    while jj <= top and Hb[jj, l] == 0:
                        jj += 1
                    if jj <= top:
                        c0[l] = jj
                if c0[l] != BIG:
                    jj = top
                    while jj > c0[l] and Hb[jj, l] == 0:
                        jj -= 1
                    c1[l] = jj
            # zero the columns written by the previous row but not by this one
            new_lo = LO
            for jj in range(wlo, min(new_lo, whi + 1)):
                for l in range(W):
                    Hb[jj, l] = 0
                    Eb[jj, l] = 0
            for jj in range(max(row_end + 1, wlo), whi + 1):
                for l in range(W):
                    Hb[jj, l] = 0
                    Eb[jj, l] = 0
            wlo = new_lo
            whi = row_end

            for l in range(W):
                if act[l] == 0:
                    continue
                rbv = rkey[l] // KEY_SPAN
                rbjv = KEY_SPAN - 1 - rkey[l] % KEY_SPAN if rbv > 0 else 0
                if rkey[l] < 0:
                    rbv = 0
                    rbjv = 0
                if hmax[l] >= maxv or rbv >= maxv:
                    lsat[l] = 1
                if c0[l] == BIG:
                    c0[l] = -1
                last = min(tail[l] - 1, vhi[l], row_end)
                first = lo[l] if lo[l] > 1 else 1
                if last >= first:
                    useful_cells += last - first + 1
                k = ljob[l]
                if i == ql[l]:
                    g = np.int64(Hb[0, l])
                    gj = 0
                    for jj in range(1, row_end + 1):
                        if Hb[jj, l] > g:
                            g = np.int64(Hb[jj, l])
                            gj = jj
                    res[k, R_GSCORE] = g
                    res[k, R_GTEND] = gj
                stop = False
                if c0[l] < 0:
                    if i < ql[l]:
                        res[k, R_ABORTED] = 1
                    stop = True
                elif rbv > lbest[l]:
                    lbest[l] = rbv
                    lbi[l] = i
                    lbj[l] = rbjv
                    off = rbjv - i
                    if off < 0:
                        off = -off
                    if off > moff[l]:
                        moff[l] = off
                elif zdrop > 0:
                    drift = (i - lbi[l]) - (rbjv - lbj[l])
                    if drift < 0:
                        drift = -drift
                    if lbest[l] - rbv - ge * drift > zdrop:
                        if i < ql[l]:
                            res[k, R_ABORTED] = 1
                        stop = True
                if stop or i == ql[l]:
                    act[l] = 0
                    continue
                nlo = i + 1 - w
                if c0[l] > nlo:
                    nlo = c0[l]
                lo[l] = nlo
                hi[l] = min(c1[l] + 1, i + 1 + w, tl[l])

        for l in range(nl):
            k = ljob[l]
            res[k, R_BEST] = lbest[l]
            res[k, R_QEND] = lbi[l]
            res[k, R_TEND] = lbj[l]
            res[k, R_MAXOFF] = moff[l]
            sat[k] = lsat[l]
    stats[0] += total_cells
    stats[1] += useful_cells


# The lane loop runs W iterations with W often 8 or 16, below the trip
# count LLVM's cost model wants before it vectorizes; pin the vector width
# while the batched kernel is compiled (cached builds keep the result).
VECTOR_WIDTH = 8


def _compile_lanes(args):
    sig = tuple(typeof(x) for x in args)
    if sig in bsw_batch_kernel.overloads:
        return
    with global_compiler_lock:
        llvm.set_option("", f"-force-vector-width={VECTOR_WIDTH}")
        llvm.set_option("", "-vectorizer-min-trip-count=2")
        llvm.set_option("", "-force-vector-interleave=1")
        # a pinned width makes LLVM report every loop it leaves scalar on fd 2
        saved = os.dup(2)
        sink = os.open(os.devnull, os.O_WRONLY)
        os.dup2(sink, 2)
        try:
            bsw_batch_kernel.compile(sig)
        finally:
            os.dup2(saved, 2)
            os.close(saved)
            os.close(sink)
            llvm.set_option("", "-force-vector-width=0")
            llvm.set_option("", "-vectorizer-min-trip-count=16")
            llvm.set_option("", "-force-vector-interleave=0")


def run_lanes(*args):
    """bsw_batch_kernel(*args), compiled with the pinned vector width on first use."""
    _compile_lanes(args)
    bsw_batch_kernel(*args)


@njit(cache=True, nogil=True)
def classify_jobs(qlen, h0, n, a, end_bonus, sel8, sel16):
    """Split jobs by precision: 8-bit iff h0 + a*|X| + end_bonus <= 254."""
    n8 = 0
    n16 = 0
    for k in range(n):
        if h0[k] + a * qlen[k] + end_bonus <= MAX8 - 1:
            sel8[n8] = k
            n8 += 1
        else:
            sel16[n16] = k
            n16 += 1
    return n8, n16


@njit(cache=True, nogil=True)
def sort_by_lengths(sel, n, qlen, tlen, kmax, counts, tmp):
    """Stable LSD radix sort of sel[:n] by (query length, target length), in place."""
    counting_sort_stable(sel, n, tlen, kmax, counts, tmp)
    counting_sort_stable(tmp, n, qlen, kmax, counts, sel)


@njit(cache=True, nogil=True)
def collect_saturated(sel, n, sat, out):
    m = 0
    for p in range(n):
        k = sel[p]
        if sat[k]:
            out[m] = k
            m += 1
    return m


# --------------------------------------------------------------------------
# workspace + drivers


class BswWorkspace:
    """Reusable buffers for the batched kernel; grows geometrically, never shrinks."""

    def __init__(self, arena=None):
        from .arena import Arena
        self.arena = arena if arena is not None else Arena()

    def buffers(self, n_jobs, max_q, max_t, W8, W16):
        ar = self.arena
        rows_t = max_t + 1
        kmax = max(max_q, max_t) + 1
        Wm = max(W8, W16)
        return dict(
            sel8=ar.get("bsw.sel8", n_jobs, np.int64),
            sel16=ar.get("bsw.sel16", n_jobs, np.int64),
            selsat=ar.get("bsw.selsat", n_jobs, np.int64),
            tmp=ar.get("bsw.tmp", n_jobs, np.int64),
            counts=ar.get("bsw.counts", kmax + 2, np.int64),
            sat=ar.get("bsw.sat", n_jobs, np.uint8),
            H8=ar.get2("bsw.H8", rows_t, W8, np.uint8),
            E8=ar.get2("bsw.E8", rows_t, W8, np.uint8),
            H16=ar.get2("bsw.H16", rows_t, W16, np.uint16),
            E16=ar.get2("bsw.E16", rows_t, W16, np.uint16),
            QS=ar.get2("bsw.QS", max(max_q, 1), Wm, np.uint8),
            TS=ar.get2("bsw.TS", max(max_t, 1), Wm, np.uint8),
            lane=ar.get2("bsw.lane", LANE_FIELDS, Wm, np.int32),
            Hs=ar.get("bsw.Hs", rows_t, np.int64),
            Es=ar.get("bsw.Es", rows_t, np.int64),
            kmax=kmax,
        )


@dataclass
class BatchStats:
    cells: int = 0
    useful: int = 0
    n8: int = 0
    n16: int = 0
    escalated: int = 0
    scalar_fallback: int = 0

    @property
    def useful_ratio(self) -> float:
        return self.useful / self.cells if self.cells else 1.0


def run_batch(jq, qoff, qlen, jt, toff, tlen, h0, n, params: BswParams, res, workspace,
              W8=64, W16=32, force8=False, stats: BatchStats | None = None,
              max_q=None, max_t=None):
    """Batched extension of jobs 0..n-1 held in flat AoS buffers; fills res[:n].

    Jobs are split by precision, radix-sorted by lengths, run W lanes at a
    time, 8-bit lanes that saturate are rerun at 16 bits, and 16-bit
    saturation falls back to the scalar kernel.
    """
    if n == 0:
        return stats
    if max_q is None or max_t is None:
        max_q, max_t = max_lengths(qlen, tlen, n)
    buf = workspace.buffers(n, max_q, max_t, W8, W16)
    p = params
    sel8, sel16, selsat, sat = buf["sel8"], buf["sel16"], buf["selsat"], buf["sat"]
    cell_stats = _cell_counter(workspace)
    cell_stats[0] = 0
    cell_stats[1] = 0
    if force8:
        n8 = _fill_identity(sel8, n)
        n16 = 0
    else:
        n8, n16 = classify_jobs(qlen, h0, n, p.a, p.end_bonus, sel8, sel16)
    sort_by_lengths(sel8, n8, qlen, tlen, buf["kmax"], buf["counts"], buf["tmp"])
    sort_by_lengths(sel16, n16, qlen, tlen, buf["kmax"], buf["counts"], buf["tmp"])
    sat[:n] = 0
    run_lanes(jq, qoff, qlen, jt, toff, tlen, h0, sel8, n8, W8, p.a, p.b, p.g_o, p.g_e,
                     p.w, p.zdrop, MAX8, buf["H8"], buf["E8"], buf["QS"], buf["TS"], buf["lane"],
                     res, sat, cell_stats)
    nsat8 = collect_saturated(sel8, n8, sat, selsat)
    run_lanes(jq, qoff, qlen, jt, toff, tlen, h0, sel16, n16, W16, p.a, p.b, p.g_o,
                     p.g_e, p.w, p.zdrop, MAX16, buf["H16"], buf["E16"], buf["QS"], buf["TS"],
                     buf["lane"], res, sat, cell_stats)
    run_lanes(jq, qoff, qlen, jt, toff, tlen, h0, selsat, nsat8, W16, p.a, p.b, p.g_o,
                     p.g_e, p.w, p.zdrop, MAX16, buf["H16"], buf["E16"], buf["QS"], buf["TS"],
                     buf["lane"], res, sat, cell_stats)
    nsat16 = collect_saturated(sel16, n16, sat, buf["tmp"])
    nsat16 += collect_saturated(selsat, nsat8, sat, buf["tmp"][nsat16:])
    bsw_scalar_many(jq, qoff, qlen, jt, toff, tlen, h0, buf["tmp"], nsat16, p.a, p.b, p.g_o,
                    p.g_e, p.w, p.zdrop, buf["Hs"], buf["Es"], res)
    if stats is not None:
        stats.cells += int(cell_stats[0])
        stats.useful += int(cell_stats[1])
        stats.n8 += int(n8)
        stats.n16 += int(n16)
        stats.escalated += int(nsat8)
        stats.scalar_fallback += int(nsat16)
    return stats


@njit(cache=True, nogil=True)
def max_lengths(qlen, tlen, n):
    mq = 0
    mt = 0
    for k in range(n):
        mq = max(mq, qlen[k])
        mt = max(mt, tlen[k])
    return mq, mt


def _cell_counter(workspace):
    return workspace.arena.get("bsw.cellstats", 2, np.int64)


@njit(cache=True, nogil=True)
def _fill_identity(sel, n):
    for k in range(n):
        sel[k] = k
    return n


def pack_jobs(jobs):
    """AoS flat buffers for a list of BswJob (job k keeps index k)."""
    n = len(jobs)
    qlen = np.array([len(j.query) for j in jobs], dtype=np.int64)
    tlen = np.array([len(j.target) for j in jobs], dtype=np.int64)
    qoff = np.zeros(n, dtype=np.int64)
    toff = np.zeros(n, dtype=np.int64)
    if n:
        qoff[1:] = np.cumsum(qlen)[:-1]
        toff[1:] = np.cumsum(tlen)[:-1]
    jq = np.concatenate([j.query for j in jobs] + [np.zeros(1, np.uint8)])
    jt = np.concatenate([j.target for j in jobs] + [np.zeros(1, np.uint8)])
    h0 = np.array([j.h0 for j in jobs], dtype=np.int64)
    return jq, qoff, qlen, jt, toff, tlen, h0


def bsw_scalar(job: BswJob, params: BswParams = BswParams(), trace=None) -> BswResult:
    p = params
    tl = len(job.target)
    H = np.zeros(tl + 1, dtype=np.int64)
    E = np.zeros(tl + 1, dtype=np.int64)
    res = np.zeros(RES_FIELDS, dtype=np.int64)
    tr = trace if trace is not None else np.zeros((0, 3), dtype=np.int64)
    bsw_scalar_kernel(job.query, job.target, int(job.h0), p.a, p.b, p.g_o, p.g_e, p.w, p.zdrop,
                      H, E, res, tr)
    return BswResult.from_row(res)


def scalar_cells(job: BswJob, params: BswParams = BswParams()) -> int:
    p = params
    tl = len(job.target)
    H = np.zeros(tl + 1, dtype=np.int64)
    E = np.zeros(tl + 1, dtype=np.int64)
    res = np.zeros(RES_FIELDS, dtype=np.int64)
    return int(bsw_scalar_kernel(job.query, job.target, int(job.h0), p.a, p.b, p.g_o, p.g_e,
                                 p.w, p.zdrop, H, E, res, np.zeros((0, 3), dtype=np.int64)))


def bsw_batch(jobs, params: BswParams = BswParams(), lane_width: int = 16,
              precision: int | None = None, stats: BatchStats | None = None,
              workspace: BswWorkspace | None = None) -> list[BswResult]:
    """Batched extension; results are returned in job_id order.

    ``precision=8`` forces every job through the 8-bit lanes first (saturating
    lanes are rerun at 16 bits); ``precision=16`` skips the 8-bit path.
    """
    if not jobs:
        raise ValueError("bsw_batch needs at least one job")
    order = sorted(range(len(jobs)), key=lambda k: jobs[k].job_id)
    ordered = [jobs[k] for k in order]
    jq, qoff, qlen, jt, toff, tlen, h0 = pack_jobs(ordered)
    n = len(ordered)
    res = np.zeros((n, RES_FIELDS), dtype=np.int64)
    ws = workspace or BswWorkspace()
    p = params
    if precision == 16:
        _run16(jq, qoff, qlen, jt, toff, tlen, h0, n, p, res, ws, lane_width, stats)
    else:
        run_batch(jq, qoff, qlen, jt, toff, tlen, h0, n, p, res, ws, lane_width, lane_width,
                  force8=(precision == 8), stats=stats)
    return [BswResult.from_row(res[k]) for k in range(n)]


def _run16(jq, qoff, qlen, jt, toff, tlen, h0, n, p, res, ws, W, stats):
    max_q = int(qlen[:n].max())
    max_t = int(tlen[:n].max())
    buf = ws.buffers(n, max_q, max_t, W, W)
    sel = buf["sel16"]
    _fill_identity(sel, n)
    sort_by_lengths(sel, n, qlen, tlen, buf["kmax"], buf["counts"], buf["tmp"])
    sat = buf["sat"]
    sat[:n] = 0
    cs = _cell_counter(ws)
    cs[:] = 0
    run_lanes(jq, qoff, qlen, jt, toff, tlen, h0, sel, n, W, p.a, p.b, p.g_o, p.g_e,
                     p.w, p.zdrop, MAX16, buf["H16"], buf["E16"], buf["QS"], buf["TS"],
                     buf["lane"], res, sat, cs)
    m = collect_saturated(sel, n, sat, buf["tmp"])
    bsw_scalar_many(jq, qoff, qlen, jt, toff, tlen, h0, buf["tmp"], m, p.a, p.b, p.g_o, p.g_e,
                    p.w, p.zdrop, buf["Hs"], buf["Es"], res)
    if stats is not None:
        stats.cells += int(cs[0])
        stats.useful += int(cs[1])
        stats.n16 += n
        stats.scalar_fallback += int(m)


def sort_jobs(jobs) -> list[int]:
    """Stable permutation ordering jobs by (query length, target length)."""
    n = len(jobs)
    if n == 0:
        return []
    qlen = np.array([len(j.query) for j in jobs], dtype=np.int64)
    tlen = np.array([len(j.target) for j in jobs], dtype=np.int64)
    sel = np.arange(n, dtype=np.int64)
    kmax = int(max(qlen.max(), tlen.max())) + 1
    sort_by_lengths(sel, n, qlen, tlen, kmax, np.zeros(kmax + 2, np.int64),
                    np.zeros(n, np.int64))
    return [int(x) for x in sel]


def select_precision(job: BswJob, params: BswParams = BswParams()) -> int:
    bound = int(job.h0) + params.a * len(job.query) + params.end_bonus
    return PREC8 if bound <= MAX8 - 1 else PREC16


# --------------------------------------------------------------------------
# post-extension containment filter

A_SCORE, A_REV, A_QB, A_QE, A_RB, A_RE, A_S = range(7)
AL_FIELDS = 7


@njit(cache=True, nogil=True)
def post_filter_kernel(al, keys, order, lo, hi, keep):
    """Filter alignments al[order[lo:hi]]; keep[k] = 1 for survivors.

    al rows: (score, is_reverse, q_begin, q_end, r_begin, r_end, s). Candidates
    are visited by descending score then position; one is dropped when both
    its query and reference spans lie inside an already kept alignment on the
    same strand.  After the call order[lo:hi] holds that visiting order.
    """
    for p in range(lo, hi):
        k = order[p]
        keys[k, 0] = -al[k, A_SCORE]
        keys[k, 1] = al[k, A_REV]
        keys[k, 2] = al[k, A_RB]
        keys[k, 3] = al[k, A_RE]
        keys[k, 4] = al[k, A_QB]
        keys[k, 5] = al[k, A_QE]
        keys[k, 6] = al[k, A_S]
    heap_sort_rows(keys, order, lo, hi)
    nkept = 0
    for p in range(lo, hi):
        k = order[p]
        keep[k] = 1
        for r in range(lo, p):
            o = order[r]
            if keep[o] == 1 and al[o, A_REV] == al[k, A_REV] \
                    and al[o, A_QB] <= al[k, A_QB] and al[k, A_QE] <= al[o, A_QE] \
                    and al[o, A_RB] <= al[k, A_RB] and al[k, A_RE] <= al[o, A_RE]:
                keep[k] = 0
                break
        nkept += keep[k]
    return nkept


@dataclass(frozen=True)
class Alignment:
    score: int
    is_reverse: bool
    q_begin: int
    q_end: int
    r_begin: int
    r_end: int
    interval_size: int = 1
    extra: tuple = field(default=(), compare=False)


def post_filter(read, alignments) -> list[Alignment]:
    """Kept alignments of one read, in descending score / ascending position order."""
    n = len(alignments)
    if n == 0:
        return []
    al = np.array([[x.score, int(x.is_reverse), x.q_begin, x.q_end, x.r_begin, x.r_end,
                    x.interval_size] for x in alignments], dtype=np.int64)
    keys = np.zeros((n, AL_FIELDS), dtype=np.int64)
    order = np.arange(n, dtype=np.int64)
    keep = np.zeros(n, dtype=np.uint8)
    post_filter_kernel(al, keys, order, 0, n, keep)
    return [alignments[k] for k in order if keep[k]]
