"""Bi-interval extension and super-maximal exact match (SMEM) search."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from llvmlite import ir
from numba import njit, types
from numba.core import cgutils
from numba.extending import intrinsic

from .fmindex import BASE_OFFSET, ETA_SHIFT, FMIndex, occ4
from .refseq import MAX_READ_LEN

SCRATCH_ROWS = MAX_READ_LEN + 2


@dataclass(frozen=True)
class BiInterval:
    k: int
    l: int
    s: int


@dataclass(frozen=True)
class Smem:
    q_begin: int
    q_end: int
    interval: BiInterval

    @property
    def length(self) -> int:
        return self.q_end - self.q_begin


@dataclass(frozen=True)
class SmemParams:
    min_seed_len: int = 19
    max_occ: int = 500
    min_intv: int = 1

    def __post_init__(self):
        for name in ("min_seed_len", "max_occ", "min_intv"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@intrinsic
def _llvm_prefetch(typingctx, arr, i, j):
    """Read prefetch (locality 3) of &arr[i, j]."""
    sig = types.void(arr, i, j)

    def codegen(context, builder, signature, args):
        aryty = signature.args[0]
        ary = context.make_array(aryty)(context, builder, args[0])
        idx = [context.cast(builder, args[1], signature.args[1], types.intp),
               context.cast(builder, args[2], signature.args[2], types.intp)]
        ptr = cgutils.get_item_pointer(context, builder, aryty, ary, idx)
        i8p = builder.bitcast(ptr, ir.IntType(8).as_pointer())
        i32 = ir.IntType(32)
        fnty = ir.FunctionType(ir.VoidType(), [i8p.type, i32, i32, i32])
        fn = cgutils.get_or_insert_function(builder.module, fnty, "llvm.prefetch.p0")
        builder.call(fn, [i8p, ir.Constant(i32, 0), ir.Constant(i32, 3), ir.Constant(i32, 1)])
        return context.get_dummy_value()

    return sig, codegen


@njit(cache=True, nogil=True, inline="always")
def _touch(counts, row):
    if row >= 0:
        _llvm_prefetch(counts, row >> ETA_SHIFT, 0)


@njit(cache=True, nogil=True, inline="always")
def _extend4(counts, bwt, D, sent, k, l, s):
    """Backward extension of (k, l, s) by every base: returns (ks, ls, ss)."""
    a0, a1, a2, a3 = occ4(counts, bwt, k - 1)
    b0, b1, b2, b3 = occ4(counts, bwt, k + s - 1)
    s0 = b0 - a0
    s1 = b1 - a1
    s2 = b2 - a2
    s3 = b3 - a3
    # l-values follow complement order T, G, C, A after the '$' row
    l3 = l + (1 if (k <= sent and sent <= k + s - 1) else 0)
    l2 = l3 + s3
    l1 = l2 + s2
    l0 = l1 + s1
    ks = (D[0] + BASE_OFFSET + a0, D[1] + BASE_OFFSET + a1,
          D[2] + BASE_OFFSET + a2, D[3] + BASE_OFFSET + a3)
    return ks, (l0, l1, l2, l3), (s0, s1, s2, s3)


@njit(cache=True, nogil=True)
def _extend4_py(counts, bwt, D, sent, k, l, s):
    return _extend4(counts, bwt, D, sent, k, l, s)


@njit(cache=True, nogil=True)
def smem_at_kernel(counts, bwt, D, sent, q, x, min_intv, prefetch, curr, prev, mem):
    """SMEMs overlapping q[x]; rows of ``mem`` are (k, l, s, q_begin, q_end).

    Returns (number of SMEMs, end of the longest forward match from x).
    curr/prev are (rows, 4) scratch buffers of (k, l, s, q_end).
    """
    qlen = q.shape[0]
    c = q[x]
    if c > 3:
        return 0, x + 1
    ik_k = D[c] + BASE_OFFSET
    ik_l = D[3 - c] + BASE_OFFSET
    ik_s = D[c + 1] - D[c]
    if ik_s < min_intv:
        return 0, x + 1
    ik_e = x + 1

    # forward pass: remember the interval each time its size shrinks
    nc = 0
    i = x + 1
    while i < qlen:
        if q[i] < 4:
            cc = 3 - q[i]
            ks, ls, ss = _extend4(counts, bwt, D, sent, ik_l, ik_k, ik_s)
            ok_k = ls[cc]
            ok_l = ks[cc]
            ok_s = ss[cc]
            if ok_s != ik_s:
                curr[nc, 0] = ik_k
                curr[nc, 1] = ik_l
                curr[nc, 2] = ik_s
                curr[nc, 3] = ik_e
                nc += 1
                if ok_s < min_intv:
                    break
            ik_k = ok_k
            ik_l = ok_l
            ik_s = ok_s
            ik_e = i + 1
            if prefetch:
                _touch(counts, ik_l - 1)
                _touch(counts, ik_l + ik_s - 1)
        else:
            curr[nc, 0] = ik_k
            curr[nc, 1] = ik_l
            curr[nc, 2] = ik_s
            curr[nc, 3] = ik_e
            nc += 1
            break
        i += 1
    if i == qlen:
        curr[nc, 0] = ik_k
        curr[nc, 1] = ik_l
        curr[nc, 2] = ik_s
        curr[nc, 3] = ik_e
        nc += 1
    # longest match first
    for a in range(nc // 2):
        b = nc - 1 - a
        for f in range(4):
            tmp = curr[a, f]
            curr[a, f] = curr[b, f]
            curr[b, f] = tmp
    ret = curr[0, 3]

    # backward passes
    src = curr
    dst = prev
    nsrc = nc
    nmem = 0
    i = x - 1
    while i >= -1:
        c = -1
        if i >= 0 and q[i] < 4:
            c = q[i]
        ndst = 0
        for j in range(nsrc):
            pk = src[j, 0]
            pl = src[j, 1]
            ps = src[j, 2]
            pe = src[j, 3]
            ok_k = 0
            ok_l = 0
            ok_s = 0
            if c >= 0:
                ks, ls, ss = _extend4(counts, bwt, D, sent, pk, pl, ps)
                ok_k = ks[c]
                ok_l = ls[c]
                ok_s = ss[c]
            if c < 0 or ok_s < min_intv:
                if ndst == 0:
                    if nmem == 0 or i + 1 < mem[nmem - 1, 3]:
                        mem[nmem, 0] = pk
                        mem[nmem, 1] = pl
                        mem[nmem, 2] = ps
                        mem[nmem, 3] = i + 1
                        mem[nmem, 4] = pe
                        nmem += 1
            elif ndst == 0 or ok_s != dst[ndst - 1, 2]:
                dst[ndst, 0] = ok_k
                dst[ndst, 1] = ok_l
                dst[ndst, 2] = ok_s
                dst[ndst, 3] = pe
                ndst += 1
                if prefetch:
                    _touch(counts, ok_k - 1)
                    _touch(counts, ok_k + ok_s - 1)
        if ndst == 0:
            break
        tmp_arr = src
        src = dst
        dst = tmp_arr
        nsrc = ndst
        i -= 1
    # sort by start coordinate
    for a in range(nmem // 2):
        b = nmem - 1 - a
        for f in range(5):
            tmp = mem[a, f]
            mem[a, f] = mem[b, f]
            mem[b, f] = tmp
    return nmem, ret


@njit(cache=True, nogil=True)
def smem_read_kernel(counts, bwt, D, sent, q, min_seed_len, min_intv, prefetch,
                     curr, prev, mem, out, start):
    """All SMEMs of one read appended to ``out`` rows (q_begin, q_end, k, l, s) from ``start``."""
    n = start
    x = 0
    qlen = q.shape[0]
    while x < qlen:
        if q[x] > 3:
            x += 1
            continue
        nm, ret = smem_at_kernel(counts, bwt, D, sent, q, x, min_intv, prefetch, curr, prev, mem)
        for j in range(nm):
            qb = mem[j, 3]
            qe = mem[j, 4]
            if qe - qb >= min_seed_len:
                out[n, 0] = qb
                out[n, 1] = qe
                out[n, 2] = mem[j, 0]
                out[n, 3] = mem[j, 1]
                out[n, 4] = mem[j, 2]
                n += 1
        x = ret if ret > x else x + 1
    return n


@njit(cache=True, nogil=True)
def smem_batch_kernel(counts, bwt, D, sent, qcat, qoff, qlen, nreads, min_seed_len, min_intv,
                      prefetch, curr, prev, mem, out, out_off):
    """SMEM stage over a whole batch; read r owns rows out_off[r]:out_off[r+1]."""
    n = 0
    for r in range(nreads):
        out_off[r] = n
        q = qcat[qoff[r]:qoff[r] + qlen[r]]
        n = smem_read_kernel(counts, bwt, D, sent, q, min_seed_len, min_intv, prefetch,
                             curr, prev, mem, out, n)
    out_off[nreads] = n
    return n


def new_scratch():
    """Per-worker Curr/Prev/Match buffers sized for the longest allowed read."""
    return (np.zeros((SCRATCH_ROWS, 4), dtype=np.int64),
            np.zeros((SCRATCH_ROWS, 4), dtype=np.int64),
            np.zeros((SCRATCH_ROWS, 5), dtype=np.int64))


def _codes(read) -> np.ndarray:
    bases = getattr(read, "bases", read)
    return np.ascontiguousarray(bases, dtype=np.uint8)


def initial_interval(index: FMIndex, c: int) -> BiInterval:
    D = index.D
    return BiInterval(int(D[c] + BASE_OFFSET), int(D[3 - c] + BASE_OFFSET), int(D[c + 1] - D[c]))


def backward_ext_all(index: FMIndex, iv: BiInterval) -> tuple[BiInterval, ...]:
    ks, ls, ss = _extend4_py(index.counts, index.bwt_bytes, index.D, index.sentinel_row,
                             iv.k, iv.l, iv.s)
    return tuple(BiInterval(int(ks[c]), int(ls[c]), int(ss[c])) for c in range(4))


def backward_ext(index: FMIndex, iv: BiInterval, b: int) -> BiInterval:
    """Bi-interval of bX given that of X."""
    return backward_ext_all(index, iv)[b]


def forward_ext(index: FMIndex, iv: BiInterval, b: int) -> BiInterval:
    """Bi-interval of Xb: swap, extend backward by the complement, swap back."""
    r = backward_ext(index, BiInterval(iv.l, iv.k, iv.s), 3 - b)
    return BiInterval(r.l, r.k, r.s)


def interval_of(index: FMIndex, pattern) -> BiInterval:
    """Bi-interval of a non-empty ambiguity-free pattern via backward search."""
    p = _codes(pattern)
    if p.shape[0] == 0 or (p > 3).any():
        raise ValueError("pattern must be non-empty and contain only A/C/G/T")
    iv = initial_interval(index, int(p[-1]))
    for c in p[-2::-1]:
        if iv.s == 0:
            break
        iv = backward_ext(index, iv, int(c))
    return iv


def prefetch_hint(index: FMIndex, row: int) -> None:
    """Non-binding prefetch of the occ bucket holding ``row``; no semantic effect."""
    if 0 <= row < index.n:
        _prefetch_py(index.counts, row)


@njit(cache=True, nogil=True)
def _prefetch_py(counts, row):
    _touch(counts, row)


def smem_at(index: FMIndex, read, i0: int, params: SmemParams = SmemParams(),
            prefetch: bool = True, scratch=None) -> list[Smem]:
    q = _codes(read)
    if not 0 <= i0 < q.shape[0]:
        raise ValueError("i0 outside the read")
    if q[i0] > 3:
        raise ValueError("read[i0] is ambiguous")
    curr, prev, mem = scratch or new_scratch()
    nm, _ = smem_at_kernel(index.counts, index.bwt_bytes, index.D, index.sentinel_row, q, i0,
                           params.min_intv, prefetch, curr, prev, mem)
    out = []
    for j in range(nm):
        qb, qe = int(mem[j, 3]), int(mem[j, 4])
        if qe - qb >= params.min_seed_len:
            out.append(Smem(qb, qe, BiInterval(int(mem[j, 0]), int(mem[j, 1]), int(mem[j, 2]))))
    return out


def all_smems(index: FMIndex, read, params: SmemParams = SmemParams(),
              prefetch: bool = True, scratch=None) -> list[Smem]:
    """Every SMEM of the read (length >= min_seed_len), ordered by q_begin."""
    q = _codes(read)
    curr, prev, mem = scratch or new_scratch()
    out = np.zeros((max(q.shape[0], 1), 5), dtype=np.int64)
    n = smem_read_kernel(index.counts, index.bwt_bytes, index.D, index.sentinel_row, q,
                         params.min_seed_len, params.min_intv, prefetch, curr, prev, mem, out, 0)
    return [Smem(int(r[0]), int(r[1]), BiInterval(int(r[2]), int(r[3]), int(r[4]))) for r in out[:n]]
