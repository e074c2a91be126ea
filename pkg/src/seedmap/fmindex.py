"""FM-index over the forward+revcomp text: suffix array, BWT, D array and occ buckets.

Row convention: row 0 is the sentinel suffix, so the SA interval of a single
base c starts at ``D[c] + BASE_OFFSET`` with ``BASE_OFFSET = 1``.  This is
the only place the +1 lives; the "AC" example in the tests pins it.
"""

from __future__ import annotations

import os
import struct
from typing import BinaryIO

import numpy as np
import xxhash
from numba import njit

from .errors import (
    BadMagicError,
    BuildError,
    ChecksumMismatchError,
    TruncatedIndexError,
    VersionMismatchError,
)
from .refseq import AMBIG, ConcatSequence, RecordSpan

ETA = 32
ETA_SHIFT = 5
ETA_MASK = ETA - 1
BASE_OFFSET = 1
SENTINEL = 5  # reserved bwt byte at sentinel_row; never equal to a base code
FILL = AMBIG  # bwt bytes past the end of the last bucket

MAGIC = b"SMIX"
VERSION = 1
_HEADER = struct.Struct("<4sIQQQ4QQ")

OCC_DTYPE = np.dtype([("count", "<u4", (4,)), ("bwt", "u1", (ETA,)), ("pad", "u1", (16,))])
assert OCC_DTYPE.itemsize == 64

DEFAULT_MEM_CAP = 8 << 30


def mem_cap_from_env(default: int = DEFAULT_MEM_CAP) -> int:
    """Memory cap in bytes; SEEDMAP_MEM_CAP accepts plain bytes or a K/M/G suffix."""
    raw = os.environ.get("SEEDMAP_MEM_CAP")
    if not raw:
        return default
    return parse_size(raw)


def parse_size(raw: str) -> int:
    raw = raw.strip().upper()
    mult = 1
    if raw and raw[-1] in "KMGT":
        mult = 1 << (10 * ("KMGT".index(raw[-1]) + 1))
        raw = raw[:-1]
    value = int(float(raw) * mult)
    if value <= 0:
        raise ValueError("memory cap must be positive")
    return value


def aligned_empty(count: int, dtype, align: int = 64) -> np.ndarray:
    """1-D array of ``count`` items whose data pointer is ``align``-byte aligned."""
    dtype = np.dtype(dtype)
    nbytes = max(count, 1) * dtype.itemsize
    raw = np.zeros(nbytes + align, dtype=np.uint8)
    shift = (-raw.ctypes.data) % align
    return raw[shift:shift + count * dtype.itemsize].view(dtype)


def _as_codes(seq) -> np.ndarray:
    if isinstance(seq, ConcatSequence):
        seq = seq.bases
    return np.ascontiguousarray(seq, dtype=np.uint8)


def build_suffix_array(seq) -> np.ndarray:
    """Suffix array of ``seq`` + sentinel by prefix doubling; S[0] is the sentinel suffix."""
    text = _as_codes(seq)
    n = text.shape[0] + 1
    if n >= 1 << 32:
        raise BuildError("sequence too long for 32-bit occurrence counts")
    rank = np.zeros(n, dtype=np.int64)
    rank[:-1] = text.astype(np.int64) + 1
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    # initial ranks are already dense-ish (0..6); refine by doubling
    k = 1
    sa = np.argsort(rank, kind="stable")
    while True:
        second = np.zeros(n, dtype=np.int64)
        second[:n - k] = rank[k:] + 1 if k < n else 0
        if n + 2 < 3_000_000_000:
            key = rank * (n + 2) + second
            sa = np.argsort(key, kind="stable")
            sk = key[sa]
            change = sk[1:] != sk[:-1]
        else:
            sa = np.lexsort((second, rank))
            change = (rank[sa][1:] != rank[sa][:-1]) | (second[sa][1:] != second[sa][:-1])
        new_rank = np.empty(n, dtype=np.int64)
        new_rank[sa] = np.concatenate(([0], np.cumsum(change)))
        rank = new_rank
        if rank[sa[-1]] == n - 1:
            return sa.astype(np.int64)
        k <<= 1


def build_bwt(seq, sa: np.ndarray) -> tuple[np.ndarray, int]:
    """Last column of the BW matrix; the sentinel row holds the reserved SENTINEL code."""
    text = _as_codes(seq)
    sa = np.asarray(sa, dtype=np.int64)
    bwt = np.empty(sa.shape[0], dtype=np.uint8)
    pos = sa > 0
    bwt[pos] = text[sa[pos] - 1]
    sentinel_rows = np.flatnonzero(~pos)
    bwt[sentinel_rows] = SENTINEL
    return bwt, int(sentinel_rows[0])


def build_occ_buckets(bwt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pack B into 64-byte buckets (exclusive per-base prefix counts + 32 bwt bytes).

    Returns (buckets, D) where D has 6 entries: D[0..3] cumulative base counts,
    D[4] = number of A/C/G/T bases, D[5] = number of non-sentinel symbols.
    """
    bwt = np.asarray(bwt, dtype=np.uint8)
    n = bwt.shape[0]
    nb = -(-n // ETA)
    padded = np.full(nb * ETA, FILL, dtype=np.uint8)
    padded[:n] = bwt
    blocks = padded.reshape(nb, ETA)
    buckets = aligned_empty(nb, OCC_DTYPE)
    buckets["pad"] = 0
    buckets["bwt"] = blocks
    totals = np.zeros(4, dtype=np.int64)
    for c in range(4):
        per = (blocks == c).sum(axis=1, dtype=np.int64)
        prefix = np.cumsum(per) - per
        buckets["count"][:, c] = prefix.astype(np.uint32)
        totals[c] = per.sum()
    D = np.zeros(6, dtype=np.int64)
    D[1:5] = np.cumsum(totals)
    D[5] = n - 1
    return buckets, D


@njit(cache=True, nogil=True, inline="always")
def _popcount32(x):
    x = x - ((x >> 1) & 0x55555555)
    x = (x & 0x33333333) + ((x >> 2) & 0x33333333)
    x = (x + (x >> 4)) & 0x0F0F0F0F
    return ((x * 0x01010101) & 0xFFFFFFFF) >> 24


@njit(cache=True, nogil=True, inline="always")
def occ(counts, bwt, c, t):
    """O[c, t]: occurrences of base c in B[0..t]; t = -1 gives 0."""
    if t < 0:
        return 0
    b = t >> ETA_SHIFT
    y = t & ETA_MASK
    mask = 0
    for j in range(ETA):
        mask |= np.int64(bwt[b, j] == c) << j
    mask &= (np.int64(2) << y) - 1
    return np.int64(counts[b, c]) + _popcount32(mask)


@njit(cache=True, nogil=True, inline="always")
def occ4(counts, bwt, t):
    """O[c, t] for all four bases at once (one bucket touch)."""
    if t < 0:
        return 0, 0, 0, 0
    b = t >> ETA_SHIFT
    y = t & ETA_MASK
    m0 = 0
    m1 = 0
    m2 = 0
    m3 = 0
    for j in range(ETA):
        v = bwt[b, j]
        m0 |= np.int64(v == 0) << j
        m1 |= np.int64(v == 1) << j
        m2 |= np.int64(v == 2) << j
        m3 |= np.int64(v == 3) << j
    keep = (np.int64(2) << y) - 1
    return (np.int64(counts[b, 0]) + _popcount32(m0 & keep),
            np.int64(counts[b, 1]) + _popcount32(m1 & keep),
            np.int64(counts[b, 2]) + _popcount32(m2 & keep),
            np.int64(counts[b, 3]) + _popcount32(m3 & keep))


class FMIndex:
    """Immutable FM-index; safe to share across threads once built."""

    eta = ETA

    def __init__(self, n_ref: int, D: np.ndarray, buckets: np.ndarray, suffix_array: np.ndarray,
                 sentinel_row: int, records: tuple[RecordSpan, ...] | None = None):
        self.n_ref = int(n_ref)
        self.D = np.ascontiguousarray(D, dtype=np.int64)
        self.buckets = buckets
        self.suffix_array = suffix_array
        self.n = int(suffix_array.shape[0])
        self.sentinel_row = int(sentinel_row)
        self.records = records or (RecordSpan("ref", 0, self.n_ref),)
        self.counts = buckets["count"]
        self.bwt_bytes = buckets["bwt"]
        self._text = None

    @classmethod
    def build(cls, concat: ConcatSequence, mem_cap: int | None = None,
              records: tuple[RecordSpan, ...] | None = None) -> "FMIndex":
        cap = mem_cap_from_env() if mem_cap is None else mem_cap
        n = concat.bases.shape[0] + 1
        if 8 * n > cap:
            raise BuildError(f"suffix array needs {8 * n} bytes, above the memory cap of {cap}")
        sa = build_suffix_array(concat.bases)
        bwt, srow = build_bwt(concat.bases, sa)
        buckets, D = build_occ_buckets(bwt)
        sa_arr = aligned_empty(n, np.int64)
        sa_arr[:] = sa
        return cls(concat.n_ref, D, buckets, sa_arr, srow, records)

    @property
    def bucket_count(self) -> int:
        return int(self.buckets.shape[0])

    def bwt(self) -> np.ndarray:
        return self.bwt_bytes.reshape(-1)[:self.n].copy()

    @property
    def text(self) -> np.ndarray:
        """The forward+revcomp text, recovered once from B and S (T[S[i]-1] = B[i])."""
        if self._text is None:
            b = self.bwt_bytes.reshape(-1)[:self.n]
            sa = self.suffix_array
            t = np.empty(self.n - 1, dtype=np.uint8)
            m = sa > 0
            t[sa[m] - 1] = b[m]
            self._text = t
        return self._text

    def get_o(self, c: int, t: int) -> int:
        if not 0 <= c <= 3:
            raise IndexError(f"base code {c} outside 0..3")
        if not -1 <= t < self.n:
            raise IndexError(f"position {t} outside [-1, {self.n})")
        return int(occ(self.counts, self.bwt_bytes, c, t))

    # -- serialization -------------------------------------------------
    def _payload_parts(self):
        header = _HEADER.pack(MAGIC, VERSION, self.n_ref, self.n, self.sentinel_row,
                              *[int(x) for x in self.D[:4]], self.bucket_count)
        return [header, self.buckets.tobytes(), self.suffix_array.astype("<u8").tobytes()]

    def serialize(self, writer: BinaryIO) -> None:
        h = xxhash.xxh64()
        for part in self._payload_parts():
            h.update(part)
            writer.write(part)
        writer.write(struct.pack("<Q", h.intdigest()))

    def to_bytes(self) -> bytes:
        import io
        buf = io.BytesIO()
        self.serialize(buf)
        return buf.getvalue()

    @classmethod
    def deserialize(cls, reader: BinaryIO, records=None) -> "FMIndex":
        h = xxhash.xxh64()

        def take(size, what):
            data = reader.read(size)
            if len(data) != size:
                if what == "magic":
                    raise BadMagicError("not a seedmap index (file too short)")
                raise TruncatedIndexError(f"index truncated while reading {what}")
            h.update(data)
            return data

        magic = take(4, "magic")
        if magic != MAGIC:
            raise BadMagicError(f"bad magic {magic!r}")
        rest = take(_HEADER.size - 4, "header")
        _, version, n_ref, n, srow, d0, d1, d2, d3, nb = _HEADER.unpack(magic + rest)
        if version != VERSION:
            raise VersionMismatchError(f"index version {version}, expected {VERSION}")
        if nb != -(-n // ETA) or n != 2 * n_ref + 1:
            raise TruncatedIndexError("inconsistent header sizes")
        raw_buckets = take(nb * OCC_DTYPE.itemsize, "buckets")
        raw_sa = take(n * 8, "suffix array")
        tail = reader.read(8)
        if len(tail) != 8:
            raise TruncatedIndexError("index truncated while reading checksum")
        (stored,) = struct.unpack("<Q", tail)
        if stored != h.intdigest():
            raise ChecksumMismatchError("index checksum mismatch")

        buckets = aligned_empty(nb, OCC_DTYPE)
        buckets[:] = np.frombuffer(raw_buckets, dtype=OCC_DTYPE)
        sa = aligned_empty(n, np.int64)
        sa[:] = np.frombuffer(raw_sa, dtype="<u8")
        D = np.zeros(6, dtype=np.int64)
        D[:4] = (d0, d1, d2, d3)
        last = buckets[nb - 1]
        tail_len = n - (nb - 1) * ETA
        count_t = int(last["count"][3]) + int((last["bwt"][:tail_len] == 3).sum())
        D[4] = D[3] + count_t
        D[5] = n - 1
        return cls(n_ref, D, buckets, sa, srow, records)

    @classmethod
    def from_bytes(cls, data: bytes, records=None) -> "FMIndex":
        import io
        return cls.deserialize(io.BytesIO(data), records)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            self.serialize(fh)
        write_records(self.records, records_path(path))

    @classmethod
    def load(cls, path) -> "FMIndex":
        rec_path = records_path(path)
        records = read_records(rec_path) if os.path.exists(rec_path) else None
        with open(path, "rb") as fh:
            return cls.deserialize(fh, records)


def records_path(index_path) -> str:
    return os.fspath(index_path) + ".rec"


def write_records(records, path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(f"{r.name}\t{r.offset}\t{r.length}\n")


def read_records(path) -> tuple[RecordSpan, ...]:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                name, off, length = line.rstrip("\n").split("\t")
                out.append(RecordSpan(name, int(off), int(length)))
    return tuple(out)


def build_index(ref, mem_cap: int | None = None) -> FMIndex:
    """Convenience: ReferenceSequence -> FMIndex over its forward+revcomp text."""
    from .refseq import build_concat
    return FMIndex.build(build_concat(ref), mem_cap=mem_cap, records=ref.records)
