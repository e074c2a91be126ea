"""Synthetic references and reads with known origins, for tests and benchmarks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .refseq import ReadRecord, RecordSpan, ReferenceSequence, revcomp


@dataclass(frozen=True)
class Truth:
    record: int
    pos: int  # 0-based forward start of the sampled window
    is_reverse: bool
    n_subs: int
    n_indels: int


def random_reference(n: int, n_records: int = 1, seed: int = 0,
                     repeat_frac: float = 0.0) -> ReferenceSequence:
    """Uniform random bases; ``repeat_frac`` of the text is made of copied segments."""
    rng = np.random.default_rng(seed)
    bases = rng.integers(0, 4, n, dtype=np.uint8)
    if repeat_frac > 0:
        seg = 300
        for _ in range(int(repeat_frac * n / seg)):
            src = int(rng.integers(0, n - seg))
            dst = int(rng.integers(0, n - seg))
            bases[dst:dst + seg] = bases[src:src + seg]
            # a few differences per copy keep repeats from being exact
            flips = rng.integers(0, seg, 3)
            bases[dst + flips] = (bases[dst + flips] + 1) % 4
    cuts = np.linspace(0, n, n_records + 1).astype(int)
    recs = tuple(RecordSpan(f"chr{i + 1}", int(cuts[i]), int(cuts[i + 1] - cuts[i]))
                 for i in range(n_records))
    return ReferenceSequence("synthetic", bases, recs)


def _mutate(seq, rng, sub_rate, indel_rate):
    out = []
    subs = 0
    indels = 0
    i = 0
    while i < len(seq):
        u = rng.random()
        if u < indel_rate / 2:
            indels += 1
            i += 1
            continue
        if u < indel_rate:
            out.append(int(rng.integers(0, 4)))
            indels += 1
        b = int(seq[i])
        if rng.random() < sub_rate:
            b = (b + int(rng.integers(1, 4))) % 4
            subs += 1
        out.append(b)
        i += 1
    return np.asarray(out, dtype=np.uint8), subs, indels


def simulate_reads(ref: ReferenceSequence, n: int, length: int = 150, seed: int = 1,
                   sub_rate: float = 0.01, indel_rate: float = 0.0):
    """``n`` reads sampled from both strands; returns (reads, truths).

    A read is the window [pos, pos+length) of one record, reverse-complemented
    for reverse reads, then mutated.  Indels shift the read length.
    """
    rng = np.random.default_rng(seed)
    long_recs = [i for i, r in enumerate(ref.records) if r.length >= length]
    if not long_recs:
        raise ValueError("no record is as long as the reads")
    reads, truths = [], []
    for k in range(n):
        ri = long_recs[int(rng.integers(0, len(long_recs)))]
        rec = ref.records[ri]
        pos = int(rng.integers(0, rec.length - length + 1))
        win = ref.bases[rec.offset + pos:rec.offset + pos + length]
        rev = bool(rng.integers(0, 2))
        if rev:
            win = revcomp(win)
        bases, subs, indels = _mutate(win, rng, sub_rate, indel_rate)
        reads.append(ReadRecord(f"r{k}", bases, None, k))
        truths.append(Truth(ri, pos, rev, subs, indels))
    return reads, truths


def implied_origin(hit, read_len: int) -> int:
    """Forward start of the read's window implied by one alignment, ignoring indels."""
    if hit.is_reverse:
        return hit.ref_pos - (read_len - hit.q_end)
    return hit.ref_pos - hit.q_begin
