import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_smems, concat_str, count_occurrences, revcomp_str, sa_rows_with_prefix
from seedmap.fmindex import build_index
from seedmap.refseq import ReferenceSequence, decode, encode
from seedmap.smem import (BiInterval, SmemParams, all_smems, backward_ext, backward_ext_all,
                          forward_ext, initial_interval, interval_of, prefetch_hint, smem_at)

ANY = SmemParams(min_seed_len=1)


def index_of(text):
    return build_index(ReferenceSequence("r", encode(text)))


def brute_interval(concat, pattern):
    rows = sa_rows_with_prefix(concat, pattern)
    rc = sa_rows_with_prefix(concat, revcomp_str(pattern))
    return (rows[0] if rows else None, rc[0] if rc else None, len(rows))


def as_set(smems):
    return {(m.q_begin, m.q_end, m.interval.s) for m in smems}


def mutate(rng, s, rate, alphabet="ACGT"):
    out = list(s)
    for i in range(len(out)):
        if rng.random() < rate:
            out[i] = alphabet[int(rng.integers(0, len(alphabet)))]
    return "".join(out)


def test_c_extended_by_a_is_ac():
    text = "ATACGAC"
    idx = index_of(text)
    concat = concat_str(text)
    ac = backward_ext(idx, interval_of(idx, encode("C")), 0)
    assert ac == interval_of(idx, encode("AC"))
    k, l, s = brute_interval(concat, "AC")
    assert (ac.k, ac.l, ac.s) == (k, l, s)


def test_dead_extension(rng):
    idx = index_of("AAAAAAAA")
    iv = interval_of(idx, encode("A"))
    assert backward_ext(idx, iv, 1).s == 0  # concat is A^8 T^8: nothing precedes A but A
    assert backward_ext(idx, interval_of(idx, encode("T")), 1).s == 0


def test_backward_forward_random(rng):
    for _ in range(200):
        n = int(rng.integers(5, 60))
        text = decode(rng.integers(0, 4, n, dtype=np.uint8))
        idx = index_of(text)
        concat = concat_str(text)
        i = int(rng.integers(0, len(concat) - 1))
        X = concat[i:i + int(rng.integers(1, 6))]
        b = int(rng.integers(0, 4))
        iv = interval_of(idx, encode(X))
        assert (iv.k, iv.l, iv.s) == brute_interval(concat, X)
        bx = backward_ext(idx, iv, b)
        xb = forward_ext(idx, iv, b)
        for got, pat in ((bx, "ACGT"[b] + X), (xb, X + "ACGT"[b])):
            s = count_occurrences(concat, pat)
            assert got.s == s
            if s:
                assert (got.k, got.l) == brute_interval(concat, pat)[:2]
        # reverse complement swaps k and l
        rc = interval_of(idx, encode(revcomp_str(X)))
        assert (rc.k, rc.l, rc.s) == (iv.l, iv.k, iv.s)


def test_forward_ext_keeps_size_iff_always_followed():
    text = "GACGTTGACGAAGACG"
    concat = concat_str(text)
    idx = index_of(text)
    iv = interval_of(idx, encode("GAC"))
    assert count_occurrences(concat, "GAC") == count_occurrences(concat, "GACG") == iv.s
    assert forward_ext(idx, iv, 2).s == iv.s
    for b in (0, 1, 3):
        assert forward_ext(idx, iv, b).s == 0 < iv.s


def test_initial_and_all_four():
    idx = index_of("ACGTACGGA")
    for c in range(4):
        assert initial_interval(idx, c) == interval_of(idx, encode("ACGT"[c]))
    quad = backward_ext_all(idx, interval_of(idx, encode("G")))
    assert [q.s for q in quad] == [count_occurrences(concat_str("ACGTACGGA"), b + "G")
                                   for b in "ACGT"]


def test_unique_read_gives_single_full_smem(rng):
    text = decode(rng.integers(0, 4, 3000, dtype=np.uint8))
    idx = index_of(text)
    read = text[1000:1100]
    for i0 in (0, 37, 99):
        got = smem_at(idx, encode(read), i0)
        assert [(m.q_begin, m.q_end) for m in got] == [(0, 100)]
        assert got[0].interval.s >= 1
    assert [(m.q_begin, m.q_end) for m in all_smems(idx, encode(read))] == [(0, 100)]


def test_short_read_and_all_n(small_index):
    assert all_smems(small_index, encode("ACGTACGTAC")) == []
    assert all_smems(small_index, encode("N" * 50), ANY) == []
    with pytest.raises(ValueError):
        smem_at(small_index, encode("NAC"), 0)
    with pytest.raises(ValueError):
        smem_at(small_index, encode("AC"), 5)


def test_split_by_n(rng):
    text = decode(rng.integers(0, 4, 5000, dtype=np.uint8))
    idx = index_of(text)
    read = text[100:160] + "N" + text[3000:3060]
    got = [(m.q_begin, m.q_end) for m in all_smems(idx, encode(read))]
    assert (0, 60) in got and (61, 121) in got


def test_smem_at_matches_oracle_overlap(rng):
    for _ in range(150):
        text = decode(rng.integers(0, 4, int(rng.integers(50, 800)), dtype=np.uint8))
        idx = index_of(text)
        concat = concat_str(text)
        p = int(rng.integers(0, len(text) - 20))
        read = mutate(rng, text[p:p + int(rng.integers(20, 80))], 0.05, "ACGTN")
        q = encode(read)
        oracle = brute_smems(concat, read)
        for i0 in range(len(read)):
            if q[i0] > 3:
                continue
            want = {m for m in oracle if m[0] <= i0 < m[1]}
            assert as_set(smem_at(idx, q, i0, ANY)) == want


@settings(max_examples=150, deadline=None)
@given(st.text(alphabet="ACGT", min_size=10, max_size=400), st.data())
def test_all_smems_equals_oracle(text, data):
    idx = index_of(text)
    concat = concat_str(text)
    a = data.draw(st.integers(0, len(text) - 1))
    piece = text[a:a + data.draw(st.integers(1, 151))]
    noise = data.draw(st.lists(st.tuples(st.integers(0, 150), st.sampled_from("ACGTN")),
                               max_size=6))
    read = list(piece)
    for pos, ch in noise:
        if pos < len(read):
            read[pos] = ch
    read = "".join(read)
    got = all_smems(idx, encode(read), ANY)
    assert as_set(got) == brute_smems(concat, read)
    spans = [(m.q_begin, m.q_end) for m in got]
    assert len(set(spans)) == len(spans)
    for x in spans:
        for y in spans:
            assert x == y or not (y[0] <= x[0] and x[1] <= y[1])


def test_prefetch_is_semantic_noop(small_index, small_ref, rng):
    text = decode(small_ref.bases)
    before = small_index.to_bytes()
    for row in (0, 1, small_index.n - 1, -5, small_index.n + 3):
        prefetch_hint(small_index, row)
    assert small_index.to_bytes() == before
    for _ in range(50):
        p = int(rng.integers(0, len(text) - 150))
        q = encode(mutate(rng, text[p:p + 150], 0.03))
        assert all_smems(small_index, q, prefetch=True) == all_smems(small_index, q, prefetch=False)


def test_params_validate():
    with pytest.raises(ValueError):
        SmemParams(min_seed_len=0)
    with pytest.raises(ValueError):
        SmemParams(max_occ=0)
    assert SmemParams() == SmemParams(19, 500, 1)
    assert BiInterval(1, 2, 3).s == 3
