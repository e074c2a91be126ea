import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jobgen import random_job, random_jobs
from oracles import full_dp_extend
from seedmap.bsw import (PREC8, PREC16, Alignment, BatchStats, BswJob, BswParams, BswResult,
                         BswWorkspace, bsw_batch, bsw_scalar, post_filter, scalar_cells,
                         select_precision, sort_jobs)
from seedmap.refseq import encode

P = BswParams()
OPEN = BswParams(w=10_000, zdrop=0)  # band and z-drop both inactive


def job(q, t, h0=5, i=0):
    return BswJob(encode(q), encode(t), h0, i)


def test_empty_query():
    r = bsw_scalar(job("", "ACGT", 7))
    assert (r.best_score, r.q_end, r.t_end) == (7, 0, 0)
    assert r.g_score == 7


def test_identical_acgt():
    r = bsw_scalar(job("ACGT", "ACGT"))
    assert (r.best_score, r.q_end, r.t_end, r.g_score, r.g_t_end) == (9, 4, 4, 9, 4)


def test_acgt_vs_acga():
    r = bsw_scalar(job("ACGT", "ACGA"))
    assert (r.best_score, r.q_end, r.t_end) == (8, 3, 3)
    assert (r.g_score, r.g_t_end) == (4, 4)


def test_zero_last_row_still_counts_as_reached():
    r = bsw_scalar(job("A", "CCCCC", 1))
    assert (r.best_score, r.g_score, r.g_t_end, r.aborted) == (1, 0, 0, False)
    r = bsw_scalar(job("AA", "CCCCC", 1))
    assert (r.g_score, r.g_t_end, r.aborted) == (-1, -1, True)


def test_examples_agree_with_full_dp():
    for q, t in (("ACGT", "ACGT"), ("ACGT", "ACGA")):
        r = bsw_scalar(job(q, t), OPEN)
        assert (r.best_score, r.q_end, r.t_end, r.g_score, r.g_t_end) == \
            full_dp_extend(encode(q), encode(t), 5, 1, 4, 6, 1)


def test_scalar_matches_unbanded_oracle(rng):
    for _ in range(400):
        m = int(rng.integers(0, 65))
        n = int(rng.integers(0, 65))
        q = rng.integers(0, 4, m, dtype=np.uint8)
        if rng.random() < 0.7 and m:
            t = q.copy()
            t[rng.random(m) < 0.15] = rng.integers(0, 4)
            t = np.concatenate([t, rng.integers(0, 4, n // 4, dtype=np.uint8)])[:64]
        else:
            t = rng.integers(0, 4, n, dtype=np.uint8)
        h0 = int(rng.integers(1, 40))
        p = BswParams(a=int(rng.integers(1, 3)), b=int(rng.integers(0, 6)),
                      g_o=int(rng.integers(0, 8)), g_e=int(rng.integers(0, 3)), w=10_000, zdrop=0)
        r = bsw_scalar(BswJob(q, t, h0), p)
        want = full_dp_extend(q, t, h0, p.a, p.b, p.g_o, p.g_e)
        assert (r.best_score, r.q_end, r.t_end, r.g_score, r.g_t_end) == want
        assert r.aborted == (want[3] < 0)


def test_band_never_widens(rng):
    for _ in range(200):
        jb = random_job(rng, max_q=200)
        m = len(jb.query)
        trace = np.full((m + 2, 3), -1, dtype=np.int64)
        bsw_scalar(jb, BswParams(w=int(rng.integers(1, 60))), trace=trace)
        rows = [i for i in range(1, m + 1) if trace[i, 0] >= 0]
        for a, b in zip(rows, rows[1:]):
            assert trace[b, 0] >= trace[a, 0]
            assert trace[b, 1] <= trace[a, 2] + 1


def test_score_bound_and_invariants(rng):
    for jb in random_jobs(rng, 500):
        r = bsw_scalar(jb, P)
        assert 0 <= r.best_score <= jb.h0 + P.a * len(jb.query) + P.end_bonus
        assert r.q_end <= len(jb.query) and r.t_end <= len(jb.target)
        if r.g_score >= 0:
            assert r.best_score >= r.g_score


def test_zdrop_aborts():
    q = encode("ACGT" * 30)
    t = np.concatenate([q[:40], encode("TTTTGGGGCCCCAAAA" * 8)])
    r = bsw_scalar(BswJob(q, t, 20), BswParams(zdrop=10))
    assert r.aborted and r.g_score == -1
    assert r.best_score == 60 and (r.q_end, r.t_end) == (40, 40)
    r2 = bsw_scalar(BswJob(q, t, 20), BswParams(zdrop=0))
    assert r2.best_score >= 60


@pytest.mark.parametrize("W", [1, 8, 16, 32, 64])
@pytest.mark.parametrize("precision", [None, 8, 16])
def test_batch_equals_scalar(W, precision):
    rng = np.random.default_rng(W * 31 + (precision or 0))
    params = BswParams(w=int(rng.integers(5, 120)), zdrop=int(rng.choice([0, 30, 100])))
    jobs = random_jobs(rng, 700, w=params.w)
    got = bsw_batch(jobs, params, lane_width=W, precision=precision)
    assert got == [bsw_scalar(j, params) for j in jobs]


def test_single_job_and_shuffled_ids(rng):
    jobs = random_jobs(rng, 60)
    perm = rng.permutation(60)
    shuffled = [BswJob(jobs[k].query, jobs[k].target, jobs[k].h0, int(i))
                for i, k in enumerate(perm)]
    back = bsw_batch(shuffled[::-1], P, lane_width=16)
    assert back == [bsw_scalar(j) for j in shuffled]
    one = jobs[0]
    assert bsw_batch([one], P, lane_width=1) == [bsw_scalar(one)]
    with pytest.raises(ValueError):
        bsw_batch([], P)


def test_aborting_lane_among_others(rng):
    q = encode("ACGT" * 30)
    bad = BswJob(q, np.concatenate([q[:30], encode("TTGGCCAA" * 14)]), 20, 0)
    good = [BswJob(q, q.copy(), 20, i + 1) for i in range(15)]
    params = BswParams(zdrop=10)
    res = bsw_batch([bad] + good, params, lane_width=16)
    assert res[0] == bsw_scalar(bad, params) and res[0].aborted
    assert all(r == bsw_scalar(g, params) and not r.aborted for r, g in zip(res[1:], good))


def test_forced_8bit_saturates_then_matches():
    q = np.random.default_rng(3).integers(0, 4, 280, dtype=np.uint8)
    jb = BswJob(q, q.copy(), 25, 0)
    want = bsw_scalar(jb)
    assert want.best_score == 305
    stats = BatchStats()
    assert bsw_batch([jb], P, lane_width=8, precision=8, stats=stats) == [want]
    assert stats.escalated == 1


def test_sort_jobs():
    eq = [job("ACG", "ACG", i=i) for i in range(4)]
    assert sort_jobs(eq) == [0, 1, 2, 3]
    mixed = [job("A" * 5, "A"), job("A" * 3, "A"), job("A" * 9, "A")]
    assert [len(mixed[k].query) for k in sort_jobs(mixed)] == [3, 5, 9]
    assert sort_jobs([]) == []


def test_sorting_does_not_change_results(rng):
    jobs = random_jobs(rng, 200)
    by_len = [jobs[k] for k in sort_jobs(jobs)]
    renum = [BswJob(j.query, j.target, j.h0, i) for i, j in enumerate(by_len)]
    a = bsw_batch(renum, P, lane_width=16)
    assert a == [bsw_scalar(jobs[k]) for k in sort_jobs(jobs)]


def test_select_precision():
    assert select_precision(BswJob(np.zeros(50, np.uint8), np.zeros(1, np.uint8), 30)) == PREC8
    assert select_precision(BswJob(np.zeros(400, np.uint8), np.zeros(1, np.uint8), 100)) == PREC16
    edge = BswJob(np.zeros(249, np.uint8), np.zeros(1, np.uint8), 0)
    assert select_precision(edge) == PREC8
    assert select_precision(BswJob(edge.query, edge.target, 1)) == PREC16


def test_useful_ratio_reported(rng):
    stats = BatchStats()
    jobs = random_jobs(rng, 300)
    bsw_batch(jobs, P, lane_width=16, stats=stats, workspace=BswWorkspace())
    assert 0 < stats.useful <= stats.cells
    assert stats.useful == sum(scalar_cells(j) for j in jobs)
    assert 0 < stats.useful_ratio <= 1


def test_post_filter_examples():
    a = Alignment(50, False, 0, 100, 1000, 1100)
    b = Alignment(40, False, 0, 100, 1000, 1100)
    assert post_filter(None, [b, a]) == [a]
    c = Alignment(40, False, 0, 100, 5000, 5100)
    assert post_filter(None, [a, c]) == [a, c]
    d = Alignment(45, True, 0, 100, 1000, 1100)  # other strand is never contained
    assert post_filter(None, [a, d]) == [a, d]
    assert post_filter(None, []) == []


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 60), st.booleans(), st.integers(0, 50),
                          st.integers(1, 60), st.integers(0, 200), st.integers(1, 80)),
                min_size=1, max_size=12), st.randoms())
def test_post_filter_order_invariant(raw, rnd):
    als = [Alignment(s, rv, qb, qb + ql, rb, rb + rl) for s, rv, qb, ql, rb, rl in raw]
    kept = post_filter(None, als)
    shuffled = list(als)
    rnd.shuffle(shuffled)
    assert post_filter(None, shuffled) == kept
    for k in kept:
        for o in kept:
            if o is not k and o.is_reverse == k.is_reverse:
                contained = o.q_begin <= k.q_begin and k.q_end <= o.q_end and \
                    o.r_begin <= k.r_begin and k.r_end <= o.r_end
                assert not (contained and (o.score, -o.r_begin) > (k.score, -k.r_begin))


def test_params_validate():
    with pytest.raises(ValueError):
        BswParams(a=0)
    with pytest.raises(ValueError):
        BswParams(b=-1)
    with pytest.raises(ValueError):
        BswParams(w=0)
    assert P.mismatch == -4
    assert BswResult.from_row([1, 2, 3, 4, 5, 6, 0]).aborted is False
