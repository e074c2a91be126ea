"""Brute-force reference implementations used only by the tests.

Everything here works on plain Python strings so it shares no code path with
the package kernels.
"""

from __future__ import annotations


LETTERS = "ACGTN"
COMP = {"A": "T", "C": "G", "G": "C", "T": "A", "N": "N"}


def to_str(codes) -> str:
    return "".join(LETTERS[int(c)] for c in codes)


def revcomp_str(s: str) -> str:
    return "".join(COMP[ch] for ch in reversed(s))


def concat_str(ref: str) -> str:
    return ref + revcomp_str(ref)


def _suffix_key(text: str):
    # '$' must sort before every base: map to chr(0)
    t = text + "\x00"
    order = {ch: i for i, ch in enumerate("\x00ACGTN")}
    return t, order


def naive_suffix_array(text: str) -> list[int]:
    t, order = _suffix_key(text)
    enc = [order[ch] for ch in t]
    return sorted(range(len(t)), key=lambda i: enc[i:])


def naive_bwt(text: str) -> tuple[str, int]:
    sa = naive_suffix_array(text)
    t = text + "$"
    bwt = "".join(t[i - 1] if i > 0 else "$" for i in sa)
    return bwt, bwt.index("$")


def inverse_bwt(bwt: str) -> str:
    """Standard LF walk starting from the row of the full text (whose last char is '$')."""
    rank_order = {ch: i for i, ch in enumerate("$ACGTN")}
    counts = {}
    occ_before = []
    for ch in bwt:
        occ_before.append(counts.get(ch, 0))
        counts[ch] = counts.get(ch, 0) + 1
    first = {}
    total = 0
    for ch in sorted(counts, key=rank_order.get):
        first[ch] = total
        total += counts[ch]
    out = []
    row = 0  # row 0 is '$...' whose bwt char is the last text char
    for _ in range(len(bwt) - 1):
        ch = bwt[row]
        out.append(ch)
        row = first[ch] + occ_before[row]
    return "".join(reversed(out))


def naive_occ(bwt_codes, c: int, t: int) -> int:
    return sum(1 for x in bwt_codes[:t + 1] if x == c)


def sa_rows_with_prefix(text: str, pattern: str) -> list[int]:
    sa = naive_suffix_array(text)
    t = text + "\x00"
    return [r for r, p in enumerate(sa) if t.startswith(pattern, p)]


def count_occurrences(text: str, pattern: str) -> int:
    """Overlapping occurrences, by repeated find."""
    n = 0
    i = text.find(pattern)
    while i >= 0:
        n += 1
        i = text.find(pattern, i + 1)
    return n


def brute_smems(concat: str, read: str, min_len: int = 1) -> set[tuple[int, int, int]]:
    """All SMEMs of ``read`` against ``concat`` as (q_begin, q_end, occurrences).

    R(i) is the furthest end such that read[i:R(i)] occurs; it never decreases
    with i, so a two-pointer sweep finds it.  [i, R(i)) is an SMEM exactly when
    R(i) > i and R(i) > R(i-1).  Read N never matches (it maps to '#').
    """
    q = read.replace("N", "#")
    m = len(q)
    out = set()
    r_prev = 0
    r = 0
    for i in range(m):
        r = max(r, i)
        while r < m and q[i:r + 1] in concat:
            r += 1
        if r > i and (i == 0 or r > r_prev):
            if r - i >= min_len:
                out.add((i, r, count_occurrences(concat, q[i:r])))
        r_prev = r
    return out


def full_dp_extend(query, target, h0, a, b, go, ge):
    """Unbanded extension DP with no abort heuristics, in plain Python.

    Same recurrence as the kernel: gap of length k costs go + k*ge, gaps open
    from H, the boundary row/column only feeds the diagonal, and a diagonal
    step out of a zero cell yields zero.  An all-zero row above the
    last ends the extension with no global score.  Returns
    (best, q_end, t_end, g_score, g_t_end).
    """
    m, n = len(query), len(target)
    oe = go + ge
    H = [[0] * (n + 1) for _ in range(m + 1)]
    E = [[0] * (n + 1) for _ in range(m + 1)]
    F = [[0] * (n + 1) for _ in range(m + 1)]
    H[0][0] = h0
    for j in range(1, n + 1):
        H[0][j] = max(0, h0 - go - ge * j)
    for i in range(1, m + 1):
        H[i][0] = max(0, h0 - go - ge * i)
    best, bi, bj = h0, 0, 0
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            if i >= 2:
                E[i][j] = max(H[i - 1][j] - oe, E[i - 1][j] - ge, 0)
            if j >= 2:
                F[i][j] = max(H[i][j - 1] - oe, F[i][j - 1] - ge, 0)
            d = H[i - 1][j - 1]
            if d > 0:
                hit = query[i - 1] == target[j - 1] and query[i - 1] < 4
                mval = max(d + (a if hit else -b), 0)
            else:
                mval = 0
            H[i][j] = max(mval, E[i][j], F[i][j])
            if H[i][j] > best:
                best, bi, bj = H[i][j], i, j
        if i < m and max(H[i]) == 0:
            # a dead row: nothing below it can score, and the last row is never reached
            return best, bi, bj, -1, -1
    if m == 0:
        return best, 0, 0, h0, 0
    g, gj = H[m][0], 0
    for j in range(1, n + 1):
        if H[m][j] > g:
            g, gj = H[m][j], j
    return best, bi, bj, g, gj
