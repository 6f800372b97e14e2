"""Compiled deferred-acceptance loop for the stable allocation.

Preferences, all on exact integer squared torus distances:
  cell -> points : (d2, point index)
  point -> cells : (d2, tb), tb = the cell's offset from the point's own cell
                   encoded as an integer, which is shift-invariant.

Each point keeps its current holdings in a max-heap keyed by (d2, tb).

Each cell caches a short run of its next choices. The bucketed search
refills that run and, while doing so, skips points that are full and hold
only cells strictly nearer than this one: a point's worst holding only ever
improves, so such a point would reject the cell now and forever. Skipping
them changes the number of proposals but not the resulting allocation.
"""

import numpy as np
from numba import njit

CACHE = 16
FIRST_RUN = 4


@njit(cache=True, inline="always")
def _axis_delta(a, b, P):
    t = a - b
    if t < 0:
        t = -t
    if P - t < t:
        t = P - t
    return t


@njit(cache=True)
def _center(cell, side, d, T, out):
    rem = cell
    for k in range(d - 1, -1, -1):
        out[k] = (2 * (rem % side) + 1) * T
        rem //= side


@njit(cache=True, inline="always")
def _tiebreak(cell, p, pcell, side, d):
    rem = cell
    tb = 0
    mult = 1
    for k in range(d - 1, -1, -1):
        i = rem % side
        rem //= side
        tb += ((i - pcell[p, k]) % side) * mult
        mult *= side
    return tb


@njit(cache=True, inline="always")
def _dist2(q, pts, p, d, P):
    d2 = 0
    for k in range(d):
        t = _axis_delta(q[k], pts[p, k], P)
        d2 += t * t
    return d2


@njit(cache=True, inline="always")
def _greater(a_d2, a_tb, b_d2, b_tb):
    return a_d2 > b_d2 or (a_d2 == b_d2 and a_tb > b_tb)


@njit(cache=True, inline="always")
def _insert_top(p, d2, out_p, out_d2, count):
    """Insert (d2, p) into the sorted list out[:count], keeping at most len(out) entries."""
    K = out_p.shape[0]
    if count == K and (d2 > out_d2[K - 1] or (d2 == out_d2[K - 1] and p > out_p[K - 1])):
        return count
    i = count if count < K else K - 1
    while i > 0 and (out_d2[i - 1] > d2 or (out_d2[i - 1] == d2 and out_p[i - 1] > p)):
        out_d2[i] = out_d2[i - 1]
        out_p[i] = out_p[i - 1]
        i -= 1
    out_d2[i] = d2
    out_p[i] = p
    return count + 1 if count < K else count


@njit(cache=True, inline="always")
def _hopeless(p, d2, quotas, hsize, hstart, hd2):
    """Point p is full and every cell it holds is strictly nearer than d2.

    Exact distance ties are left to the heap to settle.
    """
    return hsize[p] == quotas[p] and d2 > hd2[hstart[p]]


@njit(cache=True, inline="always")
def _scan_bucket(b, q, pts, d, P, last_d2, last_p, bstart, bpts, buf_p, buf_d2, nbuf, prune,
                 quotas, hsize, hstart, hd2):
    """Append the bucket's points that come after (last_d2, last_p) to the buffer."""
    for j in range(bstart[b], bstart[b + 1]):
        p = bpts[j]
        d2 = _dist2(q, pts, p, d, P)
        if d2 < last_d2 or (d2 == last_d2 and p <= last_p):
            continue
        if prune and _hopeless(p, d2, quotas, hsize, hstart, hd2):
            continue
        buf_p[nbuf] = p
        buf_d2[nbuf] = d2
        nbuf += 1
    return nbuf


@njit(cache=True)
def _fill_candidates(q, pts, d, P, last_d2, last_p, B, bstart, bpts, use_buckets, out_p, out_d2,
                     buf_p, buf_d2, quotas, hsize, hstart, hd2):
    """Next points after (last_d2, last_p) in cell preference order, up to len(out_p).

    Buckets are visited in shells of growing Chebyshev radius r. After shell
    r every unseen point is at least r bucket widths away, so the buffered
    points strictly nearer than that are certain; the search stops once
    enough are certain and returns the nearest of them, sorted. Once a shell
    would wrap around the torus the search falls back to a full scan, which
    certifies everything. Returns the number of entries written (0 only when
    no point remains).
    """
    n = pts.shape[0]
    # pruning pays off only for cells that have worked through their first run
    prune = use_buckets and last_p >= 0
    # a first fill wants a short run; a refill (the cell is deep in its list) settles for one viable point
    need = FIRST_RUN if last_p < 0 else 1
    nbuf = 0
    if use_buckets and B >= 3:
        bq0 = q[0] * B // P
        bq1 = q[1] * B // P if d > 1 else 0
        bq2 = q[2] * B // P if d > 2 else 0
        r = 0
        while 2 * r + 1 <= B:
            # enumerate only the surface of the (2r+1)^d block of buckets
            for o0 in range(-r, r + 1):
                edge0 = o0 == r or o0 == -r
                b0 = (bq0 + o0) % B
                if d == 1:
                    if edge0:
                        nbuf = _scan_bucket(b0, q, pts, d, P, last_d2, last_p, bstart, bpts, buf_p, buf_d2,
                                            nbuf, prune, quotas, hsize, hstart, hd2)
                    continue
                for o1 in range(-r, r + 1):
                    edge1 = edge0 or o1 == r or o1 == -r
                    b1 = b0 * B + (bq1 + o1) % B
                    if d == 2:
                        if edge1:
                            nbuf = _scan_bucket(b1, q, pts, d, P, last_d2, last_p, bstart, bpts, buf_p, buf_d2,
                                                nbuf, prune, quotas, hsize, hstart, hd2)
                        continue
                    step = 1 if edge1 or r == 0 else 2 * r
                    for o2 in range(-r, r + 1, step):
                        b2 = b1 * B + (bq2 + o2) % B
                        nbuf = _scan_bucket(b2, q, pts, d, P, last_d2, last_p, bstart, bpts, buf_p, buf_d2,
                                            nbuf, prune, quotas, hsize, hstart, hd2)
            lb2 = (r * P // B) ** 2
            certain = 0
            for i in range(nbuf):
                if buf_d2[i] < lb2:
                    certain += 1
            if certain >= need:
                count = 0
                for i in range(nbuf):
                    if buf_d2[i] < lb2:
                        count = _insert_top(buf_p[i], buf_d2[i], out_p, out_d2, count)
                return count
            r += 1
        nbuf = 0
    count = 0
    for p in range(n):
        d2 = _dist2(q, pts, p, d, P)
        if d2 < last_d2 or (d2 == last_d2 and p <= last_p):
            continue
        if prune and _hopeless(p, d2, quotas, hsize, hstart, hd2):
            continue
        count = _insert_top(p, d2, out_p, out_d2, count)
    return count


@njit(cache=True, inline="always")
def _swap(hd2, htb, hcell, i, j):
    hd2[i], hd2[j] = hd2[j], hd2[i]
    htb[i], htb[j] = htb[j], htb[i]
    hcell[i], hcell[j] = hcell[j], hcell[i]


@njit(cache=True)
def _sift_up(hd2, htb, hcell, base, i):
    while i > 0:
        parent = (i - 1) // 2
        if not _greater(hd2[base + i], htb[base + i], hd2[base + parent], htb[base + parent]):
            return
        _swap(hd2, htb, hcell, base + i, base + parent)
        i = parent


@njit(cache=True)
def _sift_down(hd2, htb, hcell, base, size):
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            return
        big = left
        right = left + 1
        if right < size and _greater(hd2[base + right], htb[base + right], hd2[base + left], htb[base + left]):
            big = right
        if not _greater(hd2[base + big], htb[base + big], hd2[base + i], htb[base + i]):
            return
        _swap(hd2, htb, hcell, base + i, base + big)
        i = big


@njit(cache=True, nogil=True)
def deferred_acceptance(pts, pcell, side, T, P, quotas, B, bstart, bpts, use_buckets, sequential):
    """Return (assignment per cell, rounds, proposals)."""
    n, d = pts.shape
    M = side**d
    hstart = np.zeros(n + 1, dtype=np.int64)
    for p in range(n):
        hstart[p + 1] = hstart[p] + quotas[p]
    hsize = np.zeros(n, dtype=np.int64)
    hd2 = np.zeros(M, dtype=np.int64)
    htb = np.zeros(M, dtype=np.int64)
    hcell = np.zeros(M, dtype=np.int64)
    last_d2 = np.full(M, -1, dtype=np.int64)
    last_p = np.full(M, -1, dtype=np.int64)
    q = np.zeros(3, dtype=np.int64)
    # the exhaustive variant looks up one choice at a time with no pruning
    K = CACHE if use_buckets else 1
    cand_p = np.empty((M, K), dtype=np.int32)
    cand_len = np.zeros(M, dtype=np.int32)
    cand_pos = np.zeros(M, dtype=np.int32)
    scratch_p = np.empty(K, dtype=np.int64)
    scratch_d2 = np.empty(K, dtype=np.int64)
    buf_p = np.empty(n, dtype=np.int64)
    buf_d2 = np.empty(n, dtype=np.int64)

    free = np.empty(M, dtype=np.int64)
    nxt = np.empty(M, dtype=np.int64)
    if sequential:
        for i in range(M):
            free[i] = M - 1 - i
    else:
        for i in range(M):
            free[i] = i
    nfree = M
    rounds = 0
    proposals = 0

    while nfree > 0:
        rounds += 1
        nnext = 0
        idx = 0
        while idx < nfree:
            if sequential:
                nfree -= 1
                c = free[nfree]
            else:
                c = free[idx]
                idx += 1
            _center(c, side, d, T, q)
            if cand_pos[c] == cand_len[c]:
                cnt = _fill_candidates(q, pts, d, P, last_d2[c], last_p[c], B, bstart, bpts, use_buckets,
                                       scratch_p, scratch_d2, buf_p, buf_d2, quotas, hsize, hstart, hd2)
                if cnt == 0:
                    raise RuntimeError("a cell was rejected by every point")
                for j in range(cnt):
                    cand_p[c, j] = scratch_p[j]
                cand_len[c] = cnt
                cand_pos[c] = 0
            p = np.int64(cand_p[c, cand_pos[c]])
            cand_pos[c] += 1
            d2 = _dist2(q, pts, p, d, P)
            last_d2[c] = d2
            last_p[c] = p
            proposals += 1
            tb = _tiebreak(c, p, pcell, side, d)
            base = hstart[p]
            size = hsize[p]
            rejected = -1
            if size < quotas[p]:
                hd2[base + size] = d2
                htb[base + size] = tb
                hcell[base + size] = c
                hsize[p] = size + 1
                _sift_up(hd2, htb, hcell, base, size)
            elif _greater(hd2[base], htb[base], d2, tb):
                rejected = hcell[base]
                hd2[base] = d2
                htb[base] = tb
                hcell[base] = c
                _sift_down(hd2, htb, hcell, base, size)
            else:
                rejected = c
            if rejected >= 0:
                if sequential:
                    free[nfree] = rejected
                    nfree += 1
                else:
                    nxt[nnext] = rejected
                    nnext += 1
        if not sequential:
            tmp = free
            free = nxt
            nxt = tmp
            nfree = nnext

    assign = np.full(M, -1, dtype=np.int64)
    for p in range(n):
        for j in range(hstart[p], hstart[p] + hsize[p]):
            assign[hcell[j]] = p
    return assign, rounds, proposals
