# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled block-tree simulation kernel; the twin of ``_kernel_py``."""

import numpy as np

from ._kernel_py import LedgerError, N_TALLY, n_occupancy_codes

cdef enum:
    EV_MP = 0
    EV_PUBLIC = 1
    EV_PRIVATE = 2
    T_MP_REG = 0
    T_H_REG = 1
    T_STALE = 2
    T_UNCLES = 3
    T_UNCLE8_MP = 4
    T_UNCLE8_H = 5
    T_NEPHEWS = 6
    T_UNCLES_MP = 7
    MAX_UNCLE_DISTANCE = 6


cdef struct Tree:
    int* parent
    int* height
    signed char* miner
    signed char* published
    int* ref1
    int* ref2
    int* first_child
    int* next_sibling
    long long* tallies
    long long batch_size
    long long nbatch
    int ntally
    int bad


cdef inline long long batch_of(Tree* t, long long b) nogil:
    cdef long long k = (b - 1) // t.batch_size
    if k >= t.nbatch:
        k = t.nbatch - 1
    return k


cdef inline void regular(Tree* t, int b) nogil:
    cdef long long k = batch_of(t, b)
    cdef long long* row = t.tallies + k * t.ntally
    cdef int u, d, j
    if t.miner[b]:
        row[T_MP_REG] += 1
        return
    row[T_H_REG] += 1
    for j in range(2):
        u = t.ref1[b] if j == 0 else t.ref2[b]
        if u < 0:
            continue
        d = t.height[b] - t.height[u]
        if d < 1 or d > MAX_UNCLE_DISTANCE:
            t.bad = 1
            return
        row[T_UNCLES] += 1
        row[T_NEPHEWS] += 1
        if t.miner[u]:
            row[T_UNCLES_MP] += 1
            row[T_UNCLE8_MP] += d
        else:
            row[T_UNCLE8_H] += d


cdef inline void stale(Tree* t, int b) nogil:
    t.tallies[batch_of(t, b) * t.ntally + T_STALE] += 1


cdef inline void new_block(Tree* t, int b, int par, int who) nogil:
    t.parent[b] = par
    t.height[b] = t.height[par] + 1
    t.miner[b] = who
    t.next_sibling[b] = t.first_child[par]
    t.first_child[par] = b


cdef void pick_uncles(Tree* t, int b) nogil:
    cdef int anc[MAX_UNCLE_DISTANCE + 1]
    cdef int nanc = 0
    cdef int x = t.parent[b]
    cdef int d, grand, on_chain, c, got, i, seen
    while x >= 0 and nanc < MAX_UNCLE_DISTANCE + 1:
        anc[nanc] = x
        nanc += 1
        x = t.parent[x]
    got = 0
    d = MAX_UNCLE_DISTANCE
    while d >= 1:
        if d < nanc:
            grand = anc[d]
            on_chain = anc[d - 1]
            c = t.first_child[grand]
            while c >= 0 and got < 2:
                if c != on_chain and t.published[c] and c != t.ref1[b]:
                    seen = 0
                    for i in range(d - 1):
                        if t.ref1[anc[i]] == c or t.ref2[anc[i]] == c:
                            seen = 1
                            break
                    if not seen:
                        if got == 0:
                            t.ref1[b] = c
                        else:
                            t.ref2[b] = c
                        got += 1
                c = t.next_sibling[c]
            if got == 2:
                break
        d -= 1


def run_kernel(const signed char[::1] events, const long long[::1] flags, int honest, int strict,
               int settle, long long batch_size, long long nbatch, int occ_cap):
    cdef int s0l = flags[0], s0e = flags[1], s0t = flags[2]
    cdef int sl = flags[3], se = flags[4], st = flags[5]
    cdef Py_ssize_t nev = events.shape[0]
    cdef Py_ssize_t nblk = nev + 1
    cdef Py_ssize_t i
    cdef int b, ev, a, h, d, npub, fork, race, code, lead, par, x, j
    cdef long long k

    parent_a = np.full(nblk, -1, dtype=np.int32)
    height_a = np.zeros(nblk, dtype=np.int32)
    miner_a = np.zeros(nblk, dtype=np.int8)
    published_a = np.zeros(nblk, dtype=np.int8)
    ref1_a = np.full(nblk, -1, dtype=np.int32)
    ref2_a = np.full(nblk, -1, dtype=np.int32)
    first_child_a = np.full(nblk, -1, dtype=np.int32)
    next_sibling_a = np.full(nblk, -1, dtype=np.int32)
    pub_a = np.zeros(nblk, dtype=np.int32)
    priv_a = np.zeros(nblk, dtype=np.int32)
    tallies_a = np.zeros((nbatch, N_TALLY), dtype=np.int64)
    occ_a = np.zeros((nbatch, n_occupancy_codes(occ_cap)), dtype=np.int64)

    cdef int[::1] parent = parent_a
    cdef int[::1] height = height_a
    cdef signed char[::1] miner = miner_a
    cdef signed char[::1] published = published_a
    cdef int[::1] ref1 = ref1_a
    cdef int[::1] ref2 = ref2_a
    cdef int[::1] first_child = first_child_a
    cdef int[::1] next_sibling = next_sibling_a
    cdef int[::1] pub = pub_a
    cdef int[::1] priv = priv_a
    cdef long long[:, ::1] tallies = tallies_a
    cdef long long[:, ::1] occ = occ_a
    cdef int p0 = 0  # start of the pool branch inside ``priv``

    cdef Tree t
    t.parent = &parent[0]
    t.height = &height[0]
    t.miner = &miner[0]
    t.published = &published[0]
    t.ref1 = &ref1[0]
    t.ref2 = &ref2[0]
    t.first_child = &first_child[0]
    t.next_sibling = &next_sibling[0]
    t.tallies = &tallies[0, 0]
    t.batch_size = batch_size
    t.nbatch = nbatch
    t.ntally = N_TALLY
    t.bad = 0
    published[0] = 1

    fork = 0
    h = 0
    a = 0
    npub = 0

    for i in range(nev):
        b = <int>(i + 1)
        ev = events[i]
        race = h >= 1 and npub == h and a >= h
        k = i // batch_size
        if k >= nbatch:
            k = nbatch - 1

        if a == 0 and h == 0:
            code = 0
        elif race and a == h:
            code = 1
        elif a == h - 1:
            code = 2
        elif a == h:
            code = 3
        else:
            lead = a - h
            if lead < 1:
                raise LedgerError("unexpected negative lead")
            if lead > occ_cap:
                lead = occ_cap
            code = 4 + 2 * (lead - 1) + (1 if race else 0)
        occ[k, code] += 1

        if honest:
            if ev == EV_PRIVATE and strict:
                return tallies_a, occ_a, -(i + 1)
            new_block(&t, b, fork, 1 if ev == EV_MP else 0)
            published[b] = 1
            if ev != EV_MP:
                pick_uncles(&t, b)
            regular(&t, b)
            fork = b
            continue

        if ev == EV_MP:
            new_block(&t, b, priv[p0 + a - 1] if a else fork, 1)
            priv[p0 + a] = b
            a += 1
            if race and a - 1 == h:
                # equal-length published fork: publish and win, or keep it secret
                if not s0e:
                    continue
                for j in range(a):
                    published[priv[p0 + j]] = 1
                npub = a
            elif a - 1 == h and h >= 1:
                # caught up while trailing: publish and win
                for j in range(a):
                    published[priv[p0 + j]] = 1
                npub = a
            else:
                continue
            for j in range(h):
                stale(&t, pub[j])
            for j in range(a):
                regular(&t, priv[p0 + j])
            fork = priv[p0 + a - 1]
            h = 0
            a = 0
            p0 = 0
            npub = 0
            continue

        # honest block
        if ev == EV_PRIVATE and not race:
            if strict:
                return tallies_a, occ_a, -(i + 1)
            ev = EV_PUBLIC
        if ev == EV_PRIVATE:
            par = priv[p0 + npub - 1]
            new_block(&t, b, par, 0)
            published[b] = 1
            pick_uncles(&t, b)
            # the published part of the pool branch wins
            for j in range(h):
                stale(&t, pub[j])
            for j in range(npub):
                regular(&t, priv[p0 + j])
            fork = par
            p0 += npub
            a -= npub
            npub = 0
            pub[0] = b
            h = 1
        else:
            par = pub[h - 1] if h else fork
            new_block(&t, b, par, 0)
            published[b] = 1
            pick_uncles(&t, b)
            pub[h] = b
            h += 1

        d = a - h
        if a == 0 or d <= -2 or (d == -1 and not st):
            for j in range(a):
                stale(&t, priv[p0 + j])
            for j in range(h):
                regular(&t, pub[j])
            fork = pub[h - 1]
            h = 0
            a = 0
            p0 = 0
            npub = 0
        elif d == -1:
            pass  # keep mining one block behind
        elif d == 0:
            for j in range(a):
                published[priv[p0 + j]] = 1
            npub = a
        elif d == 1 and s0l:
            for j in range(a):
                published[priv[p0 + j]] = 1
            for j in range(h):
                stale(&t, pub[j])
            for j in range(a):
                regular(&t, priv[p0 + j])
            fork = priv[p0 + a - 1]
            h = 0
            a = 0
            p0 = 0
            npub = 0
        elif sl:
            while npub < h:
                published[priv[p0 + npub]] = 1
                npub += 1
        if t.bad:
            raise LedgerError("uncle distance out of range")

    if settle:
        if a > h:
            for j in range(h):
                stale(&t, pub[j])
            for j in range(a):
                regular(&t, priv[p0 + j])
        elif h > a:
            for j in range(a):
                stale(&t, priv[p0 + j])
            for j in range(h):
                regular(&t, pub[j])
    if t.bad:
        raise LedgerError("uncle distance out of range")
    return tallies_a, occ_a, 0
