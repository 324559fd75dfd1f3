"""Pure-Python block-tree simulation kernel.

This mirrors ``_kernel.pyx`` line for line; both must produce identical
integer tallies for identical inputs. All bookkeeping is integral (uncle
rewards are tallied in eighths) so the two builds agree bit for bit.
"""

import numpy as np

# event codes
EV_MP = 0
EV_PUBLIC = 1
EV_PRIVATE = 2  # honest block on the pool's tip if a race is live, else public

# tally columns
T_MP_REG = 0
T_H_REG = 1
T_STALE = 2
T_UNCLES = 3
T_UNCLE8_MP = 4
T_UNCLE8_H = 5
T_NEPHEWS = 6
T_UNCLES_MP = 7
N_TALLY = 8

# occupancy codes: 0 consensus, 1 equal fork, 2 trailing, 3 trail-equal,
# 4 + 2*(lead-1) + (n-1) for leads 1..occ_cap (lead occ_cap absorbs the rest)
OCC_CONSENSUS = 0
OCC_EQUAL_FORK = 1
OCC_TRAIL = 2
OCC_TRAIL_EQUAL = 3

MAX_UNCLE_DISTANCE = 6


class LedgerError(RuntimeError):
    pass


def n_occupancy_codes(occ_cap):
    return 4 + 2 * occ_cap


def run_kernel(events, flags, honest, strict, settle, batch_size, nbatch, occ_cap):
    """Simulate the scripted event sequence ``events`` (int8 codes).

    ``flags`` is ``(s0l, s0e, s0t, sl, se, st)``. Returns
    ``(tallies, occupancy, status)`` where status is 0 on success and
    ``-(i + 1)`` if event ``i`` was a private-tip block with no live race
    while ``strict`` is set.
    """
    s0l, s0e, s0t, sl, se, st = [int(x) for x in flags]
    nev = len(events)
    nblk = nev + 1
    parent = np.full(nblk, -1, dtype=np.int32)
    height = np.zeros(nblk, dtype=np.int32)
    miner = np.zeros(nblk, dtype=np.int8)
    published = np.zeros(nblk, dtype=np.int8)
    ref1 = np.full(nblk, -1, dtype=np.int32)
    ref2 = np.full(nblk, -1, dtype=np.int32)
    first_child = np.full(nblk, -1, dtype=np.int32)
    next_sibling = np.full(nblk, -1, dtype=np.int32)
    published[0] = 1

    tallies = np.zeros((nbatch, N_TALLY), dtype=np.int64)
    occ = np.zeros((nbatch, n_occupancy_codes(occ_cap)), dtype=np.int64)

    fork = 0
    pub = []   # honest public branch above the fork point
    priv = []  # pool branch above the fork point
    npub = 0   # published prefix length of ``priv``

    def batch_of(b):
        k = (b - 1) // batch_size
        return k if k < nbatch else nbatch - 1

    def regular(b):
        k = batch_of(b)
        if miner[b]:
            tallies[k, T_MP_REG] += 1
            return
        tallies[k, T_H_REG] += 1
        for u in (ref1[b], ref2[b]):
            if u < 0:
                continue
            d = height[b] - height[u]
            if d < 1 or d > MAX_UNCLE_DISTANCE:
                raise LedgerError("uncle distance out of range")
            tallies[k, T_UNCLES] += 1
            tallies[k, T_NEPHEWS] += 1
            if miner[u]:
                tallies[k, T_UNCLES_MP] += 1
                tallies[k, T_UNCLE8_MP] += d
            else:
                tallies[k, T_UNCLE8_H] += d

    def stale(b):
        tallies[batch_of(b), T_STALE] += 1

    def referenced_by(anc_list, upto, c):
        for i in range(upto):
            a = anc_list[i]
            if ref1[a] == c or ref2[a] == c:
                return True
        return False

    def pick_uncles(b):
        # ancestors A_1..A_7 of the new block b
        anc = []
        x = parent[b]
        while x >= 0 and len(anc) < MAX_UNCLE_DISTANCE + 1:
            anc.append(x)
            x = parent[x]
        got = 0
        for d in range(MAX_UNCLE_DISTANCE, 0, -1):
            if d >= len(anc):
                continue
            grand = anc[d]
            on_chain = anc[d - 1]
            c = first_child[grand]
            while c >= 0 and got < 2:
                if c != on_chain and published[c] and not referenced_by(anc, d - 1, c) and c != ref1[b]:
                    if got == 0:
                        ref1[b] = c
                    else:
                        ref2[b] = c
                    got += 1
                c = next_sibling[c]
            if got == 2:
                break

    def new_block(b, par, who):
        parent[b] = par
        height[b] = height[par] + 1
        miner[b] = who
        next_sibling[b] = first_child[par]
        first_child[par] = b

    for i in range(nev):
        b = i + 1
        ev = events[i]
        a = len(priv)
        h = len(pub)
        race = h >= 1 and npub == h and a >= h
        k = i // batch_size
        if k >= nbatch:
            k = nbatch - 1

        # occupancy of the state the event happens in
        if a == 0 and h == 0:
            code = OCC_CONSENSUS
        elif race and a == h:
            code = OCC_EQUAL_FORK
        elif a == h - 1:
            code = OCC_TRAIL
        elif a == h:
            code = OCC_TRAIL_EQUAL
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
                return tallies, occ, -(i + 1)
            new_block(b, fork, 1 if ev == EV_MP else 0)
            published[b] = 1
            if ev != EV_MP:
                pick_uncles(b)
            regular(b)
            fork = b
            continue

        if ev == EV_MP:
            new_block(b, priv[-1] if a else fork, 1)
            priv.append(b)
            if race and a == h:
                # equal-length published fork: publish and win, or keep it secret
                if not s0e:
                    continue
                for x in priv:
                    published[x] = 1
                npub = len(priv)
            elif a == h and h >= 1:
                # caught up while trailing: publish and win
                for x in priv:
                    published[x] = 1
                npub = len(priv)
            else:
                continue
            for x in pub:
                stale(x)
            for x in priv:
                regular(x)
            fork = priv[-1]
            pub = []
            priv = []
            npub = 0
            continue

        # honest block
        if ev == EV_PRIVATE and not race:
            if strict:
                return tallies, occ, -(i + 1)
            ev = EV_PUBLIC
        if ev == EV_PRIVATE:
            par = priv[npub - 1]
            new_block(b, par, 0)
            published[b] = 1
            pick_uncles(b)
            # the published part of the pool branch wins
            for x in pub:
                stale(x)
            for x in priv[:npub]:
                regular(x)
            fork = par
            priv = priv[npub:]
            npub = 0
            pub = [b]
        else:
            par = pub[-1] if h else fork
            new_block(b, par, 0)
            published[b] = 1
            pick_uncles(b)
            pub.append(b)

        a = len(priv)
        h = len(pub)
        d = a - h
        if a == 0 or d <= -2 or (d == -1 and not st):
            for x in priv:
                stale(x)
            for x in pub:
                regular(x)
            fork = pub[-1]
            pub = []
            priv = []
            npub = 0
        elif d == -1:
            pass  # keep mining one block behind
        elif d == 0:
            for x in priv:
                published[x] = 1
            npub = a
        elif d == 1 and s0l:
            for x in priv:
                published[x] = 1
            for x in pub:
                stale(x)
            for x in priv:
                regular(x)
            fork = priv[-1]
            pub = []
            priv = []
            npub = 0
        elif sl:
            while npub < h:
                published[priv[npub]] = 1
                npub += 1
        # selfish pool with lead >= 2 keeps everything withheld

    if settle:
        a = len(priv)
        h = len(pub)
        if a > h:
            for x in pub:
                stale(x)
            for x in priv:
                regular(x)
        elif h > a:
            for x in priv:
                stale(x)
            for x in pub:
                regular(x)
    return tallies, occ, 0
