"""Numba kernels for the Monte Carlo loops.

Colours are drawn lazily from the counter-based generator, or, in exhaustive
mode, read from the bits of the trial index (trial ``t`` colours vertex ``v``
black iff bit ``v`` of ``t`` is set). Trials are split into contiguous chunks,
one per worker; per-trial outputs and integer counts make the merged result
independent of scheduling.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from .rng import trial_key, vertex_uniform


@njit(cache=True, inline="always")
def _is_black(exhaustive, key, trial, v, p):
    if exhaustive:
        return (trial >> v) & 1 == 1
    return vertex_uniform(key, v) < p


@njit(cache=True)
def colour_trial(n, seed, trial, p, exhaustive):
    """Full colouring of one trial (1 = black)."""
    key = trial_key(seed, trial)
    out = np.empty(n, dtype=np.uint8)
    for v in range(n):
        out[v] = 1 if _is_black(exhaustive, key, trial, v, p) else 0
    return out


@njit(cache=True)
def _cross_one(indptr, indices, active, arc1, is_arc2, key, trial, p, exhaustive, stamp, tag, stack):
    top = 0
    for i in range(arc1.shape[0]):
        v = arc1[i]
        if stamp[v] == tag:
            continue
        stamp[v] = tag
        if _is_black(exhaustive, key, trial, v, p):
            if is_arc2[v]:
                return True
            stack[top] = v
            top += 1
    while top > 0:
        top -= 1
        u = stack[top]
        for k in range(indptr[u], indptr[u + 1]):
            w = indices[k]
            if stamp[w] == tag or not active[w]:
                continue
            stamp[w] = tag
            if _is_black(exhaustive, key, trial, w, p):
                if is_arc2[w]:
                    return True
                stack[top] = w
                top += 1
    return False


@njit(parallel=True, cache=True)
def crossing_outcomes(indptr, indices, active, arc1, is_arc2, seed, trial0, ntrials, p, exhaustive, nchunks):
    """Per-trial black crossing indicator between ``arc1`` and the ``is_arc2`` set.

    Depth-first flood fill from the black vertices of arc 1 through active
    vertices, colouring each vertex on first contact and stopping at arc 2.
    """
    n = indptr.shape[0] - 1
    out = np.zeros(ntrials, dtype=np.uint8)
    nchunks = max(1, min(nchunks, ntrials))
    for c in prange(nchunks):
        lo = c * ntrials // nchunks
        hi = (c + 1) * ntrials // nchunks
        stamp = np.full(n, -1, dtype=np.int64)
        stack = np.empty(n, dtype=np.int64)
        for i in range(lo, hi):
            trial = trial0 + i
            key = trial_key(seed, trial)
            if _cross_one(indptr, indices, active, arc1, is_arc2, key, trial, p, exhaustive, stamp, i, stack):
                out[i] = 1
    return out


@njit(cache=True)
def _explore_one(fv, fnb, nreal, gcol, f0, L0, R0, target, key, trial, p, exhaustive):
    f = f0
    L = L0
    R = R0
    while True:
        T = fv[f, 0] + fv[f, 1] + fv[f, 2] - L - R
        if T >= nreal:
            black = gcol[T - nreal] == 1
        else:
            black = _is_black(exhaustive, key, trial, T, p)
        if black:
            L = T
        else:
            R = T
        g = -1
        for k in range(3):
            x = fv[f, k]
            y = fv[f, (k + 1) % 3]
            if (x == L and y == R) or (x == R and y == L):
                g = fnb[f, k]
                break
        if g < 0:
            return L == target
        f = g


@njit(parallel=True, cache=True)
def explore_outcomes(fv, fnb, nreal, gcol, f0, L0, R0, target, seed, trial0, ntrials, p, exhaustive, nchunks):
    """Per-trial crossing indicator from the exploration path.

    ``fv``/``fnb`` describe the domain with four ghost vertices (ids ``nreal``
    to ``nreal + 3``) appended outside the arcs, coloured black, white, black,
    white. The interface between the black cluster of the first ghost and the
    white cluster of the second is followed face by face from the ghost edge
    between them; it leaves through a ghost edge whose black end is the third
    ghost exactly when the two black arcs are joined. Only vertices next to
    the interface are coloured.
    """
    out = np.zeros(ntrials, dtype=np.uint8)
    nchunks = max(1, min(nchunks, ntrials))
    for c in prange(nchunks):
        lo = c * ntrials // nchunks
        hi = (c + 1) * ntrials // nchunks
        for i in range(lo, hi):
            trial = trial0 + i
            key = trial_key(seed, trial)
            if _explore_one(fv, fnb, nreal, gcol, f0, L0, R0, target, key, trial, p, exhaustive):
                out[i] = 1
    return out


@njit(cache=True)
def separation_events(indptr, indices, rev, colour, arc_id, fan1, fan2, bstart, bface, bcsr, he_csr,
                      he_bpos, face_nb, F, ws, out):
    """E(f) for one mark and one colouring, written to ``out`` (uint8 per face).

    Vertices of the closed arc before the mark have ``arc_id`` 1, those of the
    closed arc after it 2, and the mark itself (on both) 3; ``fan1``/``fan2``
    list the two closed arcs in boundary order. Two ghost vertices
    A1, A2 sit outside the arcs, A1 joined to the black vertices of arc 1, A2
    to those of arc 2, and A1 to A2 by the edge e*. A black chain from arc 1 to
    arc 2 together with e* is a cycle, and a face satisfies the event exactly
    when such a cycle encloses it, i.e. when the face lies off the outer face
    of the biconnected block of e*. The block is found by Tarjan's algorithm;
    the outer face by a flood over faces and the ghost regions between fan
    edges of the block.

    ``bstart[i]`` is the boundary vertex at position i (counted from the first
    vertex of arc 1), ``bface[i]``/``bcsr[i]`` the face and adjacency slot of the
    boundary edge from position i to i+1, ``he_bpos`` the inverse map from
    half-edges. ``ws`` is scratch space (see :func:`separation_workspace`).
    """
    n = indptr.shape[0] - 1
    disc, low, parent, it, vstack, estack_u, estack_k, inblock, fanblk, reached, queue, gapof, fpos = ws
    A1 = n
    A2 = n + 1
    nf1 = fan1.shape[0]
    nf2 = fan2.shape[0]
    for v in range(n + 2):
        disc[v] = -1
        it[v] = 0
    for k in range(inblock.shape[0]):
        inblock[k] = 0
    for v in range(n):
        fanblk[v] = 0

    # iterative Tarjan from A1; A1's first neighbour is A2
    t = 0
    disc[A1] = t
    low[A1] = t
    t += 1
    parent[A1] = -1
    vtop = 0
    vstack[vtop] = A1
    vtop += 1
    etop = 0
    done = False
    while vtop > 0 and not done:
        u = vstack[vtop - 1]
        # degree of u in the ghost-augmented black graph
        if u == A1:
            deg = nf1 + 1
        elif u == A2:
            deg = nf2 + 1
        else:
            deg = indptr[u + 1] - indptr[u] + (2 if arc_id[u] == 3 else (1 if arc_id[u] > 0 else 0))
        if it[u] < deg:
            j = it[u]
            it[u] += 1
            kslot = -1
            if u == A1:
                w = A2 if j == 0 else fan1[j - 1]
            elif u == A2:
                w = A1 if j == 0 else fan2[j - 1]
            else:
                d0 = indptr[u + 1] - indptr[u]
                if j < d0:
                    kslot = indptr[u] + j
                    w = indices[kslot]
                elif arc_id[u] == 3:
                    w = A1 if j == d0 else A2
                else:
                    w = A1 if arc_id[u] == 1 else A2
            if w < n and colour[w] == 0:
                continue
            if disc[w] == -1:
                parent[w] = u
                disc[w] = t
                low[w] = t
                t += 1
                estack_u[etop] = u
                estack_k[etop] = kslot if kslot >= 0 else -(w + 1)
                etop += 1
                vstack[vtop] = w
                vtop += 1
            elif w != parent[u] and disc[w] < disc[u]:
                if disc[w] < low[u]:
                    low[u] = disc[w]
                estack_u[etop] = u
                estack_k[etop] = kslot if kslot >= 0 else -(w + 1)
                etop += 1
        else:
            vtop -= 1
            p = parent[u]
            if p < 0:
                continue
            if low[u] < low[p]:
                low[p] = low[u]
            if low[u] >= disc[p]:
                record = p == A1 and u == A2
                while etop > 0:
                    etop -= 1
                    eu = estack_u[etop]
                    ek = estack_k[etop]
                    if record:
                        if ek >= 0:
                            inblock[ek] = 1
                            inblock[rev[ek]] = 1
                        else:
                            ew = -ek - 1
                            # bit 1: edge to A1, bit 2: edge to A2
                            if eu >= n and ew < n:
                                fanblk[ew] |= 1 if eu == A1 else 2
                            elif eu < n and ew >= n:
                                fanblk[eu] |= 1 if ew == A1 else 2
                    if eu == p and ((ek < 0 and -ek - 1 == u) or (ek >= 0 and indices[ek] == u)):
                        break
                if record:
                    done = True

    nb = bstart.shape[0]
    for f in range(F):
        out[f] = 0
    # block fan vertices in boundary order; fan edges cut the outside into gaps
    nfan = 0
    has1 = False
    has2 = False
    for i in range(nb):
        v = bstart[i]
        if fanblk[v] != 0:
            fpos[nfan] = i
            nfan += 1
            if fanblk[v] & 1:
                has1 = True
            if fanblk[v] & 2:
                has2 = True
    if not (has1 and has2):
        return
    lo = fpos[0]
    hi = fpos[nfan - 1]
    g = -1
    for i in range(nb):
        if i < lo or i >= hi:
            gapof[i] = -1
        else:
            if g + 1 < nfan and fpos[g + 1] == i:
                g += 1
            gapof[i] = g
    ngap = nfan - 1
    # flood from the outer region over faces (0..F-1) and gaps (F..F+ngap-1)
    for k in range(F + ngap):
        reached[k] = 0
    qh = 0
    qt = 0
    for i in range(nb):
        if gapof[i] == -1 and inblock[bcsr[i]] == 0:
            f = bface[i]
            if reached[f] == 0:
                reached[f] = 1
                queue[qt] = f
                qt += 1
    while qh < qt:
        x = queue[qh]
        qh += 1
        if x >= F:
            gi = x - F
            for i in range(fpos[gi], fpos[gi + 1]):
                if inblock[bcsr[i]] == 0:
                    f = bface[i]
                    if reached[f] == 0:
                        reached[f] = 1
                        queue[qt] = f
                        qt += 1
            continue
        for k in range(3):
            h = 3 * x + k
            if inblock[he_csr[h]] == 1:
                continue
            y = face_nb[h]
            if y >= 0:
                if reached[y] == 0:
                    reached[y] = 1
                    queue[qt] = y
                    qt += 1
            else:
                gi = gapof[he_bpos[h]]
                if gi >= 0 and reached[F + gi] == 0:
                    reached[F + gi] = 1
                    queue[qt] = F + gi
                    qt += 1
    for f in range(F):
        out[f] = 1 - reached[f]


@njit(cache=True)
def separation_workspace(n_vertices, n_csr, n_faces, n_boundary):
    """Scratch arrays for :func:`separation_events`."""
    n2 = n_vertices + 2
    i64 = np.int64
    return (
        np.empty(n2, i64), np.empty(n2, i64), np.empty(n2, i64), np.empty(n2, i64),  # disc low parent it
        np.empty(n2, i64),  # vertex stack
        np.empty(n_csr + 2 * n2, i64), np.empty(n_csr + 2 * n2, i64),  # edge stack
        np.empty(n_csr, np.uint8), np.empty(n_vertices, np.uint8),  # inblock fanblk
        np.empty(n_faces + n_boundary + 1, np.uint8),  # reached
        np.empty(n_faces + n_boundary + 1, i64),  # queue
        np.empty(n_boundary, i64), np.empty(n_boundary + 1, i64),  # gapof fpos
    )


@njit(cache=True)
def _mark_events(x, geo, colour, ws, out):
    indptr, indices, rev, he_csr, face_nb, fans, fan_off, arc_id, bstart, bface, bcsr, he_bpos = geo
    F = face_nb.shape[0] // 3
    fan1 = fans[fan_off[2 * x]:fan_off[2 * x + 1]]
    fan2 = fans[fan_off[2 * x + 1]:fan_off[2 * x + 2]]
    separation_events(indptr, indices, rev, colour, arc_id[x], fan1, fan2, bstart[x], bface[x], bcsr[x],
                      he_csr, he_bpos[x], face_nb, F, ws, out)


@njit(cache=True)
def events_for_colouring(geo, colour, n_boundary):
    """(3, F) indicators of E_a, E_b, E_c for one colouring."""
    indptr, face_nb = geo[0], geo[4]
    n = indptr.shape[0] - 1
    F = face_nb.shape[0] // 3
    ws = separation_workspace(n, geo[1].shape[0], F, n_boundary)
    ev = np.empty((3, F), dtype=np.uint8)
    for x in range(3):
        _mark_events(x, geo, colour, ws, ev[x])
    return ev


@njit(parallel=True, cache=True)
def observable_counts(geo, n_boundary, seed, trial0, ntrials, p, exhaustive, nchunks, with_edges):
    """Counts of E_a, E_b, E_c per face and of E_x(head) & !E_x(tail) per half-edge.

    The half-edge ``h`` of face ``h // 3`` is the dual edge from that face
    (tail) to its neighbour across the edge (head); boundary half-edges are
    never counted.
    """
    indptr, face_nb = geo[0], geo[4]
    n = indptr.shape[0] - 1
    F = face_nb.shape[0] // 3
    nchunks = max(1, min(nchunks, ntrials))
    hcount = np.zeros((nchunks, 3, F), dtype=np.int64)
    pcount = np.zeros((nchunks, 3, 3 * F if with_edges else 0), dtype=np.int64)
    for c in prange(nchunks):
        lo = c * ntrials // nchunks
        hi = (c + 1) * ntrials // nchunks
        colour = np.empty(n, dtype=np.uint8)
        ws = separation_workspace(n, geo[1].shape[0], F, n_boundary)
        ev = np.empty((3, F), dtype=np.uint8)
        for i in range(lo, hi):
            trial = trial0 + i
            key = trial_key(seed, trial)
            for v in range(n):
                colour[v] = 1 if _is_black(exhaustive, key, trial, v, p) else 0
            for x in range(3):
                _mark_events(x, geo, colour, ws, ev[x])
                for f in range(F):
                    hcount[c, x, f] += ev[x, f]
            if with_edges:
                for h in range(3 * F):
                    g = face_nb[h]
                    if g < 0:
                        continue
                    tail = h // 3
                    for x in range(3):
                        if ev[x, g] == 1 and ev[x, tail] == 0:
                            pcount[c, x, h] += 1
    return hcount.sum(axis=0), pcount.sum(axis=0)


@njit(cache=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True)
def union_find_labels(indptr, indices, member):
    """Component root of every member vertex (``-1`` for non-members).

    Union by size with path halving over edges joining two members.
    """
    n = indptr.shape[0] - 1
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    for u in range(n):
        if not member[u]:
            continue
        for k in range(indptr[u], indptr[u + 1]):
            w = indices[k]
            if w <= u or not member[w]:
                continue
            ru, rw = _find(parent, u), _find(parent, w)
            if ru == rw:
                continue
            if size[ru] < size[rw]:
                ru, rw = rw, ru
            parent[rw] = ru
            size[ru] += size[rw]
    out = np.full(n, -1, dtype=np.int64)
    for u in range(n):
        if member[u]:
            out[u] = _find(parent, u)
    return out
