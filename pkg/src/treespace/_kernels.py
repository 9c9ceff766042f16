"""
Numeric kernels behind geodesic computation.

Everything here works on plain numpy arrays plus the interned-split
compatibility table, so the hot loops can be compiled with numba.  The module
is self-contained on purpose: it reads TREESPACE_BACKEND itself and imports
nothing from the rest of the package, which lets tests and benchmarks load a
second, interpreted copy next to the compiled one.

Backend selection (TREESPACE_BACKEND):
  auto   use numba when importable, else plain python/numpy   [default]
  numba  require numba
  numpy  force the interpreted fallback
"""

from __future__ import annotations

import os

import numpy as np

_choice = os.environ.get("TREESPACE_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"TREESPACE_BACKEND={_choice!r}; expected auto, numba or numpy"
    )

USE_NUMBA = False
if _choice in ("auto", "numba"):
    try:
        from numba import njit as _njit

        USE_NUMBA = True
    except ImportError:
        if _choice == "numba":
            raise
BACKEND = "numba" if USE_NUMBA else "numpy"


def _jit(fn):
    if USE_NUMBA:
        return _njit(cache=True, nogil=True)(fn)
    return fn


# Cover weight below 1 - SPLIT_TOL splits a support pair; adjacent ratio
# inversions beyond MERGE_TOL merge back.  Residual capacities are compared
# against exact 0.0: bottleneck subtraction saturates the minimum edge
# exactly in IEEE arithmetic, and edge weights can be legitimately tiny
# (probe points carry lengths ~1e-7), so no absolute floor is safe.
SPLIT_TOL = 1e-12
MERGE_TOL = 1e-12
_BIG = 4.0


def min_cover(inc, wa, wb):
    """
    Minimum-weight vertex cover of the bipartite incompatibility graph.

    inc[i, j] is True when A-edge i is incompatible with B-edge j; wa/wb are
    the vertex weights (normalized squared lengths).  Solved as a max-flow:
    source -> A (cap wa) -> incompat edges (cap inf) -> B (cap wb) -> sink.
    Returns (cover weight, cover_a, cover_b) with the canonical min cut
    cover = (A not reachable from source, B reachable) in the residual graph.
    """
    na = wa.shape[0]
    nb = wb.shape[0]
    n = na + nb + 2
    src = 0
    snk = n - 1
    cap = np.zeros((n, n), dtype=np.float64)
    for i in range(na):
        cap[src, 1 + i] = wa[i]
    for j in range(nb):
        cap[1 + na + j, snk] = wb[j]
    for i in range(na):
        for j in range(nb):
            if inc[i, j]:
                cap[1 + i, 1 + na + j] = _BIG

    parent = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    flow = 0.0
    while True:
        # BFS for a shortest augmenting path in the residual graph.
        for v in range(n):
            parent[v] = -1
        parent[src] = src
        queue[0] = src
        head = 0
        tail = 1
        while head < tail and parent[snk] == -1:
            u = queue[head]
            head += 1
            for v in range(n):
                if parent[v] == -1 and cap[u, v] > 0.0:
                    parent[v] = u
                    queue[tail] = v
                    tail += 1
        if parent[snk] == -1:
            break
        bottleneck = 1e300
        v = snk
        while v != src:
            u = parent[v]
            if cap[u, v] < bottleneck:
                bottleneck = cap[u, v]
            v = u
        v = snk
        while v != src:
            u = parent[v]
            cap[u, v] -= bottleneck
            cap[v, u] += bottleneck
            v = u
        flow += bottleneck

    reach = np.zeros(n, dtype=np.bool_)
    reach[src] = True
    queue[0] = src
    head = 0
    tail = 1
    while head < tail:
        u = queue[head]
        head += 1
        for v in range(n):
            if not reach[v] and cap[u, v] > 0.0:
                reach[v] = True
                queue[tail] = v
                tail += 1

    cover_a = np.empty(na, dtype=np.bool_)
    cover_b = np.empty(nb, dtype=np.bool_)
    for i in range(na):
        cover_a[i] = not reach[1 + i]
    for j in range(nb):
        cover_b[j] = reach[1 + na + j]

    # Prune redundant cover vertices (all of whose edges are covered from the
    # other side); flow dust can otherwise leave a vertex spuriously included,
    # which would misplace edges when the caller splits a support pair.
    changed = True
    while changed:
        changed = False
        for i in range(na):
            if cover_a[i]:
                needed = False
                for j in range(nb):
                    if inc[i, j] and not cover_b[j]:
                        needed = True
                        break
                if not needed:
                    cover_a[i] = False
                    changed = True
        for j in range(nb):
            if cover_b[j]:
                needed = False
                for i in range(na):
                    if inc[i, j] and not cover_a[i]:
                        needed = True
                        break
                if not needed:
                    cover_b[j] = False
                    changed = True
    return flow, cover_a, cover_b


def refine_support(inc, la2, lb2):
    """
    Successive support refinement for one tree pair.

    Starts from the single cone pair covering all incompatible edges and
    repeatedly splits any pair whose minimum vertex-cover weight drops below 1
    (the improving-partition certificate); adjacent pairs whose norm ratios
    invert beyond tolerance are merged back and reprocessed.  Each split and
    each inversion merge strictly shortens the candidate path, so the loop
    terminates; a generous iteration guard backstops float pathologies.

    inc : bool (na, nb) incompatibility between the two incompatible-edge sets
    la2, lb2 : squared edge lengths on the two sides

    Returns (labels_a, labels_b, k): pair index per edge, pairs numbered in
    geodesic order with nondecreasing ratio ||A_l|| / ||B_l||.
    """
    na = la2.shape[0]
    nb = lb2.shape[0]
    maxp = na if na < nb else nb
    labels_a = np.zeros(na, dtype=np.int64)
    labels_b = np.zeros(nb, dtype=np.int64)
    order = np.zeros(maxp, dtype=np.int64)
    k = 1
    next_id = 1
    idx_a = np.empty(na, dtype=np.int64)
    idx_b = np.empty(nb, dtype=np.int64)

    guard = 16 * (na + nb) * (na + nb) + 64
    while guard > 0:
        guard -= 1
        changed = False

        pos = 0
        while pos < k:
            pid = order[pos]
            ca = 0
            for i in range(na):
                if labels_a[i] == pid:
                    idx_a[ca] = i
                    ca += 1
            cb = 0
            for j in range(nb):
                if labels_b[j] == pid:
                    idx_b[cb] = j
                    cb += 1
            if ca <= 1 and cb <= 1:
                pos += 1
                continue
            wa = np.empty(ca, dtype=np.float64)
            wb = np.empty(cb, dtype=np.float64)
            wa_sum = 0.0
            for ii in range(ca):
                wa_sum += la2[idx_a[ii]]
            wb_sum = 0.0
            for jj in range(cb):
                wb_sum += lb2[idx_b[jj]]
            for ii in range(ca):
                wa[ii] = la2[idx_a[ii]] / wa_sum
            for jj in range(cb):
                wb[jj] = lb2[idx_b[jj]] / wb_sum
            sub = np.empty((ca, cb), dtype=np.bool_)
            for ii in range(ca):
                for jj in range(cb):
                    sub[ii, jj] = inc[idx_a[ii], idx_b[jj]]
            weight, cover_a, cover_b = min_cover(sub, wa, wb)
            if weight >= 1.0 - SPLIT_TOL:
                pos += 1
                continue
            # Split into (C1, D1), (C2, D2): C1 = covered A side, D2 = covered
            # B side; C2 x D1 has no incompatibilities by cover-ness.
            n_c1 = 0
            for ii in range(ca):
                if cover_a[ii]:
                    n_c1 += 1
            n_d2 = 0
            for jj in range(cb):
                if cover_b[jj]:
                    n_d2 += 1
            if n_c1 == 0 or n_c1 == ca or n_d2 == 0 or n_d2 == cb:
                pos += 1  # degenerate cover; leave pair unsplit
                continue
            new_id = next_id
            next_id += 1
            for ii in range(ca):
                if not cover_a[ii]:
                    labels_a[idx_a[ii]] = new_id
            for jj in range(cb):
                if cover_b[jj]:
                    labels_b[idx_b[jj]] = new_id
            for q in range(k, pos + 1, -1):
                order[q] = order[q - 1]
            order[pos + 1] = new_id
            k += 1
            changed = True
            # re-examine (C1, D1) at the same position

        merged = False
        for pos in range(k - 1):
            pid = order[pos]
            qid = order[pos + 1]
            a1 = 0.0
            a2 = 0.0
            for i in range(na):
                if labels_a[i] == pid:
                    a1 += la2[i]
                elif labels_a[i] == qid:
                    a2 += la2[i]
            b1 = 0.0
            b2 = 0.0
            for j in range(nb):
                if labels_b[j] == pid:
                    b1 += lb2[j]
                elif labels_b[j] == qid:
                    b2 += lb2[j]
            # ratio_pos > ratio_{pos+1}  <=>  a1 * b2 > a2 * b1  (all positive)
            if np.sqrt(a1 * b2) > np.sqrt(a2 * b1) * (1.0 + MERGE_TOL):
                for i in range(na):
                    if labels_a[i] == qid:
                        labels_a[i] = pid
                for j in range(nb):
                    if labels_b[j] == qid:
                        labels_b[j] = pid
                for q in range(pos + 1, k - 1):
                    order[q] = order[q + 1]
                k -= 1
                merged = True
                break
        if merged:
            continue
        if not changed:
            break

    id_to_pos = np.full(next_id, -1, dtype=np.int64)
    for pos in range(k):
        id_to_pos[order[pos]] = pos
    for i in range(na):
        labels_a[i] = id_to_pos[labels_a[i]]
    for j in range(nb):
        labels_b[j] = id_to_pos[labels_b[j]]
    return labels_a, labels_b, k


def classify_pair(compat, x_ids, x_len, t_ids, t_len):
    """
    Partition the two edge sets of a tree pair into common and incompatible.

    Returns (a_idx, b_idx, inc, com_ids, com_x, com_t): indices into the x/t
    arrays of the mutually incompatible edges, their incompatibility matrix,
    and the union of common splits with their lengths on each side (0.0 for a
    side where the split is absent).
    """
    nx = x_ids.shape[0]
    nt = t_ids.shape[0]
    x_common = np.ones(nx, dtype=np.bool_)
    t_common = np.ones(nt, dtype=np.bool_)
    for i in range(nx):
        for j in range(nt):
            if not compat[x_ids[i], t_ids[j]]:
                x_common[i] = False
                t_common[j] = False

    na = 0
    nb = 0
    for i in range(nx):
        if not x_common[i]:
            na += 1
    for j in range(nt):
        if not t_common[j]:
            nb += 1
    a_idx = np.empty(na, dtype=np.int64)
    b_idx = np.empty(nb, dtype=np.int64)
    p = 0
    for i in range(nx):
        if not x_common[i]:
            a_idx[p] = i
            p += 1
    p = 0
    for j in range(nt):
        if not t_common[j]:
            b_idx[p] = j
            p += 1
    inc = np.empty((na, nb), dtype=np.bool_)
    for ii in range(na):
        for jj in range(nb):
            inc[ii, jj] = not compat[x_ids[a_idx[ii]], t_ids[b_idx[jj]]]

    n_com = 0
    for i in range(nx):
        if x_common[i]:
            n_com += 1
    for j in range(nt):
        if t_common[j]:
            shared = False
            for i in range(nx):
                if x_ids[i] == t_ids[j]:
                    shared = True
                    break
            if not shared:
                n_com += 1
    com_ids = np.empty(n_com, dtype=np.int64)
    com_x = np.zeros(n_com, dtype=np.float64)
    com_t = np.zeros(n_com, dtype=np.float64)
    p = 0
    for i in range(nx):
        if x_common[i]:
            com_ids[p] = x_ids[i]
            com_x[p] = x_len[i]
            for j in range(nt):
                if t_ids[j] == x_ids[i]:
                    com_t[p] = t_len[j]
                    break
            p += 1
    for j in range(nt):
        if t_common[j]:
            shared = False
            for i in range(nx):
                if x_ids[i] == t_ids[j]:
                    shared = True
                    break
            if not shared:
                com_ids[p] = t_ids[j]
                com_t[p] = t_len[j]
                p += 1
    return a_idx, b_idx, inc, com_ids, com_x, com_t


def geodesic_support(compat, x_ids, x_len, t_ids, t_len):
    """
    Full geodesic combinatorics of a pair: classification plus the refined
    support.  Returns (a_idx, labels_a, b_idx, labels_b, k, com_ids, com_x,
    com_t, norm_a, norm_b) with per-pair norms taken at x and t respectively.
    """
    a_idx, b_idx, inc, com_ids, com_x, com_t = classify_pair(
        compat, x_ids, x_len, t_ids, t_len
    )
    na = a_idx.shape[0]
    nb = b_idx.shape[0]
    if na == 0:
        labels_a = np.empty(0, dtype=np.int64)
        labels_b = np.empty(0, dtype=np.int64)
        k = 0
        norm_a = np.empty(0, dtype=np.float64)
        norm_b = np.empty(0, dtype=np.float64)
        return a_idx, labels_a, b_idx, labels_b, k, com_ids, com_x, com_t, norm_a, norm_b
    la2 = np.empty(na, dtype=np.float64)
    lb2 = np.empty(nb, dtype=np.float64)
    for i in range(na):
        la2[i] = x_len[a_idx[i]] ** 2
    for j in range(nb):
        lb2[j] = t_len[b_idx[j]] ** 2
    labels_a, labels_b, k = refine_support(inc, la2, lb2)
    norm_a = np.zeros(k, dtype=np.float64)
    norm_b = np.zeros(k, dtype=np.float64)
    for i in range(na):
        norm_a[labels_a[i]] += la2[i]
    for j in range(nb):
        norm_b[labels_b[j]] += lb2[j]
    for l in range(k):
        norm_a[l] = np.sqrt(norm_a[l])
        norm_b[l] = np.sqrt(norm_b[l])
    return a_idx, labels_a, b_idx, labels_b, k, com_ids, com_x, com_t, norm_a, norm_b


def pair_distance(compat, x_ids, x_len, x_pend, t_ids, t_len, t_pend):
    """Geodesic distance between two points given as id/length arrays."""
    res = geodesic_support(compat, x_ids, x_len, t_ids, t_len)
    k = res[4]
    com_x = res[6]
    com_t = res[7]
    norm_a = res[8]
    norm_b = res[9]
    d2 = 0.0
    for l in range(k):
        s = norm_a[l] + norm_b[l]
        d2 += s * s
    for c in range(com_x.shape[0]):
        diff = com_x[c] - com_t[c]
        d2 += diff * diff
    for p in range(x_pend.shape[0]):
        diff = x_pend[p] - t_pend[p]
        d2 += diff * diff
    return np.sqrt(d2)


def geodesic_interp(compat, x_ids, x_len, x_pend, t_ids, t_len, t_pend, lam):
    """
    The point at parameter *lam* on the geodesic from x to t, plus the full
    geodesic length.  Edge lengths follow the three-case leg formula; edges
    whose coefficient is nonpositive at *lam* are absent from the result.

    Returns (ids, lens, pendants, distance).
    """
    (
        a_idx,
        labels_a,
        b_idx,
        labels_b,
        k,
        com_ids,
        com_x,
        com_t,
        norm_a,
        norm_b,
    ) = geodesic_support(compat, x_ids, x_len, t_ids, t_len)

    d2 = 0.0
    for l in range(k):
        s = norm_a[l] + norm_b[l]
        d2 += s * s
    for c in range(com_ids.shape[0]):
        diff = com_x[c] - com_t[c]
        d2 += diff * diff
    for p in range(x_pend.shape[0]):
        diff = x_pend[p] - t_pend[p]
        d2 += diff * diff
    dist = np.sqrt(d2)

    na = a_idx.shape[0]
    nb = b_idx.shape[0]
    out_ids = np.empty(com_ids.shape[0] + na + nb, dtype=np.int64)
    out_len = np.empty(com_ids.shape[0] + na + nb, dtype=np.float64)
    n_out = 0
    for c in range(com_ids.shape[0]):
        v = (1.0 - lam) * com_x[c] + lam * com_t[c]
        if v > 0.0:
            out_ids[n_out] = com_ids[c]
            out_len[n_out] = v
            n_out += 1
    for i in range(na):
        l = labels_a[i]
        coeff = (1.0 - lam) * norm_a[l] - lam * norm_b[l]
        if coeff > 0.0:
            out_ids[n_out] = x_ids[a_idx[i]]
            out_len[n_out] = coeff / norm_a[l] * x_len[a_idx[i]]
            n_out += 1
    for j in range(nb):
        l = labels_b[j]
        coeff = lam * norm_b[l] - (1.0 - lam) * norm_a[l]
        if coeff > 0.0:
            out_ids[n_out] = t_ids[b_idx[j]]
            out_len[n_out] = coeff / norm_b[l] * t_len[b_idx[j]]
            n_out += 1
    new_pend = np.empty(x_pend.shape[0], dtype=np.float64)
    for p in range(x_pend.shape[0]):
        new_pend[p] = (1.0 - lam) * x_pend[p] + lam * t_pend[p]
    return out_ids[:n_out].copy(), out_len[:n_out].copy(), new_pend, dist


def sturm_loop(
    compat,
    data_ids,
    data_ne,
    data_len,
    data_pend,
    x_ids,
    x_len,
    x_pend,
    order,
    tsteps,
    move_tol,
    stall_needed,
):
    """
    Run the split proximal-point iteration over a precomputed schedule.

    order[s] picks the data tree of step s and tsteps[s] the step proportion
    along the geodesic toward it.  Movement per step is tsteps[s] times the
    geodesic distance; the loop stops early after *stall_needed* consecutive
    moves below *move_tol*.  Returns (ids, lens, pendants, steps_taken).
    """
    cur_ids = x_ids.copy()
    cur_len = x_len.copy()
    cur_pend = x_pend.copy()
    stall = 0
    steps = 0
    for s in range(order.shape[0]):
        i = order[s]
        ne = data_ne[i]
        t_ids = data_ids[i, :ne]
        t_len = data_len[i, :ne]
        t_pend = data_pend[i]
        cur_ids, cur_len, cur_pend, dist = geodesic_interp(
            compat, cur_ids, cur_len, cur_pend, t_ids, t_len, t_pend, tsteps[s]
        )
        steps += 1
        if tsteps[s] * dist < move_tol:
            stall += 1
            if stall >= stall_needed:
                break
        else:
            stall = 0
    return cur_ids, cur_len, cur_pend, steps


min_cover = _jit(min_cover)
refine_support = _jit(refine_support)
classify_pair = _jit(classify_pair)
geodesic_support = _jit(geodesic_support)
pair_distance = _jit(pair_distance)
geodesic_interp = _jit(geodesic_interp)
sturm_loop = _jit(sturm_loop)
