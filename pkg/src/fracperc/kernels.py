"""Hot numeric kernels with a numba fast path and an interpreted fallback.

Cluster labeling, site-percolation sweeps and the recursive cube-goodness
check dominate runtime; each is written once in nopython style and
compiled with numba when available.  Setting ``FRACPERC_NUMBA=0`` in the
environment (or calling :func:`set_use_numba`) selects the interpreted
numpy path instead.  Both paths run the same code, so results are
identical; ``benchmarks/bench_kernels.py`` compares their speed.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    NUMBA_AVAILABLE = False

_USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("FRACPERC_NUMBA", "1").strip().lower() not in (
    "0",
    "false",
    "no",
    "off",
)


def use_numba() -> bool:
    """True if kernels currently dispatch to their compiled versions."""
    return _USE_NUMBA


def set_use_numba(flag: bool) -> None:
    """Select the compiled (True) or interpreted (False) kernel path."""
    global _USE_NUMBA
    _USE_NUMBA = bool(flag) and NUMBA_AVAILABLE


def _label_cells_impl(cells, dims, half_offsets):
    """Union-find cluster labels for sorted flat cells of a box.

    ``cells`` are row-major flat indices into the box with per-axis sides
    ``dims``; two cells are adjacent when all coordinate differences are
    at most 1 and at least one coordinate matches.  The returned label of
    a cell is the position (within ``cells``) of the first member of its
    cluster, i.e. the smallest row-major member.
    """
    n = cells.shape[0]
    d = dims.shape[0]
    parent = np.arange(n, dtype=np.int64)
    size = np.ones(n, dtype=np.int64)
    coords = np.empty(d, dtype=np.int64)
    ncoords = np.empty(d, dtype=np.int64)
    for i in range(n):
        rem = cells[i]
        for j in range(d - 1, -1, -1):
            coords[j] = rem % dims[j]
            rem //= dims[j]
        for t in range(half_offsets.shape[0]):
            ok = True
            for j in range(d):
                v = coords[j] + half_offsets[t, j]
                if v < 0 or v >= dims[j]:
                    ok = False
                    break
                ncoords[j] = v
            if not ok:
                continue
            nflat = ncoords[0]
            for j in range(1, d):
                nflat = nflat * dims[j] + ncoords[j]
            pos = np.searchsorted(cells, nflat)
            if pos >= n or cells[pos] != nflat:
                continue
            ra = i
            while parent[ra] != ra:
                ra = parent[ra]
            rb = pos
            while parent[rb] != rb:
                rb = parent[rb]
            a = i
            while parent[a] != ra:
                nxt = parent[a]
                parent[a] = ra
                a = nxt
            b = pos
            while parent[b] != rb:
                nxt = parent[b]
                parent[b] = rb
                b = nxt
            if ra != rb:
                if size[ra] < size[rb]:
                    ra, rb = rb, ra
                parent[rb] = ra
                size[ra] += size[rb]
    labels = np.empty(n, dtype=np.int64)
    canon = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        r = i
        while parent[r] != r:
            r = parent[r]
        if canon[r] < 0:
            canon[r] = i
        labels[i] = canon[r]
    return labels


def _site_sweep_impl(uniforms, dims, half_offsets, p_grid, axis):
    """Crossing indicator per threshold for one field of cell uniforms.

    A cell is black when its uniform is below the threshold, so the black
    sets are nested along ``p_grid`` and the indicators share one coupled
    field.  Crossing is tested along ``axis`` of the box.
    """
    total = uniforms.shape[0]
    d = dims.shape[0]
    nps = p_grid.shape[0]
    out = np.zeros(nps, dtype=np.uint8)
    parent = np.empty(total, dtype=np.int64)
    size = np.empty(total, dtype=np.int64)
    mark = np.empty(total, dtype=np.uint8)
    coords = np.empty(d, dtype=np.int64)
    strides = np.empty(d, dtype=np.int64)
    strides[d - 1] = 1
    for j in range(d - 2, -1, -1):
        strides[j] = strides[j + 1] * dims[j + 1]
    axis_stride = strides[axis]
    axis_dim = dims[axis]
    for ip in range(nps):
        p = p_grid[ip]
        for i in range(total):
            parent[i] = i
            size[i] = 1
            mark[i] = 0
        for i in range(total):
            if uniforms[i] >= p:
                continue
            rem = i
            for j in range(d - 1, -1, -1):
                coords[j] = rem % dims[j]
                rem //= dims[j]
            for t in range(half_offsets.shape[0]):
                ok = True
                nflat = 0
                for j in range(d):
                    v = coords[j] + half_offsets[t, j]
                    if v < 0 or v >= dims[j]:
                        ok = False
                        break
                    nflat += v * strides[j]
                if not ok or uniforms[nflat] >= p:
                    continue
                ra = i
                while parent[ra] != ra:
                    ra = parent[ra]
                rb = nflat
                while parent[rb] != rb:
                    rb = parent[rb]
                a = i
                while parent[a] != ra:
                    nxt = parent[a]
                    parent[a] = ra
                    a = nxt
                b = nflat
                while parent[b] != rb:
                    nxt = parent[b]
                    parent[b] = rb
                    b = nxt
                if ra != rb:
                    if size[ra] < size[rb]:
                        ra, rb = rb, ra
                    parent[rb] = ra
                    size[ra] += size[rb]
        crossed = False
        for i in range(total):
            if uniforms[i] >= p:
                continue
            if (i // axis_stride) % axis_dim == 0:
                r = i
                while parent[r] != r:
                    r = parent[r]
                mark[r] = 1
        for i in range(total):
            if uniforms[i] >= p:
                continue
            if (i // axis_stride) % axis_dim == axis_dim - 1:
                r = i
                while parent[r] != r:
                    r = parent[r]
                if mark[r] == 1:
                    crossed = True
                    break
        if crossed:
            out[ip] = 1
    return out


def _nu_good_impl(tree_flat, level_offsets, N, d, n, u,
                  local_coords, local_half, full_offsets, edge_mask):
    """Recursive goodness check over a retained subdivision tree.

    Cubes are examined ascending in the subdivision order (children
    before parents, sibling subtrees by digit rank).  A depth-n cube is
    good unconditionally.  A shallower cube is good when among the
    edge-connected components of its retained good children there is a
    witness set that touches every box edge with at least ``u`` cubes and
    is edge-linked to the witness set of every previously examined good
    neighbor cube of the same depth.  Candidate components are tried in
    order of their smallest row-major member.

    Returns per-node good flags and, for good internal nodes, the chosen
    witness set as child-slot flags.
    """
    total = tree_flat.shape[0]
    nd = local_coords.shape[0]
    nedges = edge_mask.shape[0]
    nfull = full_offsets.shape[0]
    good = np.zeros(total, dtype=np.uint8)
    witness = np.zeros((total, nd), dtype=np.uint8)
    for i in range(level_offsets[n], level_offsets[n + 1]):
        good[i] = 1
    x = np.empty(d, dtype=np.int64)
    y = np.empty(d, dtype=np.int64)
    dflag = np.empty(nd, dtype=np.uint8)
    ufp = np.empty(nd, dtype=np.int64)
    comp_seen = np.empty(nd, dtype=np.uint8)
    for m in range(n - 1, -1, -1):
        lo = level_offsets[m]
        hi = level_offsets[m + 1]
        if hi == lo:
            continue
        clo = level_offsets[m + 1]
        chi = level_offsets[m + 2]
        cells_m = tree_flat[lo:hi]
        cells_c = tree_flat[clo:chi]
        box = np.int64(1)
        for _ in range(m):
            box *= N
        cbox = box * N
        keys = np.empty(hi - lo, dtype=np.int64)
        for ii in range(hi - lo):
            rem = cells_m[ii]
            for j in range(d - 1, -1, -1):
                x[j] = rem % box
                rem //= box
            key = np.int64(0)
            pw = box // N
            for _ in range(m):
                for j in range(d):
                    key = key * N + (x[j] // pw) % N
                pw //= N
            keys[ii] = key
        order = np.argsort(keys)
        for oi in range(hi - lo):
            ii = order[oi]
            node = lo + ii
            rem = cells_m[ii]
            for j in range(d - 1, -1, -1):
                x[j] = rem % box
                rem //= box
            npresent = 0
            for loc in range(nd):
                cflat = np.int64(0)
                for j in range(d):
                    cflat = cflat * cbox + (x[j] * N + local_coords[loc, j])
                pos = np.searchsorted(cells_c, cflat)
                if pos < chi - clo and cells_c[pos] == cflat and good[clo + pos] == 1:
                    dflag[loc] = 1
                    npresent += 1
                else:
                    dflag[loc] = 0
            if npresent == 0:
                continue
            for loc in range(nd):
                ufp[loc] = loc
                comp_seen[loc] = 0
            for loc in range(nd):
                if dflag[loc] == 0:
                    continue
                for t in range(local_half.shape[0]):
                    ok = True
                    nloc = 0
                    for j in range(d):
                        v = local_coords[loc, j] + local_half[t, j]
                        if v < 0 or v >= N:
                            ok = False
                            break
                        nloc = nloc * N + v
                    if not ok or dflag[nloc] == 0:
                        continue
                    ra = loc
                    while ufp[ra] != ra:
                        ra = ufp[ra]
                    rb = nloc
                    while ufp[rb] != rb:
                        rb = ufp[rb]
                    if ra != rb:
                        if rb < ra:
                            ra, rb = rb, ra
                        ufp[rb] = ra
            for loc in range(nd):
                if dflag[loc] == 0:
                    continue
                r = loc
                while ufp[r] != r:
                    r = ufp[r]
                if comp_seen[r] == 1:
                    continue
                comp_seen[r] = 1
                ok_edges = True
                for e in range(nedges):
                    cnt = 0
                    for loc2 in range(nd):
                        if dflag[loc2] == 0 or edge_mask[e, loc2] == 0:
                            continue
                        r2 = loc2
                        while ufp[r2] != r2:
                            r2 = ufp[r2]
                        if r2 == r:
                            cnt += 1
                    if cnt < u:
                        ok_edges = False
                        break
                if not ok_edges:
                    continue
                ok_links = True
                for t in range(nfull):
                    inb = True
                    for j in range(d):
                        v = x[j] + full_offsets[t, j]
                        if v < 0 or v >= box:
                            inb = False
                            break
                        y[j] = v
                    if not inb:
                        continue
                    nflat = np.int64(0)
                    for j in range(d):
                        nflat = nflat * box + y[j]
                    pos = np.searchsorted(cells_m, nflat)
                    if pos >= hi - lo or cells_m[pos] != nflat:
                        continue
                    if good[lo + pos] == 0:
                        continue
                    linked = False
                    for loc2 in range(nd):
                        if linked:
                            break
                        if dflag[loc2] == 0:
                            continue
                        r2 = loc2
                        while ufp[r2] != r2:
                            r2 = ufp[r2]
                        if r2 != r:
                            continue
                        for loc3 in range(nd):
                            if witness[lo + pos, loc3] == 0:
                                continue
                            okadj = True
                            eq = False
                            df = False
                            for j in range(d):
                                delta = (x[j] * N + local_coords[loc2, j]) - (
                                    y[j] * N + local_coords[loc3, j])
                                if delta < 0:
                                    delta = -delta
                                if delta > 1:
                                    okadj = False
                                    break
                                if delta == 0:
                                    eq = True
                                else:
                                    df = True
                            if okadj and eq and df:
                                linked = True
                                break
                    if not linked:
                        ok_links = False
                        break
                if not ok_links:
                    continue
                good[node] = 1
                for loc2 in range(nd):
                    if dflag[loc2] == 0:
                        continue
                    r2 = loc2
                    while ufp[r2] != r2:
                        r2 = ufp[r2]
                    if r2 == r:
                        witness[node, loc2] = 1
                break
    return good, witness


if NUMBA_AVAILABLE:
    _label_cells_jit = njit(cache=True)(_label_cells_impl)
    _site_sweep_jit = njit(cache=True)(_site_sweep_impl)
    _nu_good_jit = njit(cache=True)(_nu_good_impl)
else:  # pragma: no cover
    _label_cells_jit = _label_cells_impl
    _site_sweep_jit = _site_sweep_impl
    _nu_good_jit = _nu_good_impl


def label_cells(cells, dims, half_offsets):
    impl = _label_cells_jit if _USE_NUMBA else _label_cells_impl
    return impl(cells, dims, half_offsets)


def site_sweep(uniforms, dims, half_offsets, p_grid, axis):
    impl = _site_sweep_jit if _USE_NUMBA else _site_sweep_impl
    return impl(uniforms, dims, half_offsets, p_grid, axis)


def nu_good(tree_flat, level_offsets, N, d, n, u,
            local_coords, local_half, full_offsets, edge_mask):
    impl = _nu_good_jit if _USE_NUMBA else _nu_good_impl
    return impl(tree_flat, level_offsets, N, d, n, u,
                local_coords, local_half, full_offsets, edge_mask)


def warmup() -> None:
    """Trigger JIT compilation of all kernels on tiny inputs."""
    if not _USE_NUMBA:
        return
    cells = np.array([0, 1, 3], dtype=np.int64)
    dims = np.array([2, 2], dtype=np.int64)
    half = np.array([[0, 1], [1, 0]], dtype=np.int64)
    label_cells(cells, dims, half)
    site_sweep(np.array([0.1, 0.6, 0.4, 0.9]), dims, half,
               np.array([0.5]), 0)
    tree = np.array([0, 0, 1, 2, 3], dtype=np.int64)
    offs = np.array([0, 1, 5], dtype=np.int64)
    locs = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.int64)
    full = np.array([[0, 1], [1, 0], [0, -1], [-1, 0]], dtype=np.int64)
    emask = np.array([[1, 1, 0, 0], [0, 0, 1, 1], [1, 0, 1, 0], [0, 1, 0, 1]],
                     dtype=np.uint8)
    nu_good(tree, offs, 2, 2, 1, 1, locs, half, full, emask)
