# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. ``hybridnav._fallback`` mirrors every function here."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, sin, cos, atan2, floor, ceil, fabs, INFINITY, remainder, M_PI
from libc.stdlib cimport malloc, free

cnp.import_array()

ctypedef unsigned char u8

cdef int LETHAL = 254

# neighbour offsets (drow, dcol), straight moves first
cdef int NBR_DR[8]
cdef int NBR_DC[8]
cdef int NBR_DIAG[8]
NBR_DR[:] = [-1, 0, 0, 1, -1, -1, 1, 1]
NBR_DC[:] = [0, -1, 1, 0, -1, 1, -1, 1]
NBR_DIAG[:] = [0, 0, 0, 0, 1, 1, 1, 1]


cdef inline bint _less(double ga, long ia, double gb, long ib) nogil:
    return ga < gb or (ga == gb and ia < ib)


cdef void _sift_up(double* key, long* idx, long pos) nogil:
    cdef double k = key[pos]
    cdef long v = idx[pos]
    cdef long parent
    while pos > 0:
        parent = (pos - 1) >> 1
        if _less(k, v, key[parent], idx[parent]):
            key[pos] = key[parent]
            idx[pos] = idx[parent]
            pos = parent
        else:
            break
    key[pos] = k
    idx[pos] = v


cdef void _sift_down(double* key, long* idx, long size, long pos) nogil:
    cdef double k = key[pos]
    cdef long v = idx[pos]
    cdef long child
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and _less(key[child + 1], idx[child + 1], key[child], idx[child]):
            child += 1
        if _less(key[child], idx[child], k, v):
            key[pos] = key[child]
            idx[pos] = idx[child]
            pos = child
        else:
            break
    key[pos] = k
    idx[pos] = v


def dijkstra(const u8[:, ::1] cost, long start, long goal, const double[:, ::1] weights):
    """8-connected Dijkstra on a cost grid.

    ``weights[diag, c]`` is the cost of stepping into a cell of cost ``c``.
    Returns ``(g_goal, path)`` with ``path`` the flat cell indices start..goal,
    or ``(inf, empty)`` when the goal is unreachable.
    """
    cdef long rows = cost.shape[0], cols = cost.shape[1], n = rows * cols
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g_arr = np.full(n, np.inf)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] pred_arr = np.full(n, -1, dtype=np.int64)
    cdef double[::1] g = g_arr
    cdef cnp.int64_t[::1] pred = pred_arr
    cdef u8* closed = <u8*> malloc(n)
    cdef long cap = 8 * n + 16
    cdef double* hkey = <double*> malloc(cap * sizeof(double))
    cdef long* hidx = <long*> malloc(cap * sizeof(long))
    cdef long size = 0, u, v, r, c, rr, cc, k
    cdef double gu, gv
    cdef u8 cv
    cdef bint found = False
    try:
        for k in range(n):
            closed[k] = 0
        g[start] = 0.0
        hkey[0] = 0.0
        hidx[0] = start
        size = 1
        with nogil:
            while size > 0:
                gu = hkey[0]
                u = hidx[0]
                size -= 1
                if size > 0:
                    hkey[0] = hkey[size]
                    hidx[0] = hidx[size]
                    _sift_down(hkey, hidx, size, 0)
                if closed[u] or gu > g[u]:
                    continue
                closed[u] = 1
                if u == goal:
                    found = True
                    break
                r = u // cols
                c = u - r * cols
                for k in range(8):
                    rr = r + NBR_DR[k]
                    cc = c + NBR_DC[k]
                    if rr < 0 or rr >= rows or cc < 0 or cc >= cols:
                        continue
                    cv = cost[rr, cc]
                    if cv >= LETHAL:
                        continue
                    v = rr * cols + cc
                    if closed[v]:
                        continue
                    gv = gu + weights[NBR_DIAG[k], cv]
                    if gv < g[v]:
                        g[v] = gv
                        pred[v] = u
                        hkey[size] = gv
                        hidx[size] = v
                        size += 1
                        _sift_up(hkey, hidx, size - 1)
    finally:
        free(closed)
        free(hkey)
        free(hidx)
    if not found:
        return np.inf, np.empty(0, dtype=np.int64)
    path = []
    v = goal
    while v != -1:
        path.append(v)
        v = pred[v]
    path.reverse()
    return g[goal], np.array(path, dtype=np.int64)


def raycast(const u8[:, ::1] occ, double ox, double oy, double res, double px, double py,
            const double[::1] angles, double max_range, const double[:, ::1] discs):
    """Distance along each ray to the first occupied cell or disc, capped at ``max_range``."""
    cdef long rows = occ.shape[0], cols = occ.shape[1]
    cdef long nb = angles.shape[0], nd = discs.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.empty(nb)
    cdef double[::1] out = out_arr
    cdef long b, j, ix, iy, sx, sy
    cdef double a, dx, dy, gx, gy, tmx, tmy, tdx, tdy, t, tmax_grid, best
    cdef double qx, qy, bb, cc2, disc, sq, t0
    for b in range(nb):
        a = angles[b]
        dx = cos(a)
        dy = sin(a)
        best = max_range
        # occupied cells (Amanatides-Woo traversal in cell units)
        gx = (px - ox) / res
        gy = (py - oy) / res
        ix = <long> floor(gx)
        iy = <long> floor(gy)
        tmax_grid = max_range / res
        if ix < 0 or ix >= cols or iy < 0 or iy >= rows:
            pass
        elif occ[iy, ix]:
            best = 0.0
        else:
            if dx > 0:
                sx = 1
                tmx = (ix + 1 - gx) / dx
                tdx = 1.0 / dx
            elif dx < 0:
                sx = -1
                tmx = (ix - gx) / dx
                tdx = -1.0 / dx
            else:
                sx = 0
                tmx = INFINITY
                tdx = INFINITY
            if dy > 0:
                sy = 1
                tmy = (iy + 1 - gy) / dy
                tdy = 1.0 / dy
            elif dy < 0:
                sy = -1
                tmy = (iy - gy) / dy
                tdy = -1.0 / dy
            else:
                sy = 0
                tmy = INFINITY
                tdy = INFINITY
            while True:
                if tmx < tmy:
                    t = tmx
                    ix += sx
                    tmx += tdx
                else:
                    t = tmy
                    iy += sy
                    tmy += tdy
                if t >= tmax_grid:
                    break
                if ix < 0 or ix >= cols or iy < 0 or iy >= rows:
                    break
                if occ[iy, ix]:
                    if t * res < best:
                        best = t * res
                    break
        for j in range(nd):
            qx = px - discs[j, 0]
            qy = py - discs[j, 1]
            bb = dx * qx + dy * qy
            cc2 = qx * qx + qy * qy - discs[j, 2] * discs[j, 2]
            disc = bb * bb - cc2
            if disc < 0:
                continue
            sq = sqrt(disc)
            t0 = -bb - sq
            if t0 < 0:
                if -bb + sq >= 0:
                    t0 = 0.0
                else:
                    continue
            if t0 < best:
                best = t0
        out[b] = best
    return out_arr


def hausdorff(const double[:, ::1] a, const double[:, ::1] b):
    """Undirected Hausdorff distance between two point sets."""
    cdef double h = _directed_sq(a, b)
    cdef double h2 = _directed_sq(b, a)
    if h2 > h:
        h = h2
    return sqrt(h)


cdef double _directed_sq(const double[:, ::1] a, const double[:, ::1] b) nogil:
    cdef long n = a.shape[0], m = b.shape[0], i, j
    cdef double worst = 0.0, best, dx, dy, d
    for i in range(n):
        best = INFINITY
        for j in range(m):
            dx = a[i, 0] - b[j, 0]
            dy = a[i, 1] - b[j, 1]
            d = dx * dx + dy * dy
            if d < best:
                best = d
                if best <= worst:
                    break
        if best > worst:
            worst = best
    return worst


cdef inline bint _box_hits_lethal(const u8[:, ::1] cost, double x, double y, double ox,
                                  double oy, double res, double h) nogil:
    cdef long rows = cost.shape[0], cols = cost.shape[1]
    cdef long c0 = <long> floor((x - h - ox) / res)
    cdef long c1 = <long> floor((x + h - ox) / res)
    cdef long r0 = <long> floor((y - h - oy) / res)
    cdef long r1 = <long> floor((y + h - oy) / res)
    cdef long r, c
    for r in range(r0, r1 + 1):
        for c in range(c0, c1 + 1):
            if r < 0 or r >= rows or c < 0 or c >= cols:
                return True
            if cost[r, c] >= LETHAL:
                return True
    return False


cdef inline void _arc_point(double x, double y, double th, double v, double w, double tau,
                            double* ox_, double* oy_, double* oth) nogil:
    if fabs(w) < 1e-6:
        ox_[0] = x + v * tau * cos(th)
        oy_[0] = y + v * tau * sin(th)
        oth[0] = th
    else:
        ox_[0] = x + v / w * (sin(th + w * tau) - sin(th))
        oy_[0] = y - v / w * (cos(th + w * tau) - cos(th))
        oth[0] = th + w * tau


def dwa_scores(double x, double y, double th, const double[::1] vs, const double[::1] ws,
               long n_steps, double dt, const u8[:, ::1] cost, const double[:, ::1] clearance,
               double ox, double oy, double res, const double[:, ::1] plan,
               const double[::1] plan_s, double lookahead, const double[::1] weights,
               double v_max, double spacing):
    """Score every (v, w) rollout; inadmissible rollouts score +inf."""
    cdef long nv = vs.shape[0], nw = ws.shape[0], m = plan.shape[0]
    cdef long rows = cost.shape[0], cols = cost.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out_arr = np.empty((nv, nw))
    cdef double[:, ::1] out = out_arr
    cdef long i, j, k, q, nfine, jstar, look
    cdef double v, w, tau, px, py, pth, dsum, best, dx, dy, d, clear, cval, err, bearing
    cdef double sl, h = 0.6 * spacing, total_t = n_steps * dt
    cdef bint bad
    cdef long r_, c_
    for i in range(nv):
        v = vs[i]
        for j in range(nw):
            w = ws[j]
            bad = False
            # admissibility on a fine sampling of the arc
            nfine = <long> ceil(v * total_t / spacing)
            if nfine < 1:
                nfine = 1
            for k in range(nfine + 1):
                tau = total_t * k / nfine
                _arc_point(x, y, th, v, w, tau, &px, &py, &pth)
                if _box_hits_lethal(cost, px, py, ox, oy, res, h):
                    bad = True
                    break
            if bad:
                out[i, j] = INFINITY
                continue
            dsum = 0.0
            clear = INFINITY
            for k in range(1, n_steps + 1):
                tau = k * dt
                _arc_point(x, y, th, v, w, tau, &px, &py, &pth)
                best = INFINITY
                for q in range(m):
                    dx = px - plan[q, 0]
                    dy = py - plan[q, 1]
                    d = dx * dx + dy * dy
                    if d < best:
                        best = d
                dsum += sqrt(best)
                c_ = <long> floor((px - ox) / res)
                r_ = <long> floor((py - oy) / res)
                if r_ < 0 or r_ >= rows or c_ < 0 or c_ >= cols:
                    cval = 0.0
                else:
                    cval = clearance[r_, c_]
                if cval < clear:
                    clear = cval
            if clear < 0.5 * res:
                clear = 0.5 * res
            # heading error to the lookahead point past the plan point nearest the rollout end
            best = INFINITY
            jstar = 0
            for q in range(m):
                dx = px - plan[q, 0]
                dy = py - plan[q, 1]
                d = dx * dx + dy * dy
                if d < best:
                    best = d
                    jstar = q
            sl = plan_s[jstar] + lookahead
            look = m - 1
            for q in range(jstar, m):
                if plan_s[q] >= sl:
                    look = q
                    break
            dx = plan[look, 0] - px
            dy = plan[look, 1] - py
            if dx * dx + dy * dy < 1e-18:
                err = 0.0
            else:
                bearing = atan2(dy, dx)
                err = remainder(bearing - pth, 2.0 * M_PI)
                err = fabs(err)
            out[i, j] = (weights[0] * (dsum / n_steps) + weights[1] * err
                         + weights[2] / clear + weights[3] * (v_max - v))
    return out_arr


cdef long _segment_max_cost(const u8[:, ::1] cost, double x0, double y0, double x1, double y1,
                            double ox, double oy, double res) nogil:
    """Max cell cost over every cell the segment passes through (exact traversal)."""
    cdef long rows = cost.shape[0], cols = cost.shape[1]
    cdef double gx = (x0 - ox) / res, gy = (y0 - oy) / res
    cdef double ex = (x1 - ox) / res, ey = (y1 - oy) / res
    cdef double dx = ex - gx, dy = ey - gy
    cdef long ix = <long> floor(gx), iy = <long> floor(gy)
    cdef long tx = <long> floor(ex), ty = <long> floor(ey)
    cdef long sx, sy, worst
    cdef double tmx, tmy, tdx, tdy
    if ix < 0 or ix >= cols or iy < 0 or iy >= rows:
        return LETHAL
    worst = cost[iy, ix]
    if dx > 0:
        sx = 1
        tmx = (ix + 1 - gx) / dx
        tdx = 1.0 / dx
    elif dx < 0:
        sx = -1
        tmx = (ix - gx) / dx
        tdx = -1.0 / dx
    else:
        sx = 0
        tmx = INFINITY
        tdx = INFINITY
    if dy > 0:
        sy = 1
        tmy = (iy + 1 - gy) / dy
        tdy = 1.0 / dy
    elif dy < 0:
        sy = -1
        tmy = (iy - gy) / dy
        tdy = -1.0 / dy
    else:
        sy = 0
        tmy = INFINITY
        tdy = INFINITY
    while not (ix == tx and iy == ty):
        if tmx < tmy:
            if tmx > 1.0:
                break
            ix += sx
            tmx += tdx
        else:
            if tmy > 1.0:
                break
            iy += sy
            tmy += tdy
        if ix < 0 or ix >= cols or iy < 0 or iy >= rows:
            return LETHAL
        if cost[iy, ix] > worst:
            worst = cost[iy, ix]
    return worst


def shortcut(const u8[:, ::1] cost, const double[:, ::1] pts, const long[::1] pcost,
             double ox, double oy, double res):
    """Greedy line-of-sight string pulling.

    A segment may replace a stretch of the path only if it crosses no cell
    costlier than the costliest cell on that stretch. Returns kept indices.
    """
    cdef long n = pts.shape[0], a = 0, j, last, run
    kept = [0]
    while a < n - 1:
        last = a + 1
        run = pcost[a] if pcost[a] > pcost[a + 1] else pcost[a + 1]
        for j in range(a + 2, n):
            if pcost[j] > run:
                run = pcost[j]
            if run >= LETHAL:
                break
            if _segment_max_cost(cost, pts[a, 0], pts[a, 1], pts[j, 0], pts[j, 1],
                                 ox, oy, res) > run:
                break
            last = j
        kept.append(last)
        a = last
    return np.array(kept, dtype=np.int64)


def stamp_d2(int[:, ::1] d2, const long[:, ::1] cells, long rad):
    """Lower ``d2`` (squared cell distance to nearest LETHAL) around new LETHAL cells."""
    cdef long rows = d2.shape[0], cols = d2.shape[1], n = cells.shape[0]
    cdef long k, r0, c0, dr, dc, r, c, dd
    for k in range(n):
        r0 = cells[k, 0]
        c0 = cells[k, 1]
        for dr in range(-rad, rad + 1):
            r = r0 + dr
            if r < 0 or r >= rows:
                continue
            for dc in range(-rad, rad + 1):
                c = c0 + dc
                if c < 0 or c >= cols:
                    continue
                dd = dr * dr + dc * dc
                if dd < d2[r, c]:
                    d2[r, c] = dd


cdef inline long _cost_at(const u8[:, ::1] cost, double x, double y, double ox, double oy,
                          double res) nogil:
    cdef long c = <long> floor((x - ox) / res)
    cdef long r = <long> floor((y - oy) / res)
    if r < 0 or r >= cost.shape[0] or c < 0 or c >= cost.shape[1]:
        return LETHAL
    return cost[r, c]


def relax_path(const u8[:, ::1] cost, double[:, ::1] q, long iters, double step,
               double ox, double oy, double res):
    """In-place Jacobi smoothing of interior points with obstacle rejection."""
    cdef long n = q.shape[0], i, it, c
    if n < 3:
        return
    cdef cnp.ndarray[cnp.float64_t, ndim=2] cand_arr = np.empty((n, 2))
    cdef double[:, ::1] cand = cand_arr
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cur_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] cur = cur_arr
    for i in range(n):
        cur[i] = _cost_at(cost, q[i, 0], q[i, 1], ox, oy, res)
    for it in range(iters):
        for i in range(1, n - 1):
            cand[i, 0] = q[i, 0] + step * ((q[i - 1, 0] + q[i + 1, 0]) - 2.0 * q[i, 0])
            cand[i, 1] = q[i, 1] + step * ((q[i - 1, 1] + q[i + 1, 1]) - 2.0 * q[i, 1])
        for i in range(1, n - 1):
            c = _cost_at(cost, cand[i, 0], cand[i, 1], ox, oy, res)
            if c < LETHAL and (c < LETHAL - 1 or c <= cur[i]):
                q[i, 0] = cand[i, 0]
                q[i, 1] = cand[i, 1]
                cur[i] = c
