"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Each function reproduces the compiled arithmetic operation for operation so the
two backends agree bit for bit on identical inputs.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

LETHAL = 254

_NBRS = [(-1, 0, 0), (0, -1, 0), (0, 1, 0), (1, 0, 0), (-1, -1, 1), (-1, 1, 1), (1, -1, 1), (1, 1, 1)]


def dijkstra(cost, start, goal, weights):
    cost = np.asarray(cost)
    rows, cols = cost.shape
    flat = cost.ravel().tolist()
    w = [list(map(float, weights[0])), list(map(float, weights[1]))]
    g = {start: 0.0}
    pred = {start: -1}
    closed = set()
    heap = [(0.0, start)]
    found = False
    while heap:
        gu, u = heapq.heappop(heap)
        if u in closed or gu > g[u]:
            continue
        closed.add(u)
        if u == goal:
            found = True
            break
        r, c = divmod(u, cols)
        for dr, dc, diag in _NBRS:
            rr, cc = r + dr, c + dc
            if rr < 0 or rr >= rows or cc < 0 or cc >= cols:
                continue
            v = rr * cols + cc
            cv = flat[v]
            if cv >= LETHAL or v in closed:
                continue
            gv = gu + w[diag][cv]
            if gv < g.get(v, math.inf):
                g[v] = gv
                pred[v] = u
                heapq.heappush(heap, (gv, v))
    if not found:
        return math.inf, np.empty(0, dtype=np.int64)
    path = []
    v = goal
    while v != -1:
        path.append(v)
        v = pred[v]
    path.reverse()
    return g[goal], np.array(path, dtype=np.int64)


def raycast(occ, ox, oy, res, px, py, angles, max_range, discs):
    occ = np.asarray(occ)
    rows, cols = occ.shape
    out = np.empty(len(angles))
    inf = math.inf
    for b, a in enumerate(angles):
        dx, dy = math.cos(a), math.sin(a)
        best = max_range
        gx = (px - ox) / res
        gy = (py - oy) / res
        ix, iy = math.floor(gx), math.floor(gy)
        tmax_grid = max_range / res
        if ix < 0 or ix >= cols or iy < 0 or iy >= rows:
            pass
        elif occ[iy, ix]:
            best = 0.0
        else:
            if dx > 0:
                sx, tmx, tdx = 1, (ix + 1 - gx) / dx, 1.0 / dx
            elif dx < 0:
                sx, tmx, tdx = -1, (ix - gx) / dx, -1.0 / dx
            else:
                sx, tmx, tdx = 0, inf, inf
            if dy > 0:
                sy, tmy, tdy = 1, (iy + 1 - gy) / dy, 1.0 / dy
            elif dy < 0:
                sy, tmy, tdy = -1, (iy - gy) / dy, -1.0 / dy
            else:
                sy, tmy, tdy = 0, inf, inf
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
                    best = min(best, t * res)
                    break
        for cx, cy, rad in discs:
            qx, qy = px - cx, py - cy
            bb = dx * qx + dy * qy
            cc2 = qx * qx + qy * qy - rad * rad
            disc = bb * bb - cc2
            if disc < 0:
                continue
            sq = math.sqrt(disc)
            t0 = -bb - sq
            if t0 < 0:
                if -bb + sq >= 0:
                    t0 = 0.0
                else:
                    continue
            if t0 < best:
                best = t0
        out[b] = best
    return out


def _directed_sq(a: np.ndarray, b: np.ndarray) -> float:
    dx = a[:, 0, None] - b[None, :, 0]
    dy = a[:, 1, None] - b[None, :, 1]
    return float(np.max(np.min(dx * dx + dy * dy, axis=1)))


def hausdorff(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return math.sqrt(max(_directed_sq(a, b), _directed_sq(b, a)))


def _box_hits_lethal(cost, x, y, ox, oy, res, h):
    rows, cols = cost.shape
    c0 = math.floor((x - h - ox) / res)
    c1 = math.floor((x + h - ox) / res)
    r0 = math.floor((y - h - oy) / res)
    r1 = math.floor((y + h - oy) / res)
    for r in range(r0, r1 + 1):
        for c in range(c0, c1 + 1):
            if r < 0 or r >= rows or c < 0 or c >= cols:
                return True
            if cost[r, c] >= LETHAL:
                return True
    return False


def _arc_point(x, y, th, v, w, tau):
    if abs(w) < 1e-6:
        return x + v * tau * math.cos(th), y + v * tau * math.sin(th), th
    return (
        x + v / w * (math.sin(th + w * tau) - math.sin(th)),
        y - v / w * (math.cos(th + w * tau) - math.cos(th)),
        th + w * tau,
    )


def dwa_scores(x, y, th, vs, ws, n_steps, dt, cost, clearance, ox, oy, res, plan, plan_s,
               lookahead, weights, v_max, spacing):
    cost = np.asarray(cost)
    rows, cols = cost.shape
    plan = np.asarray(plan, dtype=np.float64)
    m = len(plan)
    out = np.empty((len(vs), len(ws)))
    h = 0.6 * spacing
    total_t = n_steps * dt
    for i, v in enumerate(vs):
        v = float(v)
        for j, w in enumerate(ws):
            w = float(w)
            nfine = max(1, math.ceil(v * total_t / spacing))
            bad = False
            for k in range(nfine + 1):
                px, py, _ = _arc_point(x, y, th, v, w, total_t * k / nfine)
                if _box_hits_lethal(cost, px, py, ox, oy, res, h):
                    bad = True
                    break
            if bad:
                out[i, j] = math.inf
                continue
            dsum = 0.0
            clear = math.inf
            pts = [_arc_point(x, y, th, v, w, k * dt) for k in range(1, n_steps + 1)]
            arr = np.array([(p[0], p[1]) for p in pts])
            ddx = arr[:, 0, None] - plan[None, :, 0]
            ddy = arr[:, 1, None] - plan[None, :, 1]
            nearest = np.min(ddx * ddx + ddy * ddy, axis=1)
            for k, (px, py, _) in enumerate(pts):
                dsum += math.sqrt(float(nearest[k]))
                c_ = math.floor((px - ox) / res)
                r_ = math.floor((py - oy) / res)
                cval = 0.0 if (r_ < 0 or r_ >= rows or c_ < 0 or c_ >= cols) else float(clearance[r_, c_])
                if cval < clear:
                    clear = cval
            clear = max(clear, 0.5 * res)
            px, py, pth = pts[-1]
            d_end = (px - plan[:, 0]) ** 2 + (py - plan[:, 1]) ** 2
            jstar = int(np.argmin(d_end))
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
                err = abs(math.remainder(math.atan2(dy, dx) - pth, 2.0 * math.pi))
            out[i, j] = (
                weights[0] * (dsum / n_steps)
                + weights[1] * err
                + weights[2] / clear
                + weights[3] * (v_max - v)
            )
    return out


def _segment_max_cost(cost, x0, y0, x1, y1, ox, oy, res):
    rows, cols = cost.shape
    inf = math.inf
    gx, gy = (x0 - ox) / res, (y0 - oy) / res
    ex, ey = (x1 - ox) / res, (y1 - oy) / res
    dx, dy = ex - gx, ey - gy
    ix, iy = math.floor(gx), math.floor(gy)
    tx, ty = math.floor(ex), math.floor(ey)
    if ix < 0 or ix >= cols or iy < 0 or iy >= rows:
        return LETHAL
    worst = int(cost[iy, ix])
    if dx > 0:
        sx, tmx, tdx = 1, (ix + 1 - gx) / dx, 1.0 / dx
    elif dx < 0:
        sx, tmx, tdx = -1, (ix - gx) / dx, -1.0 / dx
    else:
        sx, tmx, tdx = 0, inf, inf
    if dy > 0:
        sy, tmy, tdy = 1, (iy + 1 - gy) / dy, 1.0 / dy
    elif dy < 0:
        sy, tmy, tdy = -1, (iy - gy) / dy, -1.0 / dy
    else:
        sy, tmy, tdy = 0, inf, inf
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
        worst = max(worst, int(cost[iy, ix]))
    return worst


def shortcut(cost, pts, pcost, ox, oy, res):
    cost = np.asarray(cost)
    n = len(pts)
    kept = [0]
    a = 0
    while a < n - 1:
        last = a + 1
        run = max(int(pcost[a]), int(pcost[a + 1]))
        for j in range(a + 2, n):
            run = max(run, int(pcost[j]))
            if run >= LETHAL:
                break
            if _segment_max_cost(cost, pts[a][0], pts[a][1], pts[j][0], pts[j][1], ox, oy, res) > run:
                break
            last = j
        kept.append(last)
        a = last
    return np.array(kept, dtype=np.int64)


def stamp_d2(d2, cells, rad):
    rows, cols = d2.shape
    offs = np.arange(-rad, rad + 1)
    kernel = (offs[:, None] ** 2 + offs[None, :] ** 2).astype(d2.dtype)
    for r0, c0 in cells:
        r_lo, r_hi = max(r0 - rad, 0), min(r0 + rad + 1, rows)
        c_lo, c_hi = max(c0 - rad, 0), min(c0 + rad + 1, cols)
        k = kernel[r_lo - (r0 - rad): r_hi - (r0 - rad), c_lo - (c0 - rad): c_hi - (c0 - rad)]
        np.minimum(d2[r_lo:r_hi, c_lo:c_hi], k, out=d2[r_lo:r_hi, c_lo:c_hi])


def _costs_at(cost, pts, ox, oy, res):
    rows = np.floor((pts[:, 1] - oy) / res).astype(np.int64)
    cols = np.floor((pts[:, 0] - ox) / res).astype(np.int64)
    inside = (rows >= 0) & (rows < cost.shape[0]) & (cols >= 0) & (cols < cost.shape[1])
    out = np.full(len(pts), LETHAL, dtype=np.int64)
    out[inside] = cost[rows[inside], cols[inside]]
    return out


def relax_path(cost, q, iters, step, ox, oy, res):
    cost = np.asarray(cost)
    if len(q) < 3:
        return
    cur = _costs_at(cost, q, ox, oy, res)
    for _ in range(iters):
        cand = q[1:-1] + step * ((q[:-2] + q[2:]) - 2.0 * q[1:-1])
        c = _costs_at(cost, cand, ox, oy, res)
        ok = (c < LETHAL) & ((c < LETHAL - 1) | (c <= cur[1:-1]))
        q[1:-1][ok] = cand[ok]
        cur[1:-1][ok] = c[ok]
