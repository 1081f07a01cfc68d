"""Independent reference implementations used only by the tests.

Each oracle is written directly from the defining formula, sharing no code
with the package beyond plain data types.
"""

from __future__ import annotations

import heapq
import math
from fractions import Fraction

import numpy as np


def ucs_cost(cells: np.ndarray, start: tuple[int, int], goal: tuple[int, int], res: float,
             divisor: float = 64.0) -> float:
    """Uniform-cost search over 8-connected cells with edge cost step*(1 + c/divisor)."""
    rows, cols = cells.shape
    best = {start: 0.0}
    heap = [(0.0, start)]
    done = set()
    while heap:
        g, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        if node == goal:
            return g
        r, c = node
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                nr, nc = r + dr, c + dc
                if not (0 <= nr < rows and 0 <= nc < cols) or cells[nr, nc] >= 254:
                    continue
                step = res * math.sqrt(2.0) if dr and dc else res
                ng = g + step * (1.0 + cells[nr, nc] / divisor)
                if ng < best.get((nr, nc), math.inf):
                    best[(nr, nc)] = ng
                    heapq.heappush(heap, (ng, (nr, nc)))
    return math.inf


def path_cost(cells: np.ndarray, path_cells, res: float, divisor: float = 64.0) -> float:
    """Sum of edge costs along a flat-index cell path, in traversal order."""
    cols = cells.shape[1]
    total = 0.0
    for a, b in zip(path_cells[:-1], path_cells[1:]):
        ra, ca = divmod(int(a), cols)
        rb, cb = divmod(int(b), cols)
        assert max(abs(ra - rb), abs(ca - cb)) == 1
        step = res * math.sqrt(2.0) if ra != rb and ca != cb else res
        total += step * (1.0 + cells[rb, cb] / divisor)
    return total


def brute_hausdorff(a, b) -> float:
    a = [tuple(p) for p in np.asarray(a)]
    b = [tuple(p) for p in np.asarray(b)]

    def directed(x, y):
        worst = 0.0
        for p in x:
            best = math.inf
            for q in y:
                d = (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2
                if d < best:
                    best = d
            worst = max(worst, best)
        return worst

    return math.sqrt(max(directed(a, b), directed(b, a)))


def sort_count_cdf(ds, thresholds) -> list[float]:
    ds = sorted(float(d) for d in ds)
    out = []
    for t in thresholds:
        k = 0
        while k < len(ds) and ds[k] <= t:
            k += 1
        out.append(k / len(ds))
    return out


def hand_anova_f(groups) -> float:
    """F from exact rational sums of squares."""
    gs = [[Fraction(str(v)) for v in g] for g in groups]
    n = sum(len(g) for g in gs)
    grand = sum(sum(g) for g in gs) / n
    ssb = sum(len(g) * (sum(g) / len(g) - grand) ** 2 for g in gs)
    ssw = sum(sum((v - sum(g) / len(g)) ** 2 for v in g) for g in gs)
    return float((ssb / (len(gs) - 1)) / (ssw / (n - len(gs))))


def window_choices(votes, ranges, cfg, dt: float) -> list[str]:
    """Step-by-step replay of the voting and override rules with integer time."""
    out = []
    window: list[int] = []
    lock_steps = math.ceil(cfg.t_lock / dt - 1e-9)
    locked_until = -1  # last step index still forced to classical
    for k, (v, mr) in enumerate(zip(votes, ranges)):
        window.append(v)
        window = window[-cfg.n:]
        padded = [1] * (cfg.n - len(window)) + window
        if mr < cfg.p:
            locked_until = k + lock_steps - 1
            out.append("classical")
        elif k <= locked_until:
            out.append("classical")
        else:
            zeros = padded.count(0)
            out.append("learned" if Fraction(zeros, cfg.n) >= Fraction(str(cfg.r)) else "classical")
    return out


def arc_walk_goal(points: np.ndarray, t: int, horizon: float) -> int:
    """Walk forward accumulating segment lengths one at a time."""
    acc = 0.0
    for i in range(t + 1, len(points)):
        acc += math.hypot(points[i][0] - points[i - 1][0], points[i][1] - points[i - 1][1])
        if acc >= horizon:
            return i
    return len(points) - 1


def resample_walk(points, count: int) -> np.ndarray:
    """Arc-length resampling by explicit segment walking."""
    pts = [tuple(map(float, p)) for p in points]
    seg = [math.dist(a, b) for a, b in zip(pts[:-1], pts[1:])]
    total = sum(seg)
    out = []
    for k in range(count):
        s = total * k / (count - 1)
        acc = 0.0
        for i, L in enumerate(seg):
            if acc + L >= s or i == len(seg) - 1:
                f = 0.0 if L == 0 else min(1.0, (s - acc) / L)
                a, b = pts[i], pts[i + 1]
                out.append((a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])))
                break
            acc += L
    out[0], out[-1] = pts[0], pts[-1]
    return np.array(out)


def ray_aabb(px, py, ang, x0, y0, x1, y1) -> float:
    """Distance from an interior point to the boundary of an axis-aligned box."""
    dx, dy = math.cos(ang), math.sin(ang)
    ts = []
    if abs(dx) > 1e-15:
        ts += [(x0 - px) / dx, (x1 - px) / dx]
    if abs(dy) > 1e-15:
        ts += [(y0 - py) / dy, (y1 - py) / dy]
    best = math.inf
    for t in ts:
        if t <= 0:
            continue
        x, y = px + t * dx, py + t * dy
        if x0 - 1e-9 <= x <= x1 + 1e-9 and y0 - 1e-9 <= y <= y1 + 1e-9:
            best = min(best, t)
    return best


def mlp_forward_loop(sizes, weights, biases, x) -> list[float]:
    """Scalar loops over the affine+ReLU layers."""
    h = [float(v) for v in x]
    for li, (w, b) in enumerate(zip(weights, biases)):
        out = []
        for j in range(w.shape[1]):
            s = float(b[j])
            for i in range(w.shape[0]):
                s += h[i] * float(w[i, j])
            out.append(s)
        h = [max(0.0, v) for v in out] if li < len(weights) - 1 else out
    return h


def fd_gradient_error(net, X, Y, kind, loss_fn, grads, h: float = 1e-5) -> float:
    """Worst relative error between analytic grads and central differences."""
    worst = 0.0
    flat = []
    for gw, gb in grads:
        flat.extend((gw, gb))
    for p, g in zip(net.params(), flat):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            keep = p[i]
            p[i] = keep + h
            up = loss_fn(net, X, Y, kind)
            p[i] = keep - h
            down = loss_fn(net, X, Y, kind)
            p[i] = keep
            num = (up - down) / (2.0 * h)
            ana = float(g[i])
            scale = max(abs(num), abs(ana), 1e-7)
            worst = max(worst, abs(num - ana) / scale)
    return worst
