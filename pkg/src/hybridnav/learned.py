"""Dense network with hand-written backprop, plus the BC and gate training loops."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, NamedTuple, Sequence

import numpy as np

from hybridnav.core_types import (
    HISTORY, OMEGA_MAX, PLAN_POINTS, V_MAX, Command, GlobalPlan, Observation, arc_lengths,
    resample_plan, to_robot_frame, to_world_frame,
)

MODEL_VERSION = "1.0.0"
FEATURE_DIM = 184
BC_WAYPOINTS = 16
GOAL_SCALE = 10.0
PURSUIT_LOOKAHEAD = 0.8


# --------------------------------------------------------------------------- features


def features(obs: Observation) -> np.ndarray:
    """184-vector: 5 x 36 pooled scans, robot-frame goal, normalized last command.

    Goals farther than 10 m are pulled in along their bearing so every entry
    stays in [-1, 1].
    """
    if len(obs.scan_history) != HISTORY:
        raise ValueError(f"expected {HISTORY} scans, got {len(obs.scan_history)}")
    out = np.empty(FEATURE_DIM)
    for k, scan in enumerate(obs.scan_history):
        r = scan.ranges
        if len(r) % 2:
            raise ValueError("scan must have an even number of beams")
        out[k * 36:(k + 1) * 36] = np.minimum(r[0::2], r[1::2]) / scan.max_range
    gx, gy = to_robot_frame(obs.goal.xy, obs.pose)
    n = math.hypot(gx, gy)
    if n > GOAL_SCALE:
        gx, gy = gx * GOAL_SCALE / n, gy * GOAL_SCALE / n
    out[180] = gx / GOAL_SCALE
    out[181] = gy / GOAL_SCALE
    out[182] = obs.last_command.v / V_MAX
    out[183] = obs.last_command.omega / OMEGA_MAX
    return out


def bc_target(demo_plan: GlobalPlan, pose) -> np.ndarray:
    """Demo plan as 16 robot-frame waypoints, encoded as step displacements."""
    wp = to_robot_frame(resample_plan(demo_plan, BC_WAYPOINTS).points, pose)
    disp = np.diff(np.vstack([[0.0, 0.0], wp]), axis=0)
    return disp.ravel()


def decode_waypoints(out: np.ndarray) -> np.ndarray:
    return np.cumsum(np.asarray(out, dtype=np.float64).reshape(-1, BC_WAYPOINTS, 2), axis=1).reshape(
        np.shape(out)[:-1] + (BC_WAYPOINTS, 2))


# --------------------------------------------------------------------------- network


@dataclass
class Mlp:
    sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    meta: dict = field(default_factory=dict)

    @classmethod
    def init(cls, sizes: Sequence[int], seed: int) -> "Mlp":
        rng = np.random.default_rng(seed)
        ws, bs = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            lim = math.sqrt(6.0 / (fan_in + fan_out))
            ws.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
            bs.append(np.zeros(fan_out))
        return cls(tuple(int(s) for s in sizes), ws, bs)

    @classmethod
    def zeros(cls, sizes: Sequence[int]) -> "Mlp":
        return cls(tuple(sizes), [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
                   [np.zeros(b) for b in sizes[1:]])

    def copy(self) -> "Mlp":
        return Mlp(self.sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases],
                   dict(self.meta))

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def to_dict(self) -> dict[str, Any]:
        return {"version": MODEL_VERSION, "sizes": list(self.sizes),
                "weights": [w.ravel().tolist() for w in self.weights],
                "biases": [b.tolist() for b in self.biases], "meta": self.meta}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def loads(cls, text: str) -> "Mlp":
        d = json.loads(text)
        if "version" not in d:
            raise ValueError("model file lacks a version field")
        if d["version"].split(".")[0] != MODEL_VERSION.split(".")[0]:
            raise ValueError(f"unsupported model version {d['version']}")
        sizes = tuple(d["sizes"])
        ws = [np.array(w, dtype=np.float64).reshape(a, b)
              for w, a, b in zip(d["weights"], sizes[:-1], sizes[1:])]
        bs = [np.array(b, dtype=np.float64) for b in d["biases"]]
        return cls(sizes, ws, bs, d.get("meta", {}))

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()


def forward(net: Mlp, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.sizes[0]:
        raise ValueError(f"input width {x.shape[-1]} does not match layer size {net.sizes[0]}")
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0.0)
    return h


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-sample softmax cross-entropy."""
    z = logits - np.max(logits, axis=-1, keepdims=True)
    lse = np.log(np.sum(np.exp(z), axis=-1))
    return lse - z[np.arange(len(labels)), labels]


def loss_and_grad(net: Mlp, X, Y, kind: str, sample_weight=None):
    """Mean batch loss and its exact gradient as [(dW, db), ...]."""
    if kind not in ("mse", "cross_entropy"):
        raise ValueError(f"unknown loss {kind!r}")
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    w_s = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    acts = [X]
    pre = []
    h = X
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < last else z
        acts.append(h)
    out = acts[-1]
    if kind == "mse":
        Y = np.asarray(Y, dtype=np.float64)
        r = out - Y
        m = out.shape[1]
        loss = float(np.sum(w_s[:, None] * r * r) / (n * m))
        delta = (2.0 / (n * m)) * w_s[:, None] * r
    else:
        labels = np.asarray(Y, dtype=np.int64)
        ce = cross_entropy(out, labels)
        loss = float(np.sum(w_s * ce) / n)
        p = softmax(out)
        p[np.arange(n), labels] -= 1.0
        delta = (w_s[:, None] / n) * p
    grads = [None] * len(net.weights)
    for i in range(last, -1, -1):
        grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ net.weights[i].T) * (pre[i - 1] > 0.0)
    return loss, grads


def grad(net: Mlp, batch, loss_kind: str):
    """Gradient of the mean batch loss; ``batch`` is (X, Y) or (X, Y, weights)."""
    X, Y = batch[0], batch[1]
    w = batch[2] if len(batch) > 2 else None
    return loss_and_grad(net, X, Y, loss_kind, w)[1]


def batch_loss(net: Mlp, X, Y, kind: str, sample_weight=None) -> float:
    out = forward(net, X)
    n = len(out)
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    if kind == "mse":
        r = out - np.asarray(Y, dtype=np.float64)
        return float(np.sum(w[:, None] * r * r) / (n * out.shape[1]))
    return float(np.sum(w * cross_entropy(out, np.asarray(Y, dtype=np.int64))) / n)


# --------------------------------------------------------------------------- training


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch: int = 64
    epochs: int = 50
    seed: int = 0
    val_fraction: float = 0.1
    hidden: tuple[int, ...] = (128, 128)

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TrainConfig":
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        return cls(**d)


class Adam:
    def __init__(self, net: Mlp, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.m = [np.zeros_like(p) for p in net.params()]
        self.v = [np.zeros_like(p) for p in net.params()]

    def step(self, net: Mlp, grads) -> None:
        c = self.cfg
        self.t += 1
        flat = []
        for gw, gb in grads:
            flat.extend((gw, gb))
        corr1 = 1.0 - c.beta1 ** self.t
        corr2 = 1.0 - c.beta2 ** self.t
        for p, g, m, v in zip(net.params(), flat, self.m, self.v):
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p -= c.lr * (m / corr1) / (np.sqrt(v / corr2) + c.eps)


class TrainResult(NamedTuple):
    net: Mlp
    curve: list[dict]
    best_epoch: int
    best_metric: float


def _canonical_order(X: np.ndarray, Y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Content-defined order so results do not depend on input order."""
    cols = np.column_stack([X, np.asarray(Y, dtype=np.float64).reshape(len(X), -1), w])
    return np.lexsort(cols.T[::-1])


def _fit(X, Y, kind: str, cfg: TrainConfig, out_dim: int, sample_weight=None) -> TrainResult:
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    if cfg.epochs < 1:
        raise ValueError("no training performed")
    w_all = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    order = _canonical_order(X, Y, w_all)
    X, Y, w_all = X[order], np.asarray(Y)[order], w_all[order]
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(n)
    n_val = max(1, int(round(cfg.val_fraction * n))) if n > 1 else 0
    val_idx, tr_idx = np.sort(perm[:n_val]), np.sort(perm[n_val:])
    if n_val == 0:
        val_idx = tr_idx
    Xt, Yt, wt = X[tr_idx], Y[tr_idx], w_all[tr_idx]
    Xv, Yv = X[val_idx], Y[val_idx]
    net = Mlp.init((X.shape[1], *cfg.hidden, out_dim), cfg.seed)
    opt = Adam(net, cfg)
    best = None
    curve = []
    for epoch in range(cfg.epochs):
        sh = rng.permutation(len(Xt))
        tr_loss = 0.0
        for a in range(0, len(Xt), cfg.batch):
            idx = sh[a:a + cfg.batch]
            loss, g = loss_and_grad(net, Xt[idx], Yt[idx], kind, wt[idx])
            tr_loss += loss * len(idx)
            opt.step(net, g)
        out_v = forward(net, Xv)
        if kind == "mse":
            metric = float(np.mean((out_v - Yv) ** 2))
            better = best is None or metric < best[1]
        else:
            metric = float(np.mean(np.argmax(out_v, axis=1) == Yv))
            better = best is None or metric > best[1]
        curve.append({"epoch": epoch + 1, "train_loss": tr_loss / len(Xt), "val_metric": metric})
        if better:
            best = (net.copy(), metric, epoch + 1)
    return TrainResult(best[0], curve, best[2], best[1])


def train_bc(X, targets, cfg: TrainConfig | None = None) -> TrainResult:
    cfg = cfg or TrainConfig()
    X = np.asarray(X, dtype=np.float64).reshape(-1, FEATURE_DIM)
    if len(X) == 0:
        raise ValueError("no non-compliant data")
    if len(X) < cfg.batch:
        raise ValueError(f"need at least {cfg.batch} samples, got {len(X)}")
    res = _fit(X, np.asarray(targets, dtype=np.float64), "mse", cfg, 2 * BC_WAYPOINTS)
    res.net.meta.update({"kind": "bc", "seed": cfg.seed, "best_epoch": res.best_epoch,
                         "val_mse": res.best_metric})
    return res


def inverse_frequency_weights(labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.bincount(labels, minlength=2).astype(np.float64)
    if np.any(counts == 0):
        raise ValueError("gate training needs both classes")
    return (len(labels) / (2.0 * counts))[labels]


def train_gate(X, labels, cfg: TrainConfig | None = None) -> TrainResult:
    cfg = cfg or TrainConfig()
    labels = np.asarray(labels, dtype=np.int64)
    w = inverse_frequency_weights(labels)
    res = _fit(np.asarray(X, dtype=np.float64).reshape(-1, FEATURE_DIM), labels, "cross_entropy",
               cfg, 2, w)
    res.net.meta.update({"kind": "gate", "seed": cfg.seed, "best_epoch": res.best_epoch,
                         "val_accuracy": res.best_metric})
    return res


# --------------------------------------------------------------------------- inference


class BcOutput(NamedTuple):
    plan: GlobalPlan | None
    points: np.ndarray
    command: Command
    degenerate: bool


def pursuit_command(waypoints: np.ndarray, lookahead: float = PURSUIT_LOOKAHEAD) -> Command:
    """Pure pursuit toward the point ``lookahead`` metres along robot-frame waypoints."""
    pts = np.vstack([[0.0, 0.0], waypoints])
    s = arc_lengths(pts)
    if not s[-1] > 1e-9:
        return Command(0.0, 0.0)
    tgt = np.array([np.interp(min(lookahead, s[-1]), s, pts[:, k]) for k in range(2)])
    dist = math.hypot(*tgt)
    if dist < 1e-9:
        return Command(0.0, 0.0)
    bearing = math.atan2(tgt[1], tgt[0])
    if abs(bearing) > 0.8:
        return Command(0.0, 2.5 * bearing).clamped()
    v = V_MAX * math.cos(bearing)
    return Command(v, v * 2.0 * tgt[1] / (dist * dist)).clamped()


def decode_bc(out: np.ndarray, pose) -> BcOutput:
    wp = decode_waypoints(out)
    world = np.asarray(to_world_frame(wp, pose))
    cmd = pursuit_command(wp)
    try:
        plan = resample_plan(GlobalPlan.from_points(world), PLAN_POINTS)
    except ValueError:
        return BcOutput(None, np.repeat(world[:1], PLAN_POINTS, axis=0), cmd, True)
    return BcOutput(plan, plan.points, cmd, False)


def bc_predict(net: Mlp, obs: Observation) -> BcOutput:
    return decode_bc(forward(net, features(obs)), obs.pose)


def gate_probability(logits: np.ndarray) -> np.ndarray:
    return softmax(np.asarray(logits, dtype=np.float64))[..., 1]


def gate_predict(net: Mlp, obs: Observation) -> float:
    """P(classical is compliant) for one observation."""
    return float(gate_probability(forward(net, features(obs))))
