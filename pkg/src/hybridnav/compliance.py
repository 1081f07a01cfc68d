"""Compliance metrics: Hausdorff and command distances, alpha, CDFs, one-way ANOVA."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from hybridnav import kernels
from hybridnav.core_types import Command, GlobalPlan

GLOBAL_THRESHOLDS = np.round(np.arange(0, 51) * 0.1, 10)
LOCAL_THRESHOLDS = np.round(np.arange(0, 51) * 0.05, 10)
REPORT_EPS = (1.0, 3.0)


class ComplianceError(ValueError):
    pass


def _points(p) -> np.ndarray:
    pts = p.points if isinstance(p, GlobalPlan) else np.asarray(p, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ComplianceError("degenerate plan")
    return np.ascontiguousarray(pts, dtype=np.float64)


def hausdorff(a, b) -> float:
    """Undirected Hausdorff distance between two point sequences."""
    return kernels.hausdorff(_points(a), _points(b))


def l2_command(a: Command, b: Command) -> float:
    return math.hypot(a.v - b.v, a.omega - b.omega)


def per_step_distance(planner_behavior, demo_behavior, level: str) -> float:
    if level == "global":
        if not isinstance(planner_behavior, GlobalPlan) or not isinstance(demo_behavior, GlobalPlan):
            raise ComplianceError("global level compares two GlobalPlans")
        return hausdorff(planner_behavior, demo_behavior)
    if level == "local":
        if not isinstance(planner_behavior, Command) or not isinstance(demo_behavior, Command):
            raise ComplianceError("local level compares two Commands")
        return l2_command(planner_behavior, demo_behavior)
    raise ComplianceError(f"unknown level {level!r}")


@dataclass(frozen=True)
class ComplianceRecord:
    step: int
    d_global: float
    d_local: float
    compliant: bool


def make_records(d_global: Sequence[float], d_local: Sequence[float], eps: float) -> list[ComplianceRecord]:
    return [ComplianceRecord(i, float(g), float(l), bool(g <= eps))
            for i, (g, l) in enumerate(zip(d_global, d_local))]


def alpha(records, eps: float) -> float:
    """Fraction of steps with d_global <= eps. Accepts records or raw distances."""
    if len(records) == 0:
        raise ComplianceError("no records")
    if isinstance(records[0], ComplianceRecord):
        ds = np.array([r.d_global for r in records])
    else:
        ds = np.asarray(records, dtype=np.float64)
    return int(np.count_nonzero(ds <= eps)) / len(ds)


class CdfCurve(NamedTuple):
    thresholds: np.ndarray
    fractions: np.ndarray


def cdf(ds, thresholds) -> CdfCurve:
    ds = np.sort(np.asarray(ds, dtype=np.float64))
    th = np.asarray(thresholds, dtype=np.float64)
    if np.any(np.diff(th) < 0):
        raise ComplianceError("thresholds must be ascending")
    if len(ds) == 0:
        return CdfCurve(th, np.zeros(len(th)))
    counts = np.searchsorted(ds, th, side="right")
    return CdfCurve(th, counts / len(ds))


# --------------------------------------------------------------------------- ANOVA


def _betacf(a: float, b: float, x: float, tol: float = 1e-15, max_iter: int = 10000) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_sf(f: float, d1: float, d2: float) -> float:
    """Upper tail P(F > f) of the F distribution."""
    if math.isinf(f):
        return 0.0
    if f <= 0.0:
        return 1.0
    return betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))


class AnovaResult(NamedTuple):
    f: float
    p: float
    df_between: int
    df_within: int


def one_way_anova(groups: Sequence[Sequence[float]]) -> AnovaResult:
    gs = [np.asarray(g, dtype=np.float64) for g in groups]
    if len(gs) < 2:
        raise ComplianceError("need at least 2 groups")
    if any(len(g) < 2 for g in gs):
        raise ComplianceError("each group needs at least 2 samples")
    n = sum(len(g) for g in gs)
    k = len(gs)
    grand = sum(float(g.sum()) for g in gs) / n
    means = [float(g.mean()) for g in gs]
    ssb = sum(len(g) * (m - grand) ** 2 for g, m in zip(gs, means))
    ssw = sum(float(((g - m) ** 2).sum()) for g, m in zip(gs, means))
    dfb, dfw = k - 1, n - k
    # relative cutoffs keep F invariant to shifts that leave rounding residue
    scale = sum(float((g ** 2).sum()) for g in gs) + 1.0
    if ssb <= 1e-12 * scale:
        return AnovaResult(0.0, 1.0, dfb, dfw)
    if ssw <= 1e-12 * scale:
        return AnovaResult(math.inf, 0.0, dfb, dfw)
    f = (ssb / dfb) / (ssw / dfw)
    return AnovaResult(f, f_sf(f, dfb, dfw), dfb, dfw)


def anova_table(rows: Iterable[tuple[str, str, float]]) -> list[dict]:
    """Per question: F, p and the 5% significance flag. Rows are (group, question, score)."""
    by_q: dict[str, dict[str, list[float]]] = {}
    for group, question, score in rows:
        by_q.setdefault(question, {}).setdefault(group, []).append(float(score))
    out = []
    for q in sorted(by_q):
        groups = [by_q[q][g] for g in sorted(by_q[q])]
        res = one_way_anova(groups)
        out.append({"question": q, "groups": len(groups), "F": res.f, "p": res.p,
                    "significant": res.p < 0.05})
    return out


# --------------------------------------------------------------------------- reports


def records_csv(rows: Iterable[tuple[str, str, int, float, float, bool]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["planner", "split", "step", "d_global", "d_local", "compliant"])
    for planner, split, step, dg, dl, ok in rows:
        w.writerow([planner, split, step, repr(float(dg)), repr(float(dl)), int(ok)])
    return buf.getvalue()


def cdf_csv(curves: Iterable[tuple[str, str, str, CdfCurve]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["planner", "split", "level", "threshold", "fraction"])
    for planner, split, level, curve in curves:
        for t, f in zip(curve.thresholds, curve.fractions):
            w.writerow([planner, split, level, repr(float(t)), repr(float(f))])
    return buf.getvalue()
