"""Command-line front end: gen, label, train, eval, sim, anova.

Exit codes: 0 success, 1 usage error, 2 data error, 3 run failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from hybridnav import compliance
from hybridnav.config import RunConfig, load_config
from hybridnav.dataset import (
    DataError, SplitConfig, TEST_SPLITS, atomic_write, build_splits,
    label_dataset, load_labeled, load_manifest, manifest_hash, sha256_bytes,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUN = 0, 1, 2, 3
PLANNERS = ("classical", "bc", "hybrid")
EXTRA_PLANNERS = ("classical_social", "hybrid_oracle")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _say(msg: str) -> None:
    print(msg, flush=True)


def _config(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_(master_seed=args.seed)
    return cfg


# --------------------------------------------------------------------------- gen


def cmd_gen(args) -> int:
    cfg = _config(args)
    id_n = cfg.id_episodes if args.id_episodes is None else args.id_episodes
    ood_n = cfg.ood_episodes if args.ood_episodes is None else args.ood_episodes
    split = SplitConfig(cfg.master_seed, id_n, ood_n, cfg.test_fraction)
    manifest = build_splits(split, args.out)
    if manifest["excluded"]:
        for e in manifest["excluded"]:
            print(f"recording failed: {e['file']} ({e['status']})", file=sys.stderr)
        return EXIT_RUN
    _say(f"episodes: {len(manifest['episodes'])}")
    _say(f"manifest sha256: {manifest_hash(manifest)}")
    return EXIT_OK


# --------------------------------------------------------------------------- label


def _label_dir(manifest: Path, given: str | None) -> Path:
    return Path(given) if given else manifest.parent / "labeled"


def cmd_label(args) -> int:
    cfg = _config(args)
    eps = cfg.eps if args.eps is None else args.eps
    if not eps >= 0:
        raise UsageError("--eps must be non-negative")
    manifest = Path(args.manifest)
    out = _label_dir(manifest, args.out)
    summary = label_dataset(manifest, out, cfg.planner, eps, args.social_layer or cfg.social_layer)
    for split, info in summary["splits"].items():
        line = (f"{split}: steps={info['steps']} |D^C|={info['n_compliant']} "
                f"|D^N|={info['n_noncompliant']} alpha={info['alpha']:.4f}")
        if "alpha_social" in info:
            line += f" alpha_social={info['alpha_social']:.4f}"
        if info["dropped"]:
            line += f" dropped={info['dropped']}"
        _say(line)
    _say(f"summary sha256: {sha256_bytes((out / 'summary.json').read_bytes())}")
    return EXIT_OK


# --------------------------------------------------------------------------- train


def cmd_train(args) -> int:
    from hybridnav.learned import train_bc, train_gate

    cfg = _config(args)
    tcfg = cfg.train
    if args.seed is not None:
        tcfg = type(tcfg).from_dict({**tcfg.to_dict(), "seed": args.seed})
    if args.epochs is not None:
        if args.epochs < 1:
            raise DataError("no training performed")
        tcfg = type(tcfg).from_dict({**tcfg.to_dict(), "epochs": args.epochs})
    labeled = Path(args.labeled)
    data = load_labeled(labeled, "id_train")
    summary_hash = sha256_bytes((labeled / "summary.json").read_bytes())
    models = Path(args.out) if args.out else labeled.parent / "models"
    if args.which == "bc":
        if args.subset == "nc":
            mask = data["c"] == 0
            if not mask.any():
                raise DataError("no non-compliant data")
            name = "bc_n"
        else:
            mask = np.ones(len(data["c"]), dtype=bool)
            name = "bc"
        try:
            res = train_bc(data["features"][mask], data["bc_target"][mask], tcfg)
        except ValueError as exc:
            raise DataError(str(exc)) from None
        metric = f"val_mse={res.best_metric:.6f}"
    else:
        try:
            res = train_gate(data["features"], data["c"], tcfg)
        except ValueError as exc:
            raise DataError(str(exc)) from None
        name = "gate"
        test = load_labeled(labeled, "id_test")
        from hybridnav.hybrid import gate_classes

        acc = float(np.mean(gate_classes(res.net, test["features"]) == test["c"]))
        res.net.meta["id_test_accuracy"] = acc
        metric = f"val_accuracy={res.best_metric:.4f} id_test_accuracy={acc:.4f}"
    res.net.meta.update({"dataset_sha256": summary_hash, "train": tcfg.to_dict(),
                         "samples": int(np.count_nonzero(mask)) if args.which == "bc"
                         else int(len(data["c"]))})
    atomic_write(models / f"{name}.json", res.net.dumps())
    rows = ["epoch,train_loss,val_metric"] + [
        f"{r['epoch']},{r['train_loss']!r},{r['val_metric']!r}" for r in res.curve]
    atomic_write(models / f"{name}_curve.csv", "\n".join(rows) + "\n")
    _say(f"{name}: best_epoch={res.best_epoch} {metric}")
    _say(f"model sha256: {res.net.digest()}")
    return EXIT_OK


# --------------------------------------------------------------------------- eval


def _load_model(models: Path, *names: str):
    from hybridnav.learned import Mlp

    for n in names:
        p = models / f"{n}.json"
        if p.exists():
            try:
                return Mlp.loads(p.read_text()), n
            except (ValueError, KeyError) as exc:
                raise DataError(f"bad model file {p}: {exc}") from None
    raise DataError(f"missing model: {models / (names[0] + '.json')}")


def cmd_eval(args) -> int:
    from hybridnav.hybrid import run_playback_eval
    from hybridnav.svg import cdf_svg

    cfg = _config(args)
    planners = tuple(p.strip() for p in args.planners.split(",") if p.strip())
    bad = [p for p in planners if p not in PLANNERS + EXTRA_PLANNERS]
    if bad or not planners:
        raise UsageError(f"unknown planners: {bad}")
    manifest_path = Path(args.manifest)
    manifest = load_manifest(manifest_path)
    labeled = _label_dir(manifest_path, args.labeled)
    lsum = json.loads((labeled / "summary.json").read_text())
    if lsum["manifest_sha256"] != manifest_hash(manifest):
        raise DataError("labeled data was produced from a different manifest")
    models = Path(args.models)
    bc = bc_h = gate = None
    digests = {}
    if "bc" in planners:
        bc, name = _load_model(models, "bc", "bc_n")
        digests[name] = bc.digest()
    if "hybrid" in planners or "hybrid_oracle" in planners:
        bc_h, name = _load_model(models, "bc_n", "bc")
        digests[name] = bc_h.digest()
        gate, _ = _load_model(models, "gate")
        digests["gate"] = gate.digest()
    core = tuple(p for p in planners if p in PLANNERS)
    if "hybrid_oracle" in planners and "hybrid" not in core:
        core = core + ("hybrid",)
    res = run_playback_eval(labeled, core, bc, bc_h, gate, TEST_SPLITS, extras=True)
    eps_lab = float(lsum["eps"])
    out = Path(args.out)
    rows, curves, svg_g, svg_l = [], [], [], []
    summary = {"config_sha256": cfg.digest(), "manifest_sha256": manifest_hash(manifest),
               "labeled_sha256": sha256_bytes((labeled / "summary.json").read_bytes()),
               "models": digests, "eps_label": eps_lab, "alpha": {}, "alpha_extra": {},
               "steps": res.steps, "gate_accuracy": res.gate_accuracy}
    for split in TEST_SPLITS:
        dist = res.distances[split]
        for p in planners:
            if p not in dist:
                raise DataError(f"planner {p} unavailable on {split} (relabel with --social-layer)")
            d = dist[p]
            for i, (g, l) in enumerate(zip(d.d_global, d.d_local)):
                rows.append((p, split, i, g, l, bool(g <= eps_lab)))
            cg = compliance.cdf(d.d_global, compliance.GLOBAL_THRESHOLDS)
            cl = compliance.cdf(d.d_local, compliance.LOCAL_THRESHOLDS)
            curves += [(p, split, "global", cg), (p, split, "local", cl)]
            svg_g.append((f"{p} {split}", cg.thresholds, cg.fractions))
            svg_l.append((f"{p} {split}", cl.thresholds, cl.fractions))
        summary["alpha"][split] = {p: {str(e): dist[p].alpha(e) for e in compliance.REPORT_EPS}
                                   for p in planners}
        summary["alpha_extra"][split] = {p: {str(e): d.alpha(e) for e in compliance.REPORT_EPS}
                                         for p, d in dist.items() if p not in planners}
    atomic_write(out / "records.csv", compliance.records_csv(rows))
    atomic_write(out / "cdf.csv", compliance.cdf_csv(curves))
    atomic_write(out / "cdf_global.svg", cdf_svg(svg_g, "global plan (Hausdorff)", "d [m]"))
    atomic_write(out / "cdf_local.svg", cdf_svg(svg_l, "command (L2)", "d"))
    atomic_write(out / "summary.json", json.dumps(summary, sort_keys=True, indent=1) + "\n")
    for split in TEST_SPLITS:
        parts = [f"{p}={summary['alpha'][split][p]['1.0']:.4f}" for p in planners]
        parts += [f"{p}={v['1.0']:.4f}" for p, v in summary["alpha_extra"][split].items()]
        _say(f"{split} alpha(1.0): " + " ".join(parts))
    for split, acc in res.gate_accuracy.items():
        _say(f"{split} gate accuracy: {acc:.4f}")
    _say(f"records sha256: {sha256_bytes((out / 'records.csv').read_bytes())}")
    return EXIT_OK


# --------------------------------------------------------------------------- sim


def _parse_scenario(text: str):
    from hybridnav.world import empty_scenario, make_scenario

    parts = text.split(":")
    kind = parts[0]
    seed = int(parts[1]) if len(parts) > 1 and parts[1] else 0
    ood = len(parts) > 2 and parts[2] in ("ood", "1", "true")
    if kind in ("empty", "room"):
        return empty_scenario(seed) if seed else empty_scenario()
    return make_scenario(kind, seed, ood)


def cmd_sim(args) -> int:
    from hybridnav.hybrid import (
        HybridModels, SwitchConfig, count_switches, log_jsonl, run_closed_loop, safety_violations,
    )
    from hybridnav.svg import trajectory_svg
    from hybridnav.world import ScenarioError, make_map

    cfg = _config(args)
    sw = cfg.switch
    if args.switch_config:
        try:
            sw = SwitchConfig(**json.loads(Path(args.switch_config).read_text()))
        except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
            raise DataError(f"bad switch config: {exc}") from None
    try:
        spec = _parse_scenario(args.scenario)
    except (ScenarioError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    models = None
    if args.planner != "classical":
        mdir = Path(args.models)
        bc, _ = _load_model(mdir, "bc_n", "bc") if args.planner == "hybrid" else _load_model(mdir, "bc", "bc_n")
        gate = _load_model(mdir, "gate")[0] if args.planner == "hybrid" else None
        models = HybridModels(gate, bc)
    outcome = run_closed_loop(spec, args.planner, models, sw, cfg.planner)
    out = Path(args.out)
    stem = f"{spec.kind}_{spec.seed}_{args.planner}"
    atomic_write(out / f"{stem}.jsonl", log_jsonl(outcome.log))
    if args.render:
        from hybridnav.dataset import rollout_expert

        demo = rollout_expert(spec)
        demo_xy = np.array([p.xy for p in demo.poses] + [demo.final_pose.xy])
        m = make_map(spec.map)
        atomic_write(out / f"{stem}.svg", trajectory_svg(
            m.occupancy, m.resolution, m.origin, [("demo", demo_xy), (args.planner, outcome.trajectory)]))
    viol = safety_violations(outcome.log, sw) if args.planner == "hybrid" else []
    _say(f"status={outcome.status} steps={len(outcome.log)} switches={count_switches(outcome.log)} "
         f"safety_violations={len(viol)}")
    return EXIT_OK if outcome.status == "goal" else EXIT_RUN


# --------------------------------------------------------------------------- anova


def read_scores(path: Path | str) -> list[tuple[str, str, float]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["group", "question", "score"]:
            raise DataError(f"{path}:1: expected header group,question,score")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            try:
                score = float(row[2])
            except ValueError:
                raise DataError(f"{path}:{lineno}: score {row[2]!r} is not a number") from None
            rows.append((row[0].strip(), row[1].strip(), score))
    return rows


def cmd_anova(args) -> int:
    try:
        table = compliance.anova_table(read_scores(args.scores))
    except compliance.ComplianceError as exc:
        raise DataError(str(exc)) from None
    _say("question,groups,F,p,significant")
    for r in table:
        _say(f"{r['question']},{r['groups']},{r['F']!r},{r['p']!r},{int(r['significant'])}")
    return EXIT_OK


# --------------------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hybridnav", description="Hybrid social navigation toolkit")
    ap.add_argument("--config", help="JSON run config (flags override it)")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="record demonstrations and write a manifest")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--id-episodes", type=int)
    g.add_argument("--ood-episodes", type=int)

    lb = sub.add_parser("label", help="label demo steps against the classical planner")
    lb.add_argument("--manifest", required=True)
    lb.add_argument("--eps", type=float)
    lb.add_argument("--social-layer", action="store_true",
                    help="also label the social-layer classical variant on test splits")
    lb.add_argument("--out")

    t = sub.add_parser("train", help="train a model")
    t.add_argument("which", choices=("bc", "gate"))
    t.add_argument("--labeled", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--subset", choices=("nc", "all"), default="nc",
                   help="bc only: non-compliant steps (default) or all training steps")
    t.add_argument("--out")

    e = sub.add_parser("eval", help="playback evaluation on the test splits")
    e.add_argument("--manifest", required=True)
    e.add_argument("--models", required=True)
    e.add_argument("--planners", default=",".join(PLANNERS))
    e.add_argument("--out", required=True)
    e.add_argument("--labeled")

    s = sub.add_parser("sim", help="closed-loop simulation")
    s.add_argument("--scenario", required=True, help="kind[:seed[:ood]] or empty")
    s.add_argument("--planner", choices=PLANNERS, default="classical")
    s.add_argument("--switch-config")
    s.add_argument("--render", action="store_true")
    s.add_argument("--models", default="models")
    s.add_argument("--out", default=".")

    a = sub.add_parser("anova", help="one-way ANOVA per question")
    a.add_argument("--scores", required=True)
    return ap


COMMANDS = {"gen": cmd_gen, "label": cmd_label, "train": cmd_train, "eval": cmd_eval,
            "sim": cmd_sim, "anova": cmd_anova}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.cmd](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
