"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data or schema error,
4 numeric, training or verification failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import statistics
import sys
import time
from dataclasses import asdict, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from faithaudit import __version__
from faithaudit.datasets import (
    BAColorGVConfig,
    ConfigError,
    Dataset,
    DatasetError,
    MotifAnchorsConfig,
    gen_bacolorgv,
    gen_motif_anchors,
    iter_small_bacolorgv,
)
from faithaudit.graph import GraphError
from faithaudit.metrics.core import METRICS, MetricError, audit, report_csv
from faithaudit.models.analytic import ANALYTIC, analytic_model
from faithaudit.models.base import SEGNN, ModelError
from faithaudit.models.trainable import (
    DESIGNATED,
    TrainableSEGNN,
    TrainHP,
    accuracy,
    eval_f1_designated,
    init_params,
    score_mass,
    train_attack,
    train_natural_smgnn,
)
from faithaudit.oracle import DEFAULT_CAP, CapExceeded, verify_thm_suffcause

log = logging.getLogger("faithaudit")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
CONTROL_FLOOR = 0.4
REPORT_KEYS = {"model", "split", "budget", "seed", "metrics"}


class CliError(Exception):
    def __init__(self, msg: str, code: int):
        super().__init__(msg)
        self.code = code


# ---------------------------------------------------------------- manifests

def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def make_manifest(command: str, config: dict, seeds: dict, inputs: Sequence[str | Path] = ()) -> dict:
    """Run manifest; ``hash`` covers everything except the timestamp."""
    body = {
        "command": command,
        "config": config,
        "seeds": seeds,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "version": __version__,
    }
    body["hash"] = hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()
    body["created_at"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return body


def _write_json(path: str | Path, obj: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


# ---------------------------------------------------------------- parsing

def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _metrics(text: str) -> list[str]:
    names = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in names if m not in METRICS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown metrics {bad}; choose from {','.join(METRICS)}")
    return names


def _load_dataset(path: str | None) -> Dataset:
    if path is None:
        raise CliError("--dataset is required", EXIT_CONFIG)
    try:
        return Dataset.load(path)
    except FileNotFoundError:
        raise CliError(f"dataset not found: {path}", EXIT_DATA) from None


def _load_model(args) -> tuple[SEGNN, list[str]]:
    if args.analytic:
        try:
            return analytic_model(args.analytic), []
        except KeyError as exc:
            raise CliError(str(exc.args[0]), EXIT_CONFIG) from None
    if not args.model:
        raise CliError("pass --model CHECKPOINT or --analytic NAME", EXIT_CONFIG)
    try:
        return TrainableSEGNN.load(args.model), [args.model]
    except FileNotFoundError:
        raise CliError(f"checkpoint not found: {args.model}", EXIT_DATA) from None
    except (KeyError, json.JSONDecodeError, ModelError) as exc:
        raise CliError(f"bad checkpoint {args.model}: {exc}", EXIT_DATA) from None


def _hp(args) -> TrainHP:
    hp = TrainHP()
    for name in ("epochs", "optimizer", "lr", "lam1", "lam2", "hidden", "wc_bound"):
        val = getattr(args, name, None)
        if val is not None:
            hp = replace(hp, **{name: val})
    return hp


# ---------------------------------------------------------------- commands

def cmd_generate(args) -> int:
    if args.family == "bacolorgv":
        cfg = BAColorGVConfig()
        if args.n is not None:
            cfg = replace(cfg, n_graphs=args.n)
        if args.colored_range is not None:
            if len(args.colored_range) != 2:
                raise ConfigError("--colored-range needs two integers lo,hi")
            cfg = replace(cfg, colored_range=tuple(int(x) for x in args.colored_range))
        gen = gen_bacolorgv
    else:
        cfg = MotifAnchorsConfig()
        if args.n is not None:
            cfg = replace(cfg, n_graphs=args.n)
        gen = gen_motif_anchors
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.ba_attach is not None:
        cfg = replace(cfg, ba_attach=args.ba_attach)
    if args.split is not None:
        cfg = replace(cfg, split=args.split)
    ds = gen(cfg)
    manifest = make_manifest("generate", {"family": args.family, **asdict(cfg)}, {"dataset": cfg.seed})
    ds.save(args.out, manifest)
    print(f"wrote {len(ds.graphs)} {args.family} graphs to {args.out} (final seed {ds.final_seed})")
    return EXIT_OK


def _attack_one(ds: Dataset, seed: int, hp: TrainHP, designated: str) -> tuple[TrainableSEGNN, dict]:
    t0 = time.perf_counter()
    res = train_attack(init_params(hp.hidden, seed, hp.init_scale), ds.split("train"), DESIGNATED[designated], hp)
    model = TrainableSEGNN(res.params, hp, f"attack-{designated}", seed, {"designated": designated})
    test = ds.split("test")
    stats = {
        "seed": seed,
        "epochs": res.epochs,
        "stopped_early": res.stopped_early,
        "test_accuracy": accuracy(model, test),
        "designated_f1": eval_f1_designated(model, test, DESIGNATED[designated]),
        "seconds": round(time.perf_counter() - t0, 2),
    }
    model.meta.update({k: stats[k] for k in ("test_accuracy", "designated_f1", "epochs")})
    return model, stats


def cmd_attack(args) -> int:
    ds = _load_dataset(args.dataset)
    hp = _hp(args)
    model, stats = _attack_one(ds, args.seed, hp, args.designated)
    manifest = make_manifest("attack", {"hp": asdict(hp), "designated": args.designated},
                             {"training": args.seed}, [args.dataset])
    model.save(args.out, manifest)
    print(json.dumps(stats, sort_keys=True))
    return EXIT_OK


def cmd_train_natural(args) -> int:
    ds = _load_dataset(args.dataset)
    if args.wc_bound is not None and args.wc_bound <= 0:
        args.wc_bound = None
    hp = _hp(args)
    res = train_natural_smgnn(init_params(hp.hidden, args.seed, hp.init_scale), ds.split("train"), hp)
    model = TrainableSEGNN(res.params, hp, "natural-smgnn", args.seed)
    test = ds.split("test")
    stats = {"seed": args.seed, "epochs": res.epochs, "test_accuracy": accuracy(model, test),
             "score_mass": score_mass(model, test)}
    model.meta.update(stats)
    manifest = make_manifest("train-natural", {"hp": asdict(hp)}, {"training": args.seed}, [args.dataset])
    model.save(args.out, manifest)
    print(json.dumps(stats, sort_keys=True))
    return EXIT_OK


def cmd_audit(args) -> int:
    ds = _load_dataset(args.dataset)
    model, model_inputs = _load_model(args)
    if args.split not in ds.splits:
        raise CliError(f"dataset has no split {args.split!r}", EXIT_DATA)
    graphs = ds.split(args.split)
    if not graphs:
        raise CliError(f"split {args.split!r} is empty", EXIT_DATA)
    report = audit(model, graphs, args.metrics, args.budget, args.seed, args.split, traces=not args.no_traces)
    report["manifest"] = make_manifest(
        "audit", {"metrics": args.metrics, "budget": args.budget, "split": args.split, "model": model.describe()},
        {"metrics": args.seed}, [args.dataset, *model_inputs])
    _write_json(args.out, report)
    if args.csv:
        Path(args.csv).write_text(report_csv(report))
    for name, entry in report["metrics"].items():
        print(f"{name:>10}  {entry['ratio']:.3f}  (n={entry['n']})")
    return EXIT_OK


def cmd_oracle(args) -> int:
    model, model_inputs = _load_model(args)
    if args.dataset:
        ds = _load_dataset(args.dataset)
        graphs = ds.split(args.split) if args.split else ds.graphs
        inputs = [args.dataset, *model_inputs]
    else:
        graphs = list(iter_small_bacolorgv(args.small, args.max_colored, args.seed))
        inputs = list(model_inputs)
    report = verify_thm_suffcause(model, graphs, args.cap, args.budget, args.seed)
    out = report.to_json()
    out["manifest"] = make_manifest("oracle", {"cap": args.cap, "budget": args.budget, "model": model.describe(),
                                              "small": None if args.dataset else args.small},
                                    {"oracle": args.seed}, inputs)
    _write_json(args.out, out)
    print(f"{model.name}: {out['counts']}  violations={len(report.violations)}")
    return EXIT_OK if report.passed else EXIT_NUMERIC


def _fmt(values: list[float], pct: bool = True) -> str:
    """Mean and sample std (percent, or raw with three decimals); std is empty for one value."""
    scale, fmt = (100.0, ".1f") if pct else (1.0, ".3f")
    m = format(statistics.fmean(values) * scale, fmt)
    if len(values) < 2:
        return f"{m}±"
    return f"{m}±{format(statistics.stdev(values) * scale, fmt)}"


def cmd_table2(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.dataset:
        ds, inputs = _load_dataset(args.dataset), [args.dataset]
    else:
        ds, inputs = gen_bacolorgv(), []
    seeds = args.seeds if len(args.seeds) > 1 else list(range(1, args.seeds[0] + 1))
    budgets = args.budget
    main_budget = 50 if 50 in budgets else budgets[0]
    hp = _hp(args)
    test = ds.split("test")
    control = analytic_model("degenerate")

    rows: dict[str, dict[str, list[float]]] = {"attack": {}, "control": {}}
    sweep = [("model", "seed", "budget", "metric", "ratio")]
    train_stats = []
    for s in seeds:
        log.info("training attack model, seed %d", s)
        try:
            model, stats = _attack_one(ds, s, hp, "green-violet")
        except ModelError as exc:
            raise ModelError(f"seed {s}: {exc}") from exc
        train_stats.append(stats)
        model.save(out / f"attack_seed{s}.json")
        for label, m in (("attack", model), ("control", control)):
            for b in budgets:
                metrics = list(METRICS) if b == main_budget else ["ust"]
                rep = audit(m, test, metrics, b, s, "test", traces=False)
                if b == main_budget:
                    _write_json(out / f"report_{label}_seed{s}.json", rep)
                    for name, entry in rep["metrics"].items():
                        rows[label].setdefault(name, []).append(entry["ratio"])
                sweep.append((label, s, b, "ust", f"{rep['metrics']['ust']['ratio']:.6f}"))

    header = ["model", "acc", "f1", *METRICS]
    acc = [t["test_accuracy"] for t in train_stats]
    f1 = [t["designated_f1"] or 0.0 for t in train_stats]
    table = [header,
             ["attack", _fmt(acc), _fmt(f1, pct=False), *(_fmt(rows["attack"][m]) for m in METRICS)],
             ["control", "", "", *(_fmt(rows["control"][m]) for m in METRICS)]]
    text = "\n".join("| " + " | ".join(r) + " |" for r in table) + "\n"
    (out / "table2.md").write_text(text)
    with open(out / "table2.csv", "w", newline="") as fh:
        csv.writer(fh).writerows(table)
    with open(out / "budget_sweep.csv", "w", newline="") as fh:
        csv.writer(fh).writerows(sweep)
    _write_json(out / "training.json", {"runs": train_stats})
    _write_json(out / "manifest.json", make_manifest(
        "table2", {"hp": asdict(hp), "budgets": budgets, "main_budget": main_budget}, {"training": seeds}, inputs))
    print(text, end="")
    return EXIT_OK


def _read_report(path: str) -> dict:
    try:
        rep = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CliError(f"report not found: {path}", EXIT_DATA) from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: not JSON ({exc})", EXIT_DATA) from None
    missing = REPORT_KEYS - set(rep) if isinstance(rep, dict) else REPORT_KEYS
    if missing or not isinstance(rep.get("metrics"), dict) or not all(
            isinstance(e, dict) and "ratio" in e for e in rep["metrics"].values()):
        raise CliError(f"{path}: not a rejection report (missing {sorted(missing) or 'metric ratios'})", EXIT_DATA)
    return rep


def merge_reports(reports: Sequence[dict]) -> list[dict]:
    """Group by (model name, budget); mean and std of each metric's ratio."""
    groups: dict[tuple[str, int], dict[str, list[float]]] = {}
    for rep in reports:
        key = (rep["model"].get("name", "?"), rep["budget"])
        g = groups.setdefault(key, {})
        for name, entry in rep["metrics"].items():
            g.setdefault(name, []).append(entry["ratio"])
    rows = []
    for (name, budget), metrics in sorted(groups.items()):
        for metric, vals in metrics.items():
            std = statistics.stdev(vals) if len(vals) > 1 else None
            flag = name.startswith("degenerate") and statistics.fmean(vals) < CONTROL_FLOOR
            rows.append({"model": name, "budget": budget, "metric": metric, "n_reports": len(vals),
                         "mean": statistics.fmean(vals), "std": std,
                         "flag": "failure to reject" if flag else ""})
    return rows


def cmd_report(args) -> int:
    if not args.reports:
        raise CliError("no reports given", EXIT_DATA)
    reports = [_read_report(p) for p in args.reports]
    if len({r["budget"] for r in reports}) > 1:
        print("warning: reports use different budgets; rows are grouped by budget", file=sys.stderr)
    rows = merge_reports(reports)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else ["model"], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if args.csv:
        Path(args.csv).write_text(buf.getvalue())
    for r in rows:
        std = "" if r["std"] is None else f"±{r['std'] * 100:.1f}"
        print(f"{r['model']:<22} b={r['budget']:<4} {r['metric']:>10}  {r['mean'] * 100:5.1f}{std:<7} {r['flag']}")
    return EXIT_OK


# ---------------------------------------------------------------- wiring

def _model_args(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--model", help="trainable checkpoint (JSON)")
    g.add_argument("--analytic", choices=sorted(ANALYTIC), help="hand-built model")


def _train_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int)
    p.add_argument("--optimizer", choices=("lbfgs", "adam", "gd"))
    p.add_argument("--lr", type=float)
    p.add_argument("--hidden", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="faithaudit", description="Audit faithfulness metrics for self-explainable GNNs.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a benchmark dataset")
    p.add_argument("--family", choices=("bacolorgv", "motif"), default="bacolorgv")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--colored-range", type=_ints)
    p.add_argument("--ba-attach", type=int)
    p.add_argument("--split", type=_floats)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("attack", help="train an SE-GNN toward a designated (degenerate) explanation")
    p.add_argument("--dataset", required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--designated", choices=sorted(DESIGNATED), default="green-violet")
    _train_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("train-natural", help="train with the sparsity/entropy regularized objective")
    p.add_argument("--dataset", required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--lam1", type=float, default=0.4, help="score-mass penalty weight")
    p.add_argument("--lam2", type=float, default=1.0, help="score-entropy penalty weight")
    p.add_argument("--wc-bound", type=float, default=10.0,
                   help="box constraint on classifier weights (L-BFGS only); 0 disables")
    _train_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_natural)

    p = sub.add_parser("audit", help="compute rejection ratios for a model on a split")
    _model_args(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--metrics", type=_metrics, default=list(METRICS))
    p.add_argument("--budget", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-traces", action="store_true", help="omit per-sample traces from the report")
    p.add_argument("--csv", help="also write a one-row-per-metric CSV summary")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("oracle", help="exhaustively check the sufficiency test on small graphs")
    _model_args(p)
    p.add_argument("--dataset", help="JSONL dataset of small graphs; default generates --small graphs")
    p.add_argument("--split")
    p.add_argument("--small", type=int, default=50)
    p.add_argument("--max-colored", type=int, default=8)
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--budget", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("table2", help="attack over several seeds, audit all metrics, tabulate")
    p.add_argument("--dataset")
    p.add_argument("--seeds", type=_ints, default=[5], help="a count N (seeds 1..N) or an explicit list")
    p.add_argument("--budget", type=_ints, default=[50], help="one budget or a sweep such as 10,25,50,100")
    _train_args(p)
    p.add_argument("--out", default="table2_out")
    p.set_defaults(func=cmd_table2)

    p = sub.add_parser("report", help="merge report JSON files into a summary table")
    p.add_argument("reports", nargs="*")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, CapExceeded, MetricError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetError, GraphError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ModelError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
