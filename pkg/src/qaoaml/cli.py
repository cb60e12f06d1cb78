"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path


from . import graphs as graphs_mod
from .dataset import (
    PredictorBank,
    build_dataset,
    correlation_report,
    derive_rng,
    export_csv,
    parameter_count,
    read_rows,
    split_dataset,
    train_predictor_bank,
)
from .errors import DomainError, ObjectiveError, ResourceError, TrainingError
from .optimizers import OptimizerConfig, normalize_kind
from .warmstart import relative_errors, predict_init, run_benchmark, two_level_solve

log = logging.getLogger("qaoaml")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_depths(text: str) -> list[int]:
    """``"1..6"``, ``"2,3,5"`` or a single integer."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            depths = list(range(int(lo), int(hi) + 1))
        else:
            depths = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad depth list {text!r}") from None
    if not depths or min(depths) < 1:
        raise argparse.ArgumentTypeError(f"bad depth list {text!r}")
    return depths


def _optimizer_arg(text: str) -> str:
    try:
        return normalize_kind(text)
    except DomainError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _read_split(path):
    with open(path) as fh:
        obj = json.load(fh)
    return obj["train"], obj["test"]


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_graphs(args):
    gs = graphs_mod.generate_graphs(args.n, args.count, args.edge_prob, args.seed)
    graphs_mod.write_graphs(gs, args.out)
    log.info("wrote %d graphs to %s", len(gs), args.out)


def cmd_build_dataset(args):
    gs = graphs_mod.read_graphs(args.graphs)
    cfg = OptimizerConfig(kind=args.optimizer, ftol=args.ftol, max_evals=args.max_evals)
    t0 = time.perf_counter()
    rows = build_dataset(gs, args.depths, args.restarts, cfg, out=args.out, seed=args.seed,
                         continuation=not args.no_continuation)
    log.info("%d rows, %d parameters in %.1fs", len(rows), parameter_count(rows), time.perf_counter() - t0)
    if args.csv:
        export_csv(rows, args.csv)


def cmd_analyze(args):
    rows = read_rows(args.rows)
    report = correlation_report(rows)
    report.write_csv(args.out)
    for resp in ("gamma_1", "beta_1"):
        e = report.get("p", resp) if any(r.p > 1 for r in rows) else None
        if e is not None:
            print(f"R({resp}, p) = {e.r:.3f}  (n={e.n})")
    try:
        e = report.get("gamma1_p1", "beta_1", "1")
        print(f"R(gamma_1, beta_1) at p=1 = {e.r:.3f}")
    except KeyError:
        pass
    print(f"instances with rising gamma and falling beta (p>=3): {report.trend_fraction():.3f}")


def cmd_split(args):
    rows = read_rows(args.rows)
    train, test = split_dataset(rows, args.train_frac, args.seed)
    with open(args.out, "w") as fh:
        json.dump({"train_frac": args.train_frac, "seed": args.seed, "train": train, "test": test}, fh, indent=1)
        fh.write("\n")
    print(f"train {len(train)} / test {len(test)}")


def cmd_train(args):
    rows = read_rows(args.rows)
    train, _ = _read_split(args.split)
    bank = train_predictor_bank(rows, train, args.model, p_max=args.p_max, m=args.hierarchical_m)
    bank.save(args.out)
    for key, e in bank.entries.items():
        log.info("%s: n=%d train mse=%.3g r2=%.3f", key, e.n_train, e.metrics.mse, e.metrics.r2)


def _write_plot_data(outdir, rows, test_ids, bank, report):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    test = sorted(test_ids)
    by = {(r.graph_id, r.p): r for r in rows if r.usable}

    with open(outdir / "stage_trends.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["graph_id", "p", "stage", "gamma", "beta"])
        for gid in test[:4]:
            for p in (3, 5):
                r = by.get((gid, p))
                if r:
                    for i, (g, b) in enumerate(zip(r.gamma_opt, r.beta_opt), 1):
                        w.writerow([gid, p, i, repr(g), repr(b)])

    with open(outdir / "depth_trends.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["graph_id", "p", "stage", "gamma", "beta"])
        if test:
            for (gid, p), r in sorted(by.items()):
                if gid == test[0]:
                    for i, (g, b) in enumerate(zip(r.gamma_opt, r.beta_opt), 1):
                        w.writerow([gid, p, i, repr(g), repr(b)])

    correlation_report(rows).write_csv(outdir / "correlations.csv")

    with open(outdir / "prediction_errors.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["graph_id", "p", "parameter", "relative_error"])
        for gid in test:
            if (gid, 1) not in by:
                continue
            r1 = by[(gid, 1)]
            for p in sorted({p for (g, p) in by if g == gid and 2 <= p <= bank.p_max}):
                pred = predict_init(bank, r1.gamma_opt[0], r1.beta_opt[0], p)
                errs = relative_errors(pred, by[(gid, p)].params)
                names = [f"gamma_{i}" for i in range(1, p + 1)] + [f"beta_{i}" for i in range(1, p + 1)]
                for n, e in zip(names, errs):
                    w.writerow([gid, p, n, repr(float(e))])

    report.write_csv(outdir / "runtime_table.csv")


def cmd_bench(args):
    rows = read_rows(args.rows)
    _, test = _read_split(args.split)
    bank = PredictorBank.load(args.bank)
    if bank.m != 1:
        raise UsageError("bench needs a two-level bank (trained without --hierarchical-m)")
    test_set = set(test)
    gs = [g for g in graphs_mod.read_graphs(args.graphs) if g.id in test_set]
    if args.limit:
        gs = gs[: args.limit]
    if not gs:
        raise UsageError("no test graphs found in the graphs file")
    test_rows = [r for r in rows if r.graph_id in test_set]
    cfg = OptimizerConfig(ftol=args.ftol, max_evals=args.max_evals)

    def progress(r):
        log.info("%s p=%d naive fc %.1f ar %.4f | two-level fc %.1f ar %.4f | reduction %.1f%%",
                 r.optimizer, r.p, r.naive_fc_mean, r.naive_ar_mean, r.ml_fc_mean, r.ml_ar_mean, r.fc_reduction_pct)

    report = run_benchmark(gs, bank, args.optimizers, args.depths, args.restarts, cfg, seed=args.seed,
                           test_rows=test_rows, stage1_restarts=args.stage1_restarts, progress=progress)
    report.write_csv(args.out)
    if args.records:
        report.write_records(args.records)
    if args.plot_data:
        _write_plot_data(args.plot_data, rows, test, bank, report)
    for r in report.rows:
        print(f"{r.optimizer:13s} p={r.p}  naive {r.naive_fc_mean:8.1f}  two-level {r.ml_fc_mean:8.1f}  "
              f"reduction {r.fc_reduction_pct:5.1f}%  AR {r.naive_ar_mean:.4f} / {r.ml_ar_mean:.4f}")
    for p, e in sorted(report.prediction_errors.items()):
        print(f"prediction error p={p}: mean {100 * e.mean:.2f}% of domain width")
    print("naive FC is the mean per restart; per-graph totals over all restarts are in naive_fc_total_mean")


def cmd_solve(args):
    path = Path(args.graph)
    text = path.read_text().strip()
    if text.startswith("{") and "\n" not in text:
        g = graphs_mod.Graph.from_json(json.loads(text))
    else:
        gs = graphs_mod.read_graphs(path)
        if len(gs) != 1:
            raise UsageError(f"{path} holds {len(gs)} graphs; solve expects exactly one")
        g = gs[0]
    bank = PredictorBank.load(args.bank)
    table = graphs_mod.cut_table(g)
    cfg = OptimizerConfig(kind=args.optimizer, ftol=args.ftol)
    res = two_level_solve(table, args.p, bank, cfg, derive_rng(args.seed, g.id, args.p), graph_id=g.id)
    out = {
        "graph_id": g.id,
        "p": args.p,
        "gamma": res.stage2.params.gamma.tolist(),
        "beta": res.stage2.params.beta.tolist(),
        "value": res.stage2.value,
        "max_cut": table.max_cut,
        "ar": res.ar,
        "fc_stage1": res.stage1.fc,
        "fc_stage2": res.stage2.fc,
        "fc_total": res.total_fc,
    }
    print(json.dumps(out, indent=1))


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="qaoaml", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-graphs", help="generate Erdos-Renyi problem graphs")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--count", type=int, default=330)
    p.add_argument("--edge-prob", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_graphs)

    p = sub.add_parser("build-dataset", help="optimise every graph at every depth")
    p.add_argument("--graphs", required=True)
    p.add_argument("--depths", type=parse_depths, default=parse_depths("1..6"))
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--optimizer", type=_optimizer_arg, default="quasi_newton")
    p.add_argument("--ftol", type=float, default=1e-6)
    p.add_argument("--max-evals", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-continuation", action="store_true",
                   help="use random starts only (no start interpolated from the previous depth)")
    p.add_argument("--csv", help="also export a flat CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("analyze", help="correlation and trend report")
    p.add_argument("--rows", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("split", help="train/test split by graph")
    p.add_argument("--rows", required=True)
    p.add_argument("--train-frac", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train the predictor bank")
    p.add_argument("--rows", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--model", choices=("gpr", "linear", "tree"), default="gpr")
    p.add_argument("--p-max", type=int, default=6)
    p.add_argument("--hierarchical-m", type=int, default=1,
                   help="intermediate depth for hierarchical features (1 = two-level bank)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench", help="naive vs two-level benchmark on the test split")
    p.add_argument("--rows", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--bank", required=True)
    p.add_argument("--graphs", required=True, help="graphs file holding the test graphs")
    p.add_argument("--depths", type=parse_depths, default=parse_depths("2..5"))
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--optimizers", type=_optimizer_arg, nargs="+", default=["nelder_mead", "quasi_newton"])
    p.add_argument("--ftol", type=float, default=1e-6)
    p.add_argument("--max-evals", type=int, default=10_000)
    p.add_argument("--stage1-restarts", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--limit", type=int, default=0, help="use only the first N test graphs")
    p.add_argument("--records", help="per-run raw records CSV")
    p.add_argument("--plot-data", help="directory for per-figure CSVs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("solve", help="one two-level solve")
    p.add_argument("--graph", required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--bank", required=True)
    p.add_argument("--optimizer", type=_optimizer_arg, default="quasi_newton")
    p.add_argument("--ftol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_solve)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"qaoaml: error: {exc}", file=sys.stderr)
        return 1
    except (DomainError, ResourceError, ObjectiveError, TrainingError, OSError, KeyError, ValueError) as exc:
        print(f"qaoaml: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
