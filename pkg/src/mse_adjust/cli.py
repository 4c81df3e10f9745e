"""Command-line interface.

Machine-readable output (JSON or CSV) goes to stdout, logs to stderr, so
results pipe cleanly.  Exit status: 0 on success, 1 on domain errors
(collinearity, sample size too small, degenerate model, enumeration
limits), 2 on usage errors (bad flags, missing or malformed files).
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import logging
import os
import sys
from pathlib import Path

from .classify import classify
from .errors import GraphError, MseAdjustError
from .estimate import SelectionConfig, select_and_estimate
from .graph import AdjustmentSet, CausalDag
from .io import graph_to_dict, load_dataset_csv, load_graph, load_scm
from .scm import LinearGaussianScm, population_summary
from .search import build_candidate_space, crossover_n, mse_optimal_set
from .simulate import (
    KNOWN_RULES,
    ExperimentConfig,
    ExperimentResult,
    preset,
    run_experiment,
)

logger = logging.getLogger("mse_adjust")


def _parse_set(dag: CausalDag, text: str) -> AdjustmentSet:
    """Parse a '+'-joined label list; empty string means the empty set."""
    text = text.strip()
    if not text:
        return AdjustmentSet()
    return AdjustmentSet.from_labels(dag, text.split("+"))


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return p


def _emit_json(obj) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _classification_json(g: CausalDag, force: bool) -> dict:
    cls = classify(g, force=force)
    lab = g.label
    return {
        "precision": [lab(v) for v in cls.precision],
        "extended_confounding": [lab(v) for v in cls.extended_confounding],
        "irrelevant": [lab(v) for v in cls.irrelevant],
        "suboptimal_precision": [
            {"var": lab(v), "witness": lab(w)} for v, w in cls.suboptimal_precision
        ],
        "suboptimal_confounding": [
            {"var": lab(v), "witness": lab(w)} for v, w in cls.suboptimal_confounding
        ],
    }


def _cmd_classify(args) -> int:
    g = load_graph(_require_file(args.graph))
    _emit_json(_classification_json(g, args.force))
    return 0


def _cmd_prune(args) -> int:
    g = load_graph(_require_file(args.graph))
    cls = classify(g, force=args.force)
    space = build_candidate_space(g, cls, force=args.force)
    lab = g.label
    out = {
        "header": {
            "covariates": len(g.covariates),
            "initial_count": space.initial_count,
            "final_count": len(space.candidates),
            "counting": "each candidate is a distinct covariate set; every "
                        "excluded variable or set appears once in pruning_log",
        },
        "candidates": [list(c.labels(g)) for c in space.candidates],
        "pruning_log": [
            {
                "excluded": [lab(v) for v in entry.members],
                "rule": entry.rule,
                "justification": [lab(v) for v in entry.justification],
            }
            for entry in space.pruning_log
        ],
    }
    _emit_json(out)
    return 0


def _cmd_analyze(args) -> int:
    m = load_scm(_require_file(args.graph))
    g = m.dag
    ns = _parse_sizes(args.n)
    space = build_candidate_space(g, classify(g, force=args.force), force=args.force)
    writer = csv.writer(sys.stdout)
    writer.writerow(["set"] + [f"mse_n{n}" for n in ns])
    rows = []
    for cand in space.candidates:
        row = [cand.render(g)]
        for n in ns:
            if n <= len(cand) + 3:
                row.append("")
            else:
                row.append(repr(population_summary(m, cand, n).mse))
        writer.writerow(row)
        rows.append(row)
    argmin_row = ["argmin"]
    for n in ns:
        best, _ = mse_optimal_set(m, space, n)
        argmin_row.append(best.render(g))
    writer.writerow(argmin_row)
    if args.summaries:
        with open(args.summaries, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["set", "bias", "avar", "n", "fs_var", "mse"])
            for cand in space.candidates:
                for n in ns:
                    if n <= len(cand) + 3:
                        continue
                    s = population_summary(m, cand, n)
                    w.writerow(
                        [cand.render(g), repr(s.bias), repr(s.avar), n,
                         repr(s.fs_var), repr(s.mse)]
                    )
    return 0


def _cmd_crossover(args) -> int:
    m = load_scm(_require_file(args.graph))
    k = _parse_set(m.dag, args.k)
    l = _parse_set(m.dag, args.l)
    n = crossover_n(m, k, l, horizon=args.horizon)
    print(n if n is not None else "none")
    return 0


def _cmd_select(args) -> int:
    m_or_g = _read_json_graph_maybe_scm(args.graph)
    g = m_or_g.dag if isinstance(m_or_g, LinearGaussianScm) else m_or_g
    data = load_dataset_csv(_require_file(args.data), g)
    cfg = SelectionConfig(bootstrap=args.bootstrap, seed=args.seed, rule=args.rule)
    result = select_and_estimate(data, g, cfg)
    _emit_json(
        {
            "chosen": list(result.chosen.labels(g)),
            "tau_hat": result.tau_hat,
            "rule": args.rule,
            "skipped": [list(z.labels(g)) for z in result.skipped],
        }
    )
    if args.audit:
        with open(args.audit, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["set", "tau_hat", "rss_a_given_k", "rss_y_given_ak",
                 "var_hat", "bias_hat", "mse_hat"]
            )
            for fit in result.per_candidate:
                w.writerow(
                    [
                        fit.adjustment.render(g),
                        repr(fit.tau_hat),
                        repr(fit.rss_a_given_k),
                        repr(fit.rss_y_given_ak),
                        repr(fit.var_hat),
                        "" if fit.bias_hat is None else repr(fit.bias_hat),
                        "" if fit.mse_hat is None else repr(fit.mse_hat),
                    ]
                )
    return 0


def _read_json_graph_maybe_scm(path: str):
    p = _require_file(path)
    try:
        return load_scm(p)
    except GraphError:
        return load_graph(p)


def _cmd_simulate(args) -> int:
    if args.config:
        with open(_require_file(args.config), "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    else:
        raw = {}
    if args.preset:
        m = preset(args.preset)
    elif "preset" in raw:
        m = preset(raw["preset"])
    elif "graph" in raw:
        from .io import scm_from_dict

        m = scm_from_dict(raw["graph"])
    elif args.graph:
        m = load_scm(_require_file(args.graph))
    else:
        raise GraphError("simulate needs --preset, --graph, or a config with one")

    sizes = _parse_sizes(args.n) if args.n else tuple(raw.get("sample_sizes", ()))
    if not sizes:
        raise GraphError("no sample sizes given (use --n or the config file)")
    rules = tuple(args.rules or raw.get("rules", ["fixed-O", "algorithm-1"]))
    cfg = ExperimentConfig(
        scm=m,
        sample_sizes=tuple(int(n) for n in sizes),
        seeds=int(args.seeds if args.seeds is not None else raw.get("seeds", 100)),
        bootstrap_b=int(
            args.bootstrap if args.bootstrap is not None else raw.get("bootstrap_b", 1000)
        ),
        rules=rules,
        per_set_curves=bool(args.per_set_curves or raw.get("per_set_curves", False)),
        output_path=args.out or raw.get("output"),
    )
    result = run_experiment(cfg, threads=args.threads)
    if cfg.output_path:
        base = cfg.output_path
        _write_wide_csv(result, f"{base}_wide.csv")
        _write_tidy_csv(result, f"{base}_tidy.csv")
        _write_plot_csv(result, f"{base}_plot.csv")
        logger.info("wrote %s_{wide,tidy,plot}.csv", base)
    else:
        _write_tidy_csv(result, sys.stdout)
    return 0


def _write_tidy_csv(result: ExperimentResult, dest) -> None:
    close = False
    if isinstance(dest, (str, Path)):
        dest = open(dest, "w", encoding="utf-8", newline="")
        close = True
    try:
        w = csv.writer(dest)
        w.writerow(["rule", "n", "mean_mse", "sd_sq_err", "rmse", "seeds", "failures", "valid"])
        for c in result.cells:
            w.writerow(
                [c.rule, c.n, repr(c.mean_mse), repr(c.sd_sq_err), repr(c.rmse),
                 c.seeds, c.failures, int(c.valid)]
            )
    finally:
        if close:
            dest.close()


def _write_wide_csv(result: ExperimentResult, path) -> None:
    ns = list(result.config.sample_sizes)
    rules = []
    for c in result.cells:
        if c.rule not in rules:
            rules.append(c.rule)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rule"] + [f"mse_n{n}" for n in ns])
        for rule in rules:
            w.writerow([rule] + [repr(result.cell(rule, n).mean_mse) for n in ns])


def _write_plot_csv(result: ExperimentResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rule", "n", "rmse"])
        for c in result.cells:
            w.writerow([c.rule, c.n, repr(c.rmse)])


def _parse_sizes(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    try:
        return tuple(int(x) for x in str(text).split(","))
    except ValueError:
        raise GraphError(f"bad sample-size list {text!r}") from None


def _default_threads() -> int:
    env = os.environ.get("MSE_ADJUST_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mse-adjust",
        description="Covariate adjustment sets optimized for finite-sample "
        "mean squared error in linear Gaussian causal models.",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=_default_threads(),
        help="worker thread cap for the simulation harness "
        "(default: MSE_ADJUST_THREADS or 1)",
    )
    parser.add_argument(
        "-v", "--verbose", action="count", default=0,
        help="log progress to stderr (-vv for debug)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="partition covariates and flag suboptimal ones")
    p.add_argument("--graph", required=True, help="graph JSON file")
    p.add_argument("--force", action="store_true",
                   help="allow quantified queries on graphs above the covariate limit")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("prune", help="enumerate the pruned candidate adjustment sets")
    p.add_argument("--graph", required=True, help="graph JSON file")
    p.add_argument("--force", action="store_true",
                   help="allow quantified queries on graphs above the covariate limit")
    p.set_defaults(func=_cmd_prune)

    p = sub.add_parser(
        "analyze", help="exact population MSE for every candidate at given sample sizes"
    )
    p.add_argument("--graph", required=True, help="model JSON file (coefficients required)")
    p.add_argument("--n", required=True, help="comma-separated sample sizes")
    p.add_argument("--summaries", help="also write long-form bias/avar/mse rows to this CSV")
    p.add_argument("--force", action="store_true",
                   help="allow quantified queries on graphs above the covariate limit")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("crossover", help="smallest n at which the better set flips")
    p.add_argument("--graph", required=True, help="model JSON file (coefficients required)")
    p.add_argument("--k", required=True, help="first set, '+'-joined labels ('' = empty)")
    p.add_argument("--l", required=True, help="second set, '+'-joined labels ('' = empty)")
    p.add_argument("--horizon", type=int, default=10**6,
                   help="largest n scanned (default 1e6)")
    p.set_defaults(func=_cmd_crossover)

    p = sub.add_parser("select", help="select an adjustment set from data and estimate")
    p.add_argument("--graph", required=True, help="graph or model JSON file")
    p.add_argument("--data", required=True, help="CSV with a header row of node labels")
    p.add_argument("--bootstrap", type=int, default=1000,
                   help="bootstrap resamples for bias estimation (default 1000)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--rule", choices=["mse-optimal", "min-variance"],
                   default="mse-optimal",
                   help="selection rule (default mse-optimal)")
    p.add_argument("--audit", help="write per-candidate fit numbers to this CSV")
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("simulate", help="run the experiment harness")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--preset", choices=["m1", "m2", "g3-demo"],
                   help="built-in model preset")
    p.add_argument("--graph", help="model JSON file (alternative to --preset)")
    p.add_argument("--n", help="comma-separated sample sizes")
    p.add_argument("--seeds", type=int, help="number of random seeds per cell")
    p.add_argument("--bootstrap", type=int, help="bootstrap resamples for algorithm-1")
    p.add_argument("--rules", nargs="+", choices=list(KNOWN_RULES),
                   help="estimation rules to run")
    p.add_argument("--per-set-curves", action="store_true",
                   help="also fit every pruned candidate set directly")
    p.add_argument("--out", help="output path prefix for the three CSVs")
    p.set_defaults(func=_cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING
    if args.verbose == 1:
        level = logging.INFO
    elif args.verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (FileNotFoundError, GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MseAdjustError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
