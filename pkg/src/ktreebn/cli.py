"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 verification failure.
"""

import argparse
import logging
import math
import sys

import numpy as np

from .baseline import s2_learn, s2plus_learn
from .bench import METHODS, BenchConfig, VerificationFailure, run_bench, summarize
from .dataset import load_csv, write_csv
from .exact import MAX_EXACT_VARS, exact_learn
from .graph import find_cycle, read_dag_file, verify_treewidth_le, write_dag, Dag
from .scoring import DEFAULT_MAX_SETS, bic, build_cache, read_scores, write_scores
from .search import DEFAULT_NODE_BUDGET, anytime_learn
from .synth import (forward_sample, gen_random_network, inverted_tree_network, read_network,
                    write_network)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3
SCORE_TOL = 1e-6


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _common(suppress):
    p = _Parser(add_help=False)
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0), help="RNG seed (default 0)")
    p.add_argument("--workers", type=int, default=d(1), help="worker processes (default 1)")
    p.add_argument("--output", "-o", default=d(None), help="output file (default stdout where sensible)")
    return p


def _input_args(p, need_scores_ok=True):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--data", help="CSV dataset")
    if need_scores_ok:
        g.add_argument("--scores", help="score file from the score subcommand")
    p.add_argument("--no-header", action="store_true", help="CSV has no header row")


def _cache_args(p):
    p.add_argument("--max-sets", type=int, default=DEFAULT_MAX_SETS, help="candidate sets kept per variable")
    p.add_argument("--max-parents", type=int, default=None, help="extra cap on parent-set size")
    p.add_argument("--score-time-budget", type=float, default=None,
                   help="seconds allowed for parent-set scoring")


def _search_args(p, methods=("kg", "kastar", "s2", "s2plus", "exact")):
    p.add_argument("--treewidth", "-k", type=int, required=True, help="treewidth bound k")
    p.add_argument("--method", choices=methods, default="kg")
    p.add_argument("--time-budget-seconds", type=float, default=None)
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--node-budget", type=int, default=DEFAULT_NODE_BUDGET,
                   help="k-A* generated states per order")


def build_parser():
    top = _Parser(prog="ktreebn", description="Treewidth-bounded Bayesian network structure learning",
                  parents=[_common(False)])
    top.add_argument("-v", "--verbose", action="store_true")
    sub = top.add_subparsers(dest="command", required=True)
    common = _common(True)

    p = sub.add_parser("score", parents=[common], help="score candidate parent sets")
    p.add_argument("--data", required=True)
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--treewidth", "-k", type=int, required=True)
    _cache_args(p)

    p = sub.add_parser("learn", parents=[common], help="learn a bounded-treewidth DAG")
    _input_args(p)
    _cache_args(p)
    _search_args(p)

    p = sub.add_parser("exact", parents=[common], help="exact unbounded learning (small n)")
    _input_args(p)
    _cache_args(p)
    p.add_argument("--treewidth", "-k", type=int, default=None,
                   help="parent-set size cap used when scoring from data (default n-1)")
    p.add_argument("--max-vars", type=int, default=MAX_EXACT_VARS)

    p = sub.add_parser("synth", help="synthetic networks and samples")
    ss = p.add_subparsers(dest="synth_command", required=True)
    q = ss.add_parser("inverted-tree", parents=[common], help="binary inverted tree with Beta(1,1) CPTs")
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--n", type=int, required=True)
    q = ss.add_parser("random-net", parents=[common], help="random network with Dirichlet CPTs")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--max-parents", type=int, default=6)
    q.add_argument("--min-card", type=int, default=2)
    q.add_argument("--max-card", type=int, default=4)
    q = ss.add_parser("sample", parents=[common], help="forward-sample a network file to CSV")
    q.add_argument("--net", required=True)
    q.add_argument("--rows", type=int, required=True)

    p = sub.add_parser("verify", parents=[common], help="check a DAG file's score, acyclicity and width")
    p.add_argument("--dag", required=True)
    _input_args(p)
    p.add_argument("--treewidth", "-k", type=int, required=True)
    p.add_argument("--min-fill", action="store_true", help="also try a min-fill elimination order")

    p = sub.add_parser("bench", parents=[common], help="compare methods with W-scores")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data")
    src.add_argument("--scores")
    src.add_argument("--inverted-tree", action="store_true",
                     help="generate binary inverted trees (use --n, --rows, --instances)")
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--n", type=int, default=21)
    p.add_argument("--rows", type=int, default=10000)
    p.add_argument("--instances", type=int, default=1)
    p.add_argument("--treewidth", "-k", type=int, required=True)
    p.add_argument("--methods", default="kg,kastar,s2,s2plus")
    p.add_argument("--iterations", default=None,
                   help="per-method iteration budgets, e.g. kg=2000,kastar=50")
    p.add_argument("--time-budget-seconds", type=float, default=None)
    p.add_argument("--node-budget", type=int, default=DEFAULT_NODE_BUDGET)
    p.add_argument("--reference", default="exact", help="exact | best | none | <score>")
    p.add_argument("--exact-max-vars", type=int, default=MAX_EXACT_VARS)
    p.add_argument("--records", default=None, help="also write key=value records here")
    _cache_args(p)
    return top


# ---------------------------------------------------------------------------


def _rng(args):
    return np.random.default_rng(args.seed)


def _load_table(args):
    return load_csv(args.data, has_header=not args.no_header)


def _cache(args, k):
    if getattr(args, "scores", None):
        return read_scores(args.scores), None
    table = _load_table(args)
    cache = build_cache(table, k, max_sets=args.max_sets, time_budget=args.score_time_budget,
                        max_parents=args.max_parents, workers=args.workers)
    return cache, table


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_score(args):
    table = _load_table(args)
    cache = build_cache(table, args.treewidth, max_sets=args.max_sets,
                        time_budget=args.score_time_budget, max_parents=args.max_parents,
                        workers=args.workers)
    out = args.output or sys.stdout
    write_scores(cache, out)
    st = cache.prune_stats
    print(f"scored n={cache.n} sets={sum(map(len, cache.sets))} evaluated={st.get('evaluated')} "
          f"pruned={st.get('pruned')} timed_out={st.get('timed_out')}", file=sys.stderr)
    return EXIT_OK


def _write_result(dag, args, summary):
    write_dag(dag, args.output or sys.stdout)
    print(summary, file=sys.stdout if args.output else sys.stderr)


def cmd_learn(args):
    if args.time_budget_seconds is None and args.max_iterations is None and args.method != "exact":
        raise UsageError("give --time-budget-seconds and/or --max-iterations")
    if args.method in ("s2", "s2plus") and args.scores:
        raise UsageError(f"--method {args.method} needs pairwise statistics; use --data")
    cache, _ = _cache(args, args.treewidth)
    k = args.treewidth
    if args.method == "exact":
        dag = exact_learn(cache)
        _write_result(dag, args, f"method=exact score={dag.total_score:.6f}")
        return EXIT_OK
    rng = _rng(args)
    kw = dict(time_budget=args.time_budget_seconds, max_iterations=args.max_iterations, rng=rng,
              workers=args.workers)
    if args.method in ("kg", "kastar"):
        reg = anytime_learn(args.method, cache, k, node_budget=args.node_budget, **kw)
    elif args.method == "s2":
        reg = s2_learn(cache, k, **kw)
    else:
        reg = s2plus_learn(cache, k, **kw)
    cert = verify_treewidth_le(reg.best_dag, k)
    if not cert.ok:
        print(f"internal error: width certificate {cert.width} > {k}", file=sys.stderr)
        return EXIT_VERIFY
    _write_result(reg.best_dag, args,
                  f"method={args.method} score={reg.best_score:.6f} iterations={reg.iterations} "
                  f"median={reg.median:.6f} max={reg.max:.6f} width={cert.width} "
                  f"wall_clock={reg.wall_clock:.3f}")
    return EXIT_OK


def cmd_exact(args):
    if args.scores:
        cache = read_scores(args.scores)
    else:
        table = _load_table(args)
        k = args.treewidth if args.treewidth is not None else max(1, table.n - 1)
        cache = build_cache(table, k, max_sets=args.max_sets, time_budget=args.score_time_budget,
                            max_parents=args.max_parents, workers=args.workers)
    dag = exact_learn(cache, max_vars=args.max_vars)
    _write_result(dag, args, f"method=exact score={dag.total_score:.6f}")
    return EXIT_OK


def cmd_synth(args):
    rng = _rng(args)
    if args.synth_command == "sample":
        net = read_network(args.net)
        table = forward_sample(net, args.rows, rng)
        write_csv(table, args.output or sys.stdout)
        return EXIT_OK
    if args.synth_command == "inverted-tree":
        net = inverted_tree_network(args.k, args.n, rng)
    else:
        net = gen_random_network(args.n, args.max_parents, (args.min_card, args.max_card), rng)
    write_network(net, args.output or sys.stdout)
    return EXIT_OK


def cmd_verify(args):
    f = read_dag_file(args.dag)
    ok = True
    lines = []
    cyc = find_cycle(f.parents)
    if cyc is not None:
        lines.append("acyclic: FAIL cycle " + " -> ".join(map(str, cyc)))
        ok = False
    else:
        lines.append("acyclic: ok")
    if args.scores:
        cache = read_scores(args.scores)
        if cache.n != len(f.parents):
            raise ValueError(f"score file has {cache.n} variables, DAG has {len(f.parents)}")
        local = []
        for v, ps in enumerate(f.parents):
            try:
                local.append(cache.score_of(v, ps))
            except KeyError:
                lines.append(f"score: FAIL node {v} parent set {ps} not in the score file")
                local.append(math.nan)
                ok = False
    else:
        table = _load_table(args)
        if table.n != len(f.parents):
            raise ValueError(f"dataset has {table.n} variables, DAG has {len(f.parents)}")
        local = [bic(table, v, ps) for v, ps in enumerate(f.parents)]
    total = math.fsum(local)
    # files carry 6 decimals, so the total may drift by half a unit per node
    bad = [v for v in range(len(local)) if not abs(local[v] - f.scores[v]) <= SCORE_TOL]
    if not abs(total - f.total) <= SCORE_TOL * (len(local) + 1) or bad:
        lines.append(f"score: FAIL recomputed {total:.6f} vs file {f.total:.6f}"
                     + (f"; node mismatches {bad}" if bad else ""))
        ok = False
    else:
        lines.append(f"score: ok {total:.6f}")
    if cyc is None:
        dag = Dag(f.parents, local, certificate=list(reversed(f.line_order)))
        cert = verify_treewidth_le(dag, args.treewidth, min_fill=args.min_fill)
        lines.append(f"treewidth: {'ok' if cert.ok else 'FAIL'} width={cert.width} <= {args.treewidth} "
                     f"via {cert.method}")
        lines.append("certificate: " + " ".join(map(str, cert.order)))
        ok &= cert.ok
    lines.append("PASS" if ok else "FAIL")
    _emit("\n".join(lines), args.output)
    return EXIT_OK if ok else EXIT_VERIFY


def _parse_budgets(spec):
    out = {}
    if not spec:
        return out
    for item in spec.split(","):
        if "=" not in item:
            raise UsageError(f"bad budget {item!r}; expected method=iterations")
        m, v = item.split("=", 1)
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}")
        out[m] = int(v)
    return out


def _parse_reference(spec):
    if spec in ("exact", "best"):
        return spec
    if spec == "none":
        return None
    try:
        return float(spec)
    except ValueError:
        raise UsageError(f"bad --reference {spec!r}") from None


def cmd_bench(args):
    methods = tuple(m for m in args.methods.split(",") if m)
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}")
    cfg = BenchConfig(k=args.treewidth, methods=methods, iterations=_parse_budgets(args.iterations),
                      time_budget=args.time_budget_seconds, seed=args.seed, workers=args.workers,
                      node_budget=args.node_budget, reference=_parse_reference(args.reference),
                      exact_max_vars=args.exact_max_vars)
    cfg.validate()
    if args.scores and any(m in ("s2", "s2plus") for m in methods):
        raise UsageError("s2/s2plus need pairwise statistics; use --data or --inverted-tree")
    reports = []
    if args.inverted_tree:
        rng = _rng(args)
        for i in range(args.instances):
            net = inverted_tree_network(args.treewidth, args.n, rng)
            table = forward_sample(net, args.rows, rng)
            cache = build_cache(table, args.treewidth, max_sets=args.max_sets,
                                max_parents=args.max_parents, workers=args.workers)
            reports.append(run_bench(cache, cfg))
    else:
        cache, _ = _cache(args, args.treewidth)
        reports.append(run_bench(cache, cfg))
    text = "\n\n".join(r.to_text() for r in reports)
    if len(reports) > 1:
        means = summarize(reports)
        text += "\n\nmean W: " + " ".join(f"{m}={'-' if w is None else f'{w:.6f}'}" for m, w in means.items())
    _emit(text, args.output)
    if args.records:
        with open(args.records, "w", encoding="utf-8") as fh:
            fh.write("\n".join(r.to_records() for r in reports) + "\n")
    return EXIT_OK


COMMANDS = {"score": cmd_score, "learn": cmd_learn, "exact": cmd_exact, "synth": cmd_synth,
            "verify": cmd_verify, "bench": cmd_bench}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"ktreebn: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except VerificationFailure as e:
        print(f"ktreebn: verification failed: {e}", file=sys.stderr)
        return EXIT_VERIFY
    except (ValueError, OSError, KeyError) as e:
        print(f"ktreebn: {e}", file=sys.stderr)
        return EXIT_RUNTIME
