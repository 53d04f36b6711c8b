"""Method comparison on a shared score cache with W-score reporting."""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .baseline import s2_learn, s2plus_learn
from .exact import MAX_EXACT_VARS, exact_learn
from .graph import is_moral_subgraph, verify_treewidth_le
from .search import DEFAULT_NODE_BUDGET, anytime_learn

METHODS = ("kg", "kastar", "s2", "s2plus", "exact")


class VerificationFailure(RuntimeError):
    pass


def w_score(G, T):
    """Relative worsening of score T against reference G (both < 0).

    Normalised by |G| so that a worse T gives a positive value.
    """
    if G >= 0 or T >= 0:
        raise ValueError("W-score needs negative scores")
    return (G - T) / abs(G)


@dataclass
class BenchConfig:
    """Methods to run and their budgets.

    ``iterations`` maps method to an iteration budget; methods missing from it
    use ``time_budget`` seconds.  ``reference`` is "exact", "best" (best score
    across methods), a number, or None.
    """

    k: int
    methods: tuple = ("kg", "kastar", "s2", "s2plus")
    iterations: dict = field(default_factory=dict)
    time_budget: float = None
    seed: int = 0
    workers: int = 1
    node_budget: int = DEFAULT_NODE_BUDGET
    reference: object = "exact"
    exact_max_vars: int = MAX_EXACT_VARS

    def validate(self):
        if self.k < 1:
            raise ValueError("treewidth bound must be >= 1")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
            it = self.iterations.get(m)
            if m == "exact":
                continue
            if it is None and self.time_budget is None:
                raise ValueError(f"method {m} has no budget")
            if it is not None and it <= 0:
                raise ValueError(f"method {m}: iteration budget must be positive")
            if it is None and self.time_budget <= 0:
                raise ValueError("time budget must be positive")


@dataclass
class MethodResult:
    method: str
    score: float
    iterations: int
    median: float
    max: float
    wall_clock: float
    width: int
    dag: object = None
    w: float = None


@dataclass
class BenchReport:
    k: int
    n: int
    seed: int
    results: list
    reference: float = None
    reference_kind: str = None

    def by_method(self, m):
        for r in self.results:
            if r.method == m:
                return r
        raise KeyError(m)

    def to_text(self):
        head = f"{'method':<8} {'score':>16} {'W':>10} {'iters':>8} {'median':>16} {'max':>16} {'width':>5} {'secs':>8}"
        lines = [f"n={self.n} k={self.k} seed={self.seed} reference={_fmt(self.reference)} ({self.reference_kind})",
                 head, "-" * len(head)]
        for r in self.results:
            w = "-" if r.w is None else f"{r.w:.6f}"
            flag = " *" if r.w is not None and r.w < 0 else ""
            lines.append(f"{r.method:<8} {r.score:>16.6f} {w:>10} {r.iterations:>8} {r.median:>16.6f} "
                         f"{r.max:>16.6f} {r.width:>5} {r.wall_clock:>8.2f}{flag}")
        if any(r.w is not None and r.w < 0 for r in self.results):
            lines.append("* scored above the reference")
        return "\n".join(lines)

    def to_records(self):
        out = [f"bench n={self.n} k={self.k} seed={self.seed} reference={_fmt(self.reference)} "
               f"reference_kind={self.reference_kind}"]
        for r in self.results:
            out.append(f"method={r.method} score={r.score:.6f} w={_fmt(r.w)} iterations={r.iterations} "
                       f"median={r.median:.6f} max={r.max:.6f} width={r.width} wall_clock={r.wall_clock:.3f}")
        return "\n".join(out)


def _fmt(x):
    return "none" if x is None else f"{x:.6f}"


def _run_method(method, cache, config):
    rng = np.random.default_rng(config.seed)
    it = config.iterations.get(method)
    tb = None if it is not None else config.time_budget
    if method in ("kg", "kastar"):
        return anytime_learn(method, cache, config.k, time_budget=tb, max_iterations=it, rng=rng,
                             workers=config.workers, node_budget=config.node_budget)
    fn = s2_learn if method == "s2" else s2plus_learn
    return fn(cache, config.k, time_budget=tb, max_iterations=it, rng=rng, workers=config.workers)


def check_bounded(dag, k):
    """Treewidth certificate and k-tree containment for a bounded method's DAG."""
    cert = verify_treewidth_le(dag, k, min_fill=True)
    if not cert.ok:
        raise VerificationFailure(f"DAG width certificate {cert.width} exceeds k={k}")
    if dag.ktree is not None and not is_moral_subgraph(dag, dag.ktree):
        raise VerificationFailure("moral graph is not inside the k-tree")
    return cert


def run_bench(cache, config):
    """Run every configured method on ``cache`` and score them against the reference."""
    config.validate()
    results = []
    for m in config.methods:
        start = time.monotonic()
        if m == "exact":
            dag = exact_learn(cache, max_vars=config.exact_max_vars)
            cert = verify_treewidth_le(dag, config.k, min_fill=True)
            s = dag.total_score
            results.append(MethodResult(m, s, 1, s, s, time.monotonic() - start, cert.width, dag))
            continue
        reg = _run_method(m, cache, config)
        cert = check_bounded(reg.best_dag, config.k)
        results.append(MethodResult(m, reg.best_score, reg.iterations, reg.median, reg.max,
                                    reg.wall_clock, cert.width, reg.best_dag))
    ref, kind = _reference(cache, config, results)
    if ref is not None:
        for r in results:
            r.w = w_score(ref, r.score)
    return BenchReport(config.k, cache.n, config.seed, results, ref, kind)


def _reference(cache, config, results):
    ref = config.reference
    if ref is None:
        return None, None
    if isinstance(ref, (int, float)):
        return float(ref), "given"
    if ref == "best":
        return max(r.score for r in results), "best"
    if ref == "exact":
        for r in results:
            if r.method == "exact":
                return r.score, "exact"
        if cache.n > config.exact_max_vars:
            return None, "unavailable"
        return exact_learn(cache, max_vars=config.exact_max_vars).total_score, "exact"
    raise ValueError(f"unknown reference {ref!r}")


def summarize(reports):
    """Mean W per method over several reports."""
    methods = [r.method for r in reports[0].results]
    out = {}
    for m in methods:
        ws = [rep.by_method(m).w for rep in reports]
        out[m] = math.fsum(ws) / len(ws) if all(w is not None for w in ws) else None
    return out
