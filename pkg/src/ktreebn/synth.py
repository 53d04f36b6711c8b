"""Synthetic ground-truth networks and forward sampling."""

import math
from dataclasses import dataclass

import numpy as np

from ._io import open_text
from .dataset import CategoricalTable
from .graph import Dag, parse_dag_lines


@dataclass
class GroundTruthNetwork:
    """DAG with per-node cardinalities and CPTs.

    ``cpts[v]`` has shape (parent configurations, cardinalities[v]); the
    configuration index uses the first parent as least significant digit.
    """

    dag: Dag
    cardinalities: list
    cpts: list

    def __post_init__(self):
        for v, cpt in enumerate(self.cpts):
            q = math.prod(self.cardinalities[p] for p in self.dag.parents[v])
            if cpt.shape != (q, self.cardinalities[v]):
                raise ValueError(f"node {v}: CPT shape {cpt.shape}, expected {(q, self.cardinalities[v])}")
            if not np.allclose(cpt.sum(axis=1), 1.0, atol=1e-9):
                raise ValueError(f"node {v}: CPT rows do not sum to 1")

    @property
    def n(self):
        return self.dag.n


def gen_inverted_tree(k, n, rng):
    """Grow a tree by giving a random parentless node k new parents until
    there are n nodes (truncating the last expansion), then shuffle labels.

    Every node ends with indegree 0 or k, except possibly the node expanded
    last when k does not divide n-1.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < k + 1:
        raise ValueError(f"an inverted tree needs at least k+1={k + 1} nodes")
    parents = [[]]
    leaves = [0]
    while len(parents) < n:
        x = leaves.pop(int(rng.integers(len(leaves))))
        add = min(k, n - len(parents))
        for _ in range(add):
            parents.append([])
            parents[x].append(len(parents) - 1)
            leaves.append(len(parents) - 1)
    perm = rng.permutation(n)
    relabeled = [()] * n
    for v, ps in enumerate(parents):
        relabeled[int(perm[v])] = tuple(int(perm[p]) for p in ps)
    return Dag(relabeled)


def _dirichlet_cpts(dag, cards, rng):
    cpts = []
    for v in range(dag.n):
        q = math.prod(cards[p] for p in dag.parents[v])
        cpts.append(rng.dirichlet(np.ones(cards[v]), size=q))
    return cpts


def inverted_tree_network(k, n, rng):
    """Binary inverted tree with Beta(1,1) conditional distributions."""
    dag = gen_inverted_tree(k, n, rng)
    cards = [2] * n
    return GroundTruthNetwork(dag, cards, _dirichlet_cpts(dag, cards, rng))


def gen_random_network(n, max_parents, card_range, rng):
    """Random DAG over a random topological order; parent counts uniform in
    [0, max_parents] (limited by available predecessors), cardinalities
    uniform in ``card_range`` (inclusive), Dirichlet(1..1) CPTs."""
    lo, hi = card_range
    if lo < 1 or hi < lo:
        raise ValueError("bad cardinality range")
    order = rng.permutation(n)
    parents = [()] * n
    for i, v in enumerate(order):
        m = int(rng.integers(0, max_parents + 1)) if max_parents > 0 else 0
        m = min(m, i)
        if m:
            parents[int(v)] = tuple(int(p) for p in rng.choice(order[:i], m, replace=False))
    dag = Dag(parents)
    cards = [int(c) for c in rng.integers(lo, hi + 1, size=n)]
    return GroundTruthNetwork(dag, cards, _dirichlet_cpts(dag, cards, rng))


def forward_sample(network, N, rng):
    """Ancestral sampling of N rows by inverse CDF."""
    n = network.n
    codes = np.zeros((n, N), dtype=np.int32)
    for v in network.dag.topological_order():
        ps = network.dag.parents[v]
        cfg = np.zeros(N, dtype=np.int64)
        stride = 1
        for p in ps:
            cfg += codes[p].astype(np.int64) * stride
            stride *= network.cardinalities[p]
        cdf = np.cumsum(network.cpts[v], axis=1)
        cdf[:, -1] = 1.0
        u = rng.random(N)
        codes[v] = (u[:, None] >= cdf[cfg]).sum(axis=1)
    names = [f"X{i}" for i in range(n)]
    return CategoricalTable(codes.T, network.cardinalities, names)


def write_network(network, path):
    """DAG file (scores 0) followed by ``index card configs`` blocks with one
    probability line per parent configuration."""
    dag = network.dag
    with open_text(path) as fh:
        fh.write(f"{dag.n} {0.0:.6f}\n")
        for v in range(dag.n):
            ps = dag.parents[v]
            tail = (" " + " ".join(map(str, ps))) if ps else ""
            fh.write(f"{v} {0.0:.6f} {len(ps)}{tail}\n")
        for v in range(dag.n):
            cpt = network.cpts[v]
            fh.write(f"{v} {network.cardinalities[v]} {cpt.shape[0]}\n")
            for row in cpt:
                fh.write(" ".join(f"{p:.6f}" for p in row) + "\n")


def read_network(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    n = int(lines[0].split()[0])
    dagfile = parse_dag_lines([ln.split() for ln in lines[:n + 1]], path)
    dag = Dag(dagfile.parents)
    cards = [0] * n
    cpts = [None] * n
    pos = n + 1
    for _ in range(n):
        if pos >= len(lines):
            raise ValueError(f"{path}: missing CPT blocks")
        v, card, q = (int(t) for t in lines[pos].split())
        if not 0 <= v < n or cpts[v] is not None:
            raise ValueError(f"{path}: bad or duplicate CPT block for node {v}")
        rows = np.array([[float(t) for t in lines[pos + 1 + r].split()] for r in range(q)])
        if rows.shape != (q, card):
            raise ValueError(f"{path}: node {v} CPT has shape {rows.shape}, expected {(q, card)}")
        cards[v] = card
        cpts[v] = rows / rows.sum(axis=1, keepdims=True)
        pos += 1 + q
    if pos != len(lines):
        raise ValueError(f"{path}: trailing content")
    return GroundTruthNetwork(dag, cards, cpts)
