"""DAGs, moral graphs, k-trees and elimination-order treewidth certificates."""

import heapq
import itertools
import math
from typing import NamedTuple

import numpy as np

from ._io import open_text


class CycleError(ValueError):
    def __init__(self, cycle):
        super().__init__("directed cycle: " + " -> ".join(map(str, cycle)))
        self.cycle = cycle


def find_cycle(parents):
    """A directed cycle as a vertex list (first == last), or None."""
    n = len(parents)
    children = [[] for _ in range(n)]
    for v, ps in enumerate(parents):
        for p in ps:
            children[p].append(v)
    color = [0] * n
    for root in range(n):
        if color[root]:
            continue
        stack = [(root, iter(children[root]))]
        path = [root]
        color[root] = 1
        while stack:
            v, it = stack[-1]
            for c in it:
                if color[c] == 1:
                    return path[path.index(c):] + [c]
                if color[c] == 0:
                    color[c] = 1
                    path.append(c)
                    stack.append((c, iter(children[c])))
                    break
            else:
                color[v] = 2
                path.pop()
                stack.pop()
    return None


class Dag:
    """Directed acyclic graph stored as per-node parent tuples.

    ``scores`` holds per-node local scores (or None).  ``nodes`` is the vertex
    subset the DAG covers (all by default); vertices outside it carry no arcs
    and do not count in ``total_score``.  ``certificate`` is an elimination
    order known to witness the treewidth bound, when the producer has one.
    """

    def __init__(self, parents, scores=None, nodes=None, certificate=None, validate=True):
        self.parents = [tuple(sorted(int(p) for p in ps)) for ps in parents]
        n = len(self.parents)
        self.scores = list(scores) if scores is not None else None
        self.nodes = tuple(range(n)) if nodes is None else tuple(sorted(nodes))
        self.certificate = tuple(certificate) if certificate is not None else None
        self.ktree = None
        self.info = {}
        if validate:
            for v, ps in enumerate(self.parents):
                for p in ps:
                    if not 0 <= p < n or p == v:
                        raise ValueError(f"node {v} has invalid parent {p}")
            cyc = find_cycle(self.parents)
            if cyc is not None:
                raise CycleError(cyc)

    @property
    def n(self):
        return len(self.parents)

    @property
    def total_score(self):
        if self.scores is None:
            return None
        return math.fsum(self.scores[v] for v in self.nodes)

    def arcs(self):
        return [(p, v) for v, ps in enumerate(self.parents) for p in ps]

    def topological_order(self):
        """Kahn's order, smallest ready index first."""
        n = self.n
        indeg = [len(ps) for ps in self.parents]
        children = [[] for _ in range(n)]
        for v, ps in enumerate(self.parents):
            for p in ps:
                children[p].append(v)
        ready = [v for v in range(n) if indeg[v] == 0]
        heapq.heapify(ready)
        out = []
        while ready:
            v = heapq.heappop(ready)
            out.append(v)
            for c in children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(ready, c)
        if len(out) != n:
            raise CycleError(find_cycle(self.parents))
        return out

    def __eq__(self, other):
        return isinstance(other, Dag) and self.parents == other.parents

    def __repr__(self):
        return f"Dag(n={self.n}, arcs={len(self.arcs())}, score={self.total_score})"


class UndirectedGraph:
    def __init__(self, n, edges=()):
        self.adj = [set() for _ in range(n)]
        for u, v in edges:
            self.add_edge(u, v)

    @property
    def n(self):
        return len(self.adj)

    def add_edge(self, u, v):
        if u == v:
            raise ValueError("self-loops are not allowed")
        self.adj[u].add(v)
        self.adj[v].add(u)

    def edges(self):
        return sorted((u, v) for u in range(self.n) for v in self.adj[u] if u < v)


def moral_graph(dag):
    g = UndirectedGraph(dag.n)
    for v, ps in enumerate(dag.parents):
        for p in ps:
            g.add_edge(p, v)
        for a, b in itertools.combinations(ps, 2):
            g.add_edge(a, b)
    return g


def elimination_width(graph, order):
    """Largest neighbour count at elimination time, with fill-in."""
    order = list(order)
    if sorted(order) != list(range(graph.n)):
        raise ValueError("order is not a permutation of the vertices")
    adj = [set(nb) for nb in graph.adj]
    width = 0
    for v in order:
        nb = adj[v]
        width = max(width, len(nb))
        for a in nb:
            adj[a].discard(v)
            adj[a].update(nb - {a})
        adj[v] = set()
    return width


def _greedy_reverse_topological(dag, graph):
    """Reverse topological order eliminating the lowest-degree sink first."""
    adj = [set(nb) for nb in graph.adj]
    pending = [0] * dag.n
    for v, ps in enumerate(dag.parents):
        for p in ps:
            pending[p] += 1
    heap = [(len(adj[v]), v) for v in range(dag.n) if pending[v] == 0]
    heapq.heapify(heap)
    done = [False] * dag.n
    order = []
    while heap:
        d, v = heapq.heappop(heap)
        if done[v] or d != len(adj[v]):
            if not done[v]:
                heapq.heappush(heap, (len(adj[v]), v))
            continue
        done[v] = True
        order.append(v)
        nb = adj[v]
        touched = set(nb)
        for a in nb:
            adj[a].discard(v)
            adj[a].update(nb - {a})
        adj[v] = set()
        for p in dag.parents[v]:
            pending[p] -= 1
        for u in touched | set(dag.parents[v]):
            if not done[u] and pending[u] == 0:
                heapq.heappush(heap, (len(adj[u]), u))
    return order


def min_fill_order(graph):
    adj = [set(nb) for nb in graph.adj]
    alive = set(range(graph.n))
    order = []
    while alive:
        best = None
        for v in sorted(alive):
            nb = adj[v]
            fill = sum(1 for a, b in itertools.combinations(nb, 2) if b not in adj[a])
            key = (fill, len(nb), v)
            if best is None or key < best:
                best = key
        v = best[2]
        nb = adj[v]
        for a in nb:
            adj[a].discard(v)
            adj[a].update(nb - {a})
        adj[v] = set()
        alive.discard(v)
        order.append(v)
    return order


class TreewidthCertificate(NamedTuple):
    ok: bool
    order: tuple
    width: int
    method: str


def verify_treewidth_le(dag, k, elimination_order=None, min_fill=False):
    """Check treewidth <= k through elimination-order certificates.

    Tries, in turn: an explicit order, the DAG's own certificate, a greedy
    reverse topological order and (optionally) min-fill.  A failed check
    means no tried certificate reached width k, not that treewidth > k.
    """
    g = moral_graph(dag)
    candidates = []
    if elimination_order is not None:
        candidates.append(("given", elimination_order))
    if dag.certificate is not None:
        candidates.append(("certificate", dag.certificate))
    candidates.append(("reverse_topological", _greedy_reverse_topological(dag, g)))
    if min_fill:
        candidates.append(("min_fill", min_fill_order(g)))
    best = None
    for name, order in candidates:
        wdt = elimination_width(g, order)
        if best is None or wdt < best.width:
            best = TreewidthCertificate(wdt <= k, tuple(order), wdt, name)
        if wdt <= k:
            return best
    return best


# ---------------------------------------------------------------------------
# k-trees


class KTree:
    """A k-tree grown one vertex at a time on a fixed vertex capacity.

    Keeps adjacency both as Python sets and as a bit matrix (diagonal bit =
    vertex present) for the compiled kernels.  ``cliques`` is the roster of
    registered k-cliques as sorted tuples in registration order; ``big`` the
    (k+1)-cliques.
    """

    def __init__(self, k, capacity):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.capacity = capacity
        self.adj = [set() for _ in range(capacity)]
        self.present = bytearray(capacity)
        self.bits = np.zeros((capacity, (capacity + 63) // 64), dtype=np.uint64)
        self.cliques = []
        self.index = {}
        self.big = []
        self.containing = [[] for _ in range(capacity)]
        self.order = []
        self.attach = []

    @property
    def vertices(self):
        return list(self.order)

    def _set_bit(self, u, v):
        self.bits[u, v >> 6] |= np.uint64(1 << (v & 63))

    def _add_vertex(self, v):
        if not 0 <= v < self.capacity:
            raise IndexError(f"vertex {v} outside capacity {self.capacity}")
        if self.present[v]:
            raise ValueError(f"vertex {v} already in the k-tree")
        self.present[v] = 1
        self._set_bit(v, v)
        self.order.append(v)

    def _connect(self, u, v):
        self.adj[u].add(v)
        self.adj[v].add(u)
        self._set_bit(u, v)
        self._set_bit(v, u)

    def _register(self, clique):
        if clique in self.index:
            return
        self.index[clique] = len(self.cliques)
        for v in clique:
            self.containing[v].append(len(self.cliques))
        self.cliques.append(clique)

    def clique_containing(self, subset):
        """First registered k-clique (roster order) containing ``subset``."""
        subset = tuple(subset)
        if not subset:
            return self.cliques[0]
        s = set(subset)
        for ci in self.containing[subset[0]]:
            c = self.cliques[ci]
            if s.issubset(c):
                return c
        return None

    def edges(self):
        return sorted((u, v) for u in self.order for v in self.adj[u] if u < v)

    def copy(self):
        t = KTree.__new__(KTree)
        t.k, t.capacity = self.k, self.capacity
        t.adj = [set(a) for a in self.adj]
        t.present = bytearray(self.present)
        t.bits = self.bits.copy()
        t.cliques = list(self.cliques)
        t.index = dict(self.index)
        t.big = list(self.big)
        t.containing = [list(c) for c in self.containing]
        t.order = list(self.order)
        t.attach = list(self.attach)
        return t

    def elimination_order(self):
        """Reverse insertion order: a perfect elimination order of the k-tree."""
        return tuple(reversed(self.order))

    def __repr__(self):
        return f"KTree(k={self.k}, vertices={len(self.order)}, cliques={len(self.cliques)})"


def ktree_init(clique, capacity=None):
    """k-tree consisting of a single (k+1)-clique."""
    clique = tuple(int(v) for v in clique)
    if len(set(clique)) != len(clique):
        raise ValueError("duplicate vertices in the initial clique")
    k = len(clique) - 1
    if k < 1:
        raise ValueError("initial clique needs at least two vertices")
    cap = capacity if capacity is not None else max(clique) + 1
    t = KTree(k, cap)
    clique = tuple(sorted(clique))
    for v in clique:
        t._add_vertex(v)
    for a, b in itertools.combinations(clique, 2):
        t._connect(a, b)
    for sub in itertools.combinations(clique, k):
        t._register(sub)
    t.big.append(clique)
    return t


def ktree_add(ktree, z, clique):
    """Attach new vertex ``z`` to registered k-clique ``clique`` (in place)."""
    clique = tuple(sorted(clique))
    if clique not in ktree.index:
        raise ValueError(f"{clique} is not a registered {ktree.k}-clique")
    ktree._add_vertex(z)
    for c in clique:
        ktree._connect(z, c)
    for c in clique:
        ktree._register(tuple(sorted(set(clique) - {c} | {z})))
    ktree.big.append(tuple(sorted(clique + (z,))))
    ktree.attach.append(clique)
    return ktree


def is_moral_subgraph(dag, ktree):
    for u, v in moral_graph(dag).edges():
        if v not in ktree.adj[u]:
            return False
    return True


# ---------------------------------------------------------------------------
# DAG files


def write_dag(dag, path):
    """``n total_score`` then one ``index score size parents..`` line per node.

    Node lines follow the DAG's construction order (reverse of its treewidth
    certificate) when it has one, otherwise ascending index.
    """
    total = dag.total_score if dag.scores is not None else 0.0
    order = list(reversed(dag.certificate)) if dag.certificate is not None else range(dag.n)
    with open_text(path) as fh:
        fh.write(f"{dag.n} {total:.6f}\n")
        for v in order:
            s = dag.scores[v] if dag.scores is not None and dag.scores[v] is not None else 0.0
            ps = dag.parents[v]
            tail = (" " + " ".join(map(str, ps))) if ps else ""
            fh.write(f"{v} {s:.6f} {len(ps)}{tail}\n")


class DagFile(NamedTuple):
    parents: list
    scores: list
    total: float
    line_order: list


def parse_dag_lines(lines, source="<dag>"):
    """Parse tokenised DAG lines (header first) without validating acyclicity."""
    if not lines or len(lines[0]) != 2:
        raise ValueError(f"{source}: malformed header")
    n, total = int(lines[0][0]), float(lines[0][1])
    if len(lines) - 1 != n:
        raise ValueError(f"{source}: header declares {n} nodes, found {len(lines) - 1}")
    parents = [None] * n
    scores = [0.0] * n
    line_order = []
    for toks in lines[1:]:
        if len(toks) < 3:
            raise ValueError(f"{source}: short node line {' '.join(toks)!r}")
        v, s, c = int(toks[0]), float(toks[1]), int(toks[2])
        if not 0 <= v < n or parents[v] is not None:
            raise ValueError(f"{source}: bad or duplicate node index {v}")
        ps = tuple(int(t) for t in toks[3:])
        if len(ps) != c:
            raise ValueError(f"{source}: node {v} declares {c} parents, lists {len(ps)}")
        parents[v], scores[v] = ps, s
        line_order.append(v)
    return DagFile(parents, scores, total, line_order)


def read_dag_file(path):
    """Parse a DAG file without validating acyclicity."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    return parse_dag_lines(lines, path)


def read_dag(path):
    f = read_dag_file(path)
    return Dag(f.parents, f.scores, certificate=list(reversed(f.line_order)))
