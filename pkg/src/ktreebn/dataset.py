"""Complete categorical datasets and contingency counts."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._io import open_text

log = logging.getLogger(__name__)


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class CategoricalTable:
    """N rows over n categorical variables, stored column-wise.

    Parameters
    ----------
    cells : array-like, shape (N, n)
        Integer state indices; ``cells[r, i] < cardinalities[i]``.
    cardinalities : sequence of int, optional
        Number of states per variable.  Defaults to ``max + 1`` per column.
    names : sequence of str, optional
    """

    def __init__(self, cells, cardinalities=None, names=None):
        cells = np.asarray(cells)
        if cells.ndim != 2 or cells.shape[0] < 1 or cells.shape[1] < 1:
            raise DataError("need a non-empty 2-D table of state indices")
        if cells.min() < 0:
            raise DataError("state indices must be non-negative")
        N, n = cells.shape
        if cardinalities is None:
            cardinalities = cells.max(axis=0) + 1
        cards = [int(c) for c in cardinalities]
        if len(cards) != n:
            raise DataError(f"{len(cards)} cardinalities for {n} columns")
        over = cells.max(axis=0) >= np.asarray(cards)
        if over.any():
            raise DataError(f"column {int(np.argmax(over))} has a state >= its cardinality")
        self.codes = np.ascontiguousarray(cells.T, dtype=np.int32)
        self.codes.flags.writeable = False
        self.cardinalities = tuple(cards)
        self.names = tuple(names) if names is not None else tuple(f"X{i}" for i in range(n))
        if len(self.names) != n:
            raise DataError("names and columns differ in length")

    @property
    def n(self):
        return self.codes.shape[0]

    @property
    def N(self):
        return self.codes.shape[1]

    @property
    def cells(self):
        """Row-major view, shape (N, n)."""
        return self.codes.T

    def __repr__(self):
        return f"CategoricalTable(n={self.n}, N={self.N})"


def load_csv(path, has_header=True):
    """Read a comma-separated file of categorical tokens.

    Tokens of each column are mapped to 0..card-1 in order of first
    appearance.  No quoting is supported.
    """
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\r\n") for ln in fh]
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty file")
    names = None
    if has_header:
        names = [t.strip() for t in lines[0].split(",")]
        lines = lines[1:]
        if not lines:
            raise DataError(f"{path}: header but no data rows")
    width = len(names) if names is not None else len(lines[0].split(","))
    vocab = [{} for _ in range(width)]
    cells = np.empty((len(lines), width), dtype=np.int32)
    for r, ln in enumerate(lines):
        toks = [t.strip() for t in ln.split(",")]
        if len(toks) != width:
            raise DataError(f"{path}: row {r + 1} has {len(toks)} fields, expected {width}")
        for i, t in enumerate(toks):
            if t == "":
                raise DataError(f"{path}: missing value in row {r + 1}, column {i}")
            cells[r, i] = vocab[i].setdefault(t, len(vocab[i]))
    cards = [len(v) for v in vocab]
    for i, c in enumerate(cards):
        if c == 1:
            log.warning("column %d has a single distinct value; its penalty term is zero", i)
    return CategoricalTable(cells, cards, names)


def write_csv(table, path, header=True):
    with open_text(path) as fh:
        if header:
            fh.write(",".join(table.names) + "\n")
        for row in table.cells:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


@dataclass
class ContingencyCounts:
    """Joint counts of a target variable and an ordered parent tuple.

    Parent configurations are mixed-radix indices with the first parent as
    the least significant digit.
    """

    target: int
    parents: tuple
    counts: dict = field(default_factory=dict)
    parent_config_space: int = 1

    def total(self):
        return sum(self.counts.values())

    def histograms(self):
        """Multiset view: sorted list of per-configuration target histograms."""
        per = {}
        for (pi, x), c in self.counts.items():
            per.setdefault(pi, {})[x] = c
        return sorted(tuple(sorted(h.items())) for h in per.values())


def count(table, target, parents):
    """Aggregate rows by (parent configuration, target state)."""
    parents = tuple(int(p) for p in parents)
    if target in parents:
        raise ValueError(f"target {target} is among its parents")
    for v in (target, *parents):
        if not 0 <= v < table.n:
            raise IndexError(f"variable {v} out of range")
    cards = table.cardinalities
    space = math.prod(cards[p] for p in parents)
    cfg = np.zeros(table.N, dtype=np.int64)
    stride = 1
    for p in parents:
        cfg += table.codes[p].astype(np.int64) * stride
        stride *= cards[p]
    keys = cfg * cards[target] + table.codes[target]
    uniq, cnt = np.unique(keys, return_counts=True)
    counts = {(int(k // cards[target]), int(k % cards[target])): int(c) for k, c in zip(uniq, cnt)}
    return ContingencyCounts(target, parents, counts, space)
