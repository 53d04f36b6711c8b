"""Treewidth-bounded Bayesian network structure learning."""

from ._backend import BACKEND
from .dataset import CategoricalTable, load_csv, count
from .scoring import ScoreCache, build_cache, read_scores, write_scores
from .graph import Dag, KTree, verify_treewidth_le, is_moral_subgraph, read_dag, write_dag
from .exact import exact_learn
from .search import kg_learn, kastar_learn, anytime_learn
from .baseline import s2_learn, s2plus_learn

__version__ = "0.1.0"
