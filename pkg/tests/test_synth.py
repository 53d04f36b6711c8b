import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ktreebn.graph import Dag, verify_treewidth_le
from ktreebn.synth import (GroundTruthNetwork, forward_sample, gen_inverted_tree,
                           gen_random_network, inverted_tree_network, read_network,
                           write_network)


@given(st.integers(1, 4), st.integers(1, 40), st.integers(0, 2 ** 32))
@settings(max_examples=80, deadline=None)
def test_inverted_tree_shape(k, extra, seed):
    n = k + extra
    dag = gen_inverted_tree(k, n, np.random.default_rng(seed))
    indeg = [len(p) for p in dag.parents]
    outdeg = [0] * n
    for v, ps in enumerate(dag.parents):
        for p in ps:
            outdeg[p] += 1
    assert sum(indeg) == n - 1
    assert sum(d not in (0, k) for d in indeg) <= 1
    assert sorted(outdeg).count(0) == 1 and max(outdeg) == 1
    assert verify_treewidth_le(dag, k, min_fill=True).ok


def test_inverted_tree_full_expansions():
    dag = gen_inverted_tree(2, 21, np.random.default_rng(0))
    assert all(len(p) in (0, 2) for p in dag.parents)


def test_inverted_tree_rejects_small():
    with pytest.raises(ValueError):
        gen_inverted_tree(3, 3, np.random.default_rng(0))


def test_random_network_bounds():
    rng = np.random.default_rng(1)
    net = gen_random_network(15, 3, (2, 4), rng)
    assert max(len(p) for p in net.dag.parents) <= 3
    assert all(2 <= c <= 4 for c in net.cardinalities)
    assert len(net.dag.topological_order()) == 15


def test_forward_sample_matches_cpts():
    rng = np.random.default_rng(2)
    dag = Dag([(), (0,)])
    cpts = [np.array([[0.3, 0.7]]), np.array([[0.9, 0.1], [0.2, 0.8]])]
    net = GroundTruthNetwork(dag, [2, 2], cpts)
    t = forward_sample(net, 200000, rng)
    x0, x1 = t.codes[0], t.codes[1]
    assert np.mean(x0 == 1) == pytest.approx(0.7, abs=0.01)
    assert np.mean(x1[x0 == 0] == 1) == pytest.approx(0.1, abs=0.01)
    assert np.mean(x1[x0 == 1] == 1) == pytest.approx(0.8, abs=0.01)


def test_forward_sample_deterministic():
    net = inverted_tree_network(2, 9, np.random.default_rng(5))
    a = forward_sample(net, 100, np.random.default_rng(9))
    b = forward_sample(net, 100, np.random.default_rng(9))
    assert np.array_equal(a.codes, b.codes)


def test_network_roundtrip(tmp_path):
    net = gen_random_network(8, 2, (2, 3), np.random.default_rng(3))
    path = tmp_path / "net.txt"
    write_network(net, path)
    back = read_network(path)
    assert back.dag == net.dag
    assert back.cardinalities == net.cardinalities
    for a, b in zip(back.cpts, net.cpts):
        assert np.allclose(a, b, atol=1e-6)
    buf = io.StringIO()
    write_network(net, buf)
    assert buf.getvalue() == path.read_text()


def test_network_validation():
    dag = Dag([(), (0,)])
    with pytest.raises(ValueError):
        GroundTruthNetwork(dag, [2, 2], [np.array([[0.5, 0.5]]), np.array([[0.5, 0.5]])])
    with pytest.raises(ValueError):
        GroundTruthNetwork(dag, [2, 2], [np.array([[0.5, 0.6]]), np.array([[1, 0], [0, 1.0]])])


def test_read_network_truncated(tmp_path):
    net = inverted_tree_network(2, 5, np.random.default_rng(0))
    path = tmp_path / "net.txt"
    write_network(net, path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-2]) + "\n")
    with pytest.raises(ValueError):
        read_network(path)
