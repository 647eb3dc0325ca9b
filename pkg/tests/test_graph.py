import numpy as np
import pytest

from consflow.errors import AsymmetricNeighbors, IndexOutOfRange
from consflow.graph import Graph, from_neighbor_lists, is_connected, \
    kron_laplacian, laplacian
from consflow.harness import FIVE_AGENT_NEIGHBORS


def degrees(g):
    return [g.degree(i) for i in range(1, g.m + 1)]


def test_builtin5_lists_strip_self_mentions():
    g = from_neighbor_lists(FIVE_AGENT_NEIGHBORS)
    assert g.m == 5
    assert degrees(g) == [3, 2, 3, 3, 1]


def test_two_node_path():
    g = from_neighbor_lists([[2], [1]])
    assert degrees(g) == [1, 1]
    assert g.edges == frozenset({(1, 2)})


def test_asymmetric_lists_rejected():
    with pytest.raises(AsymmetricNeighbors):
        from_neighbor_lists([[2], []])


def test_dict_input_and_out_of_range():
    g = from_neighbor_lists({1: [2], 2: [1]})
    assert g.m == 2
    with pytest.raises(IndexOutOfRange):
        from_neighbor_lists([[2], [1, 5]])


def test_laplacian_two_node_path():
    g = from_neighbor_lists([[2], [1]])
    assert np.array_equal(laplacian(g), np.array([[1.0, -1.0], [-1.0, 1.0]]))


def test_laplacian_builtin5_diagonal():
    g = from_neighbor_lists(FIVE_AGENT_NEIGHBORS)
    L = laplacian(g)
    assert np.array_equal(np.diag(L), np.array([3.0, 2.0, 3.0, 3.0, 1.0]))
    assert np.array_equal(L, L.T)
    # off-diagonal entries are 0 or -1, row sums exactly zero
    off = L[~np.eye(5, dtype=bool)]
    assert set(np.unique(off)) <= {0.0, -1.0}
    assert np.linalg.norm(L @ np.ones(5)) == 0.0


def test_triangle_eigenvalues():
    g = from_neighbor_lists([[2, 3], [1, 3], [1, 2]])
    eigs = np.sort(np.linalg.eigvalsh(laplacian(g)))
    assert np.allclose(eigs, [0.0, 3.0, 3.0], atol=1e-12)


def test_is_connected():
    assert is_connected(from_neighbor_lists(FIVE_AGENT_NEIGHBORS))
    assert not is_connected(Graph(m=2, edges=frozenset()))
    assert is_connected(Graph(m=1, edges=frozenset()))


def test_kron_laplacian_small():
    L = laplacian(from_neighbor_lists([[2], [1]]))
    assert np.array_equal(kron_laplacian(L, 1), L)
    Lb = kron_laplacian(L, 2)
    eye = np.eye(2)
    assert np.array_equal(Lb, np.block([[eye, -eye], [-eye, eye]]))


def test_kron_laplacian_builtin5_rank():
    L = laplacian(from_neighbor_lists(FIVE_AGENT_NEIGHBORS))
    Lb = kron_laplacian(L, 20)
    assert Lb.shape == (100, 100)
    assert np.linalg.matrix_rank(Lb) == 80  # (m - 1) * n for a connected graph


def _random_graph(rng, m, p=0.4):
    edges = set()
    for i in range(1, m + 1):
        for j in range(i + 1, m + 1):
            if rng.uniform() < p:
                edges.add((i, j))
    return Graph(m=m, edges=frozenset(edges))


def _component_count(g):
    seen = set()
    comps = 0
    for start in range(1, g.m + 1):
        if start in seen:
            continue
        comps += 1
        stack = [start]
        seen.add(start)
        while stack:
            node = stack.pop()
            for nxt in g.neighbors(node):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
    return comps


def test_laplacian_kernel_and_connectivity_random(rng):
    for trial in range(30):
        m = int(rng.integers(1, 9))
        g = _random_graph(rng, m)
        L = laplacian(g)
        assert np.linalg.norm(L @ np.ones(m)) == 0.0
        v = rng.standard_normal(3)
        assert np.linalg.norm(kron_laplacian(L, 3) @ np.tile(v, m)) <= 1e-12
        eigs = np.sort(np.linalg.eigvalsh(L))
        zero_mult = int(np.sum(np.abs(eigs) <= 1e-10))
        assert zero_mult == _component_count(g)
        assert is_connected(g) == (zero_mult == 1)
