import numpy as np
import pytest
from hypothesis import given, strategies as st

from amgcn.graphs import (
    SimilarityMetric,
    SparseGraph,
    build_knn_graph,
    cosine_similarity,
    heat_kernel_similarity,
    normalize_adjacency,
    spmm,
)

from oracles import brute_force_knn_edges, dense_normalized_adjacency


def random_graph(rng, n, p=0.3):
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    return SparseGraph.from_edges(n, np.column_stack([iu[keep], ju[keep]]))


class TestCosineSimilarity:
    def test_identical_rows(self):
        x = np.array([[1.0, 2.0], [1.0, 2.0]])
        s = cosine_similarity(x)
        assert s[0, 1] == pytest.approx(1.0)

    def test_orthogonal_rows(self):
        s = cosine_similarity(np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert s[0, 1] == pytest.approx(0.0, abs=1e-15)

    def test_45_degrees(self):
        s = cosine_similarity(np.array([[1.0, 1.0], [1.0, 0.0]]))
        assert s[0, 1] == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-12)
        assert s[0, 1] == pytest.approx(0.70711, abs=5e-6)

    def test_zero_norm_row_gets_zero_similarity(self):
        s = cosine_similarity(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]))
        assert np.all(s[0] == 0.0)
        assert np.all(s[:, 0] == 0.0)
        assert s[1, 1] == 1.0

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            cosine_similarity(np.array([[1.0, np.nan]]))

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        s = cosine_similarity(rng.standard_normal((20, 5)))
        assert np.array_equal(s, s.T)
        assert np.allclose(np.diag(s), 1.0)


class TestHeatKernelSimilarity:
    def test_zero_distance(self):
        s = heat_kernel_similarity(np.array([[1.0, 2.0], [1.0, 2.0]]), t=2.0)
        assert s[0, 1] == pytest.approx(1.0)

    def test_known_distances(self):
        # ||x0 - x1||^2 = 2 and ||x0 - x2||^2 = 4 with t = 2
        x = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]])
        s = heat_kernel_similarity(x, t=2.0)
        assert s[0, 1] == pytest.approx(np.exp(-1.0), abs=1e-12)
        assert s[0, 2] == pytest.approx(np.exp(-2.0), abs=1e-12)

    def test_entries_in_unit_interval(self):
        rng = np.random.default_rng(1)
        s = heat_kernel_similarity(rng.standard_normal((15, 4)) * 3, t=2.0)
        assert np.all(s > 0)
        assert np.all(s <= 1)
        assert np.array_equal(s, s.T)

    def test_rejects_bad_t(self):
        with pytest.raises(ValueError):
            heat_kernel_similarity(np.zeros((2, 2)), t=0.0)
        with pytest.raises(ValueError):
            SimilarityMetric("heat", t=-1.0)


class TestBuildKnnGraph:
    def test_three_collinear_points(self):
        # points at 0, 1, 10: node 0 and 1 pick each other, node 2 picks 1
        x = np.array([[0.0], [1.0], [10.0]])
        g = build_knn_graph(x, k=1, metric=SimilarityMetric.heat(2.0))
        assert set(map(tuple, g.edge_list())) == {(0, 1), (1, 2)}

    def test_complete_graph_at_max_k(self):
        rng = np.random.default_rng(2)
        n = 8
        g = build_knn_graph(rng.standard_normal((n, 3)), k=n - 1)
        assert g.num_edges == n * (n - 1) // 2

    def test_duplicate_rows_become_mutual_neighbors(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((6, 4))
        x[3] = x[0]
        g = build_knn_graph(x, k=1)
        edges = set(map(tuple, g.edge_list()))
        assert (0, 3) in edges

    def test_k_out_of_range(self):
        x = np.zeros((4, 2))
        with pytest.raises(ValueError):
            build_knn_graph(x, k=4)
        with pytest.raises(ValueError):
            build_knn_graph(x, k=0)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        n, k = 15, 3
        x = rng.standard_normal((n, 4))
        g = build_knn_graph(x, k)
        s = cosine_similarity(x)
        assert set(map(tuple, g.edge_list())) == brute_force_knn_edges(s, k)

    @given(st.integers(0, 1000), st.integers(1, 4))
    def test_symmetric_selfloop_free_min_degree(self, seed, k):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(k + 1, 20))
        g = build_knn_graph(rng.standard_normal((n, 3)), k)
        g.validate()  # symmetry, sorted columns, no self-loops
        assert g.degrees().min() >= k


class TestNormalizeAdjacency:
    def test_single_isolated_node(self):
        g = SparseGraph.from_edges(1, np.empty((0, 2)))
        norm = normalize_adjacency(g)
        assert norm.to_dense() == pytest.approx(np.array([[1.0]]))

    def test_two_nodes_one_edge(self):
        g = SparseGraph.from_edges(2, [[0, 1]])
        assert normalize_adjacency(g).to_dense() == pytest.approx(np.full((2, 2), 0.5))

    def test_path_graph(self):
        g = SparseGraph.from_edges(3, [[0, 1], [1, 2]])
        dense = normalize_adjacency(g).to_dense()
        assert np.diag(dense) == pytest.approx([0.5, 1 / 3, 0.5])
        assert dense[0, 1] == pytest.approx(1 / np.sqrt(6), abs=1e-12)
        assert dense[0, 1] == pytest.approx(0.40825, abs=5e-6)

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_dense_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 50))
        g = random_graph(rng, n)
        ours = normalize_adjacency(g).to_dense()
        oracle = dense_normalized_adjacency(g.to_scipy().toarray())
        assert np.max(np.abs(ours - oracle)) < 1e-12

    def test_entry_formula(self):
        rng = np.random.default_rng(11)
        g = random_graph(rng, 12)
        norm = normalize_adjacency(g)
        deg = g.degrees() + 1.0
        dense = norm.to_dense()
        for i in range(12):
            for j in range(12):
                if dense[i, j] != 0:
                    assert dense[i, j] == pytest.approx(1 / np.sqrt(deg[i] * deg[j]), abs=1e-14)


class TestSpmm:
    def test_identity_structure(self):
        g = SparseGraph.from_edges(4, np.empty((0, 2)))
        norm = normalize_adjacency(g)
        h = np.arange(8.0).reshape(4, 2)
        assert spmm(norm, h) == pytest.approx(h)

    def test_zeros(self):
        rng = np.random.default_rng(4)
        norm = normalize_adjacency(random_graph(rng, 10))
        assert np.all(spmm(norm, np.zeros((10, 3))) == 0)

    def test_two_node_example(self):
        norm = normalize_adjacency(SparseGraph.from_edges(2, [[0, 1]]))
        out = spmm(norm, np.eye(2))
        assert out == pytest.approx(np.full((2, 2), 0.5))

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_dense_product(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 50))
        norm = normalize_adjacency(random_graph(rng, n))
        h = rng.standard_normal((n, 7))
        exact = norm.to_dense() @ h
        assert np.max(np.abs(spmm(norm, h) - exact)) < 1e-12

    def test_dimension_mismatch(self):
        norm = normalize_adjacency(SparseGraph.from_edges(2, [[0, 1]]))
        with pytest.raises(ValueError):
            spmm(norm, np.zeros((3, 2)))


class TestSparseGraph:
    def test_from_edges_dedupes_and_symmetrizes(self):
        g = SparseGraph.from_edges(3, [[0, 1], [1, 0], [0, 1], [2, 1]])
        assert g.num_edges == 2
        g.validate()

    def test_rejects_self_loop(self):
        with pytest.raises(ValueError):
            SparseGraph.from_edges(3, [[1, 1]])

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            SparseGraph.from_edges(3, [[0, 3]])
