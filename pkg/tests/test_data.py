from pathlib import Path

import numpy as np
import pytest

from amgcn.data import (
    DatasetFormatError,
    DatasetWarning,
    SyntheticSpec,
    CASE_GAUSSIAN,
    generate_case1,
    generate_case2,
    load_dataset,
    make_split,
    save_dataset,
    with_split,
)

from oracles import nearest_centroid_accuracy


def binomial_bounds(trials, p, sigmas=4.0):
    mean = trials * p
    std = np.sqrt(trials * p * (1 - p))
    return mean - sigmas * std, mean + sigmas * std


@pytest.fixture(scope="module")
def case1_dataset():
    return generate_case1(0)


@pytest.fixture(scope="module")
def case2_dataset():
    return generate_case2(0)


class TestGenerateCase1:

    def test_shape(self, case1_dataset):
        assert case1_dataset.n == 900
        assert case1_dataset.features.shape == (900, 50)
        assert case1_dataset.n_classes == 3

    def test_balanced_labels(self, case1_dataset):
        assert np.bincount(case1_dataset.labels).tolist() == [300, 300, 300]

    def test_edge_count_within_binomial_bounds(self, case1_dataset):
        lo, hi = binomial_bounds(900 * 899 // 2, 0.03)
        assert lo <= case1_dataset.graph.num_edges <= hi

    def test_split_sizes(self, case1_dataset):
        assert case1_dataset.train_idx.size == 60
        assert case1_dataset.test_idx.size == 600
        assert np.intersect1d(case1_dataset.train_idx, case1_dataset.test_idx).size == 0
        for c in range(3):
            assert np.sum(case1_dataset.labels[case1_dataset.train_idx] == c) == 20
            assert np.sum(case1_dataset.labels[case1_dataset.test_idx] == c) == 200

    def test_center_separation(self, case1_dataset):
        centroids = np.stack([case1_dataset.features[case1_dataset.labels == c].mean(axis=0) for c in range(3)])
        for i in range(3):
            for j in range(i + 1, 3):
                d = np.linalg.norm(centroids[i] - centroids[j])
                assert d == pytest.approx(10.0, abs=0.5)

    def test_deterministic(self):
        a = generate_case1(7)
        b = generate_case1(7)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.graph.col_idx, b.graph.col_idx)
        assert np.array_equal(a.train_idx, b.train_idx)

    def test_features_carry_label_signal(self, case1_dataset):
        acc = nearest_centroid_accuracy(
            case1_dataset.features, case1_dataset.labels, case1_dataset.train_idx, case1_dataset.test_idx
        )
        assert acc >= 0.99


class TestGenerateCase2:
    def test_contiguous_blocks(self, case2_dataset):
        assert np.array_equal(case2_dataset.labels, np.repeat([0, 1, 2], 300))

    def test_intra_block_edges_within_bounds(self, case2_dataset):
        edges = case2_dataset.graph.edge_list()
        block = case2_dataset.labels
        intra = np.sum(block[edges[:, 0]] == block[edges[:, 1]])
        lo, hi = binomial_bounds(3 * (300 * 299 // 2), 0.03)
        assert lo <= intra <= hi

    def test_inter_block_edges_within_bounds(self, case2_dataset):
        edges = case2_dataset.graph.edge_list()
        block = case2_dataset.labels
        inter = np.sum(block[edges[:, 0]] != block[edges[:, 1]])
        lo, hi = binomial_bounds(3 * 300 * 300, 0.0015)
        assert lo <= inter <= hi

    def test_deterministic(self):
        a = generate_case2(3)
        b = generate_case2(3)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.graph.col_idx, b.graph.col_idx)

    def test_features_uninformative(self, case2_dataset):
        acc = nearest_centroid_accuracy(
            case2_dataset.features, case2_dataset.labels, case2_dataset.train_idx, case2_dataset.test_idx
        )
        assert acc <= 0.45


class TestSyntheticSpec:
    def test_rejects_bad_probability(self):
        with pytest.raises(ValueError):
            SyntheticSpec(CASE_GAUSSIAN, p_uniform=1.5)

    def test_rejects_indivisible_classes(self):
        with pytest.raises(ValueError):
            SyntheticSpec(CASE_GAUSSIAN, n=901)

    def test_rejects_unknown_case(self):
        with pytest.raises(ValueError):
            SyntheticSpec("case3")


class TestSaveLoadRoundTrip:
    def test_round_trip(self, tmp_path):
        dataset = generate_case1(1)
        save_dataset(dataset, tmp_path)
        loaded = load_dataset(tmp_path)
        assert loaded.n == dataset.n
        assert np.allclose(loaded.features, dataset.features)
        assert np.array_equal(loaded.labels, dataset.labels)
        assert np.array_equal(loaded.train_idx, dataset.train_idx)
        assert np.array_equal(loaded.test_idx, dataset.test_idx)
        assert np.array_equal(loaded.graph.col_idx, dataset.graph.col_idx)
        assert np.array_equal(loaded.graph.row_ptr, dataset.graph.row_ptr)

    def test_save_is_byte_stable(self, tmp_path):
        dataset = generate_case2(5)
        save_dataset(dataset, tmp_path / "a")
        save_dataset(dataset, tmp_path / "b")
        for name in ("edges.tsv", "features.csv", "labels.tsv", "split.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def write_toy_dataset(root: Path, **overrides):
    """A 4-node dataset with every file well-formed unless overridden."""
    files = {
        "features.csv": "1.0,0.0\n0.0,1.0\n1.0,1.0\n0.5,0.5\n",
        "labels.tsv": "0\t0\n1\t1\n2\t0\n3\t1\n",
        "edges.tsv": "0\t1\n1\t2\n2\t3\n",
        "split.json": '{"train": [0, 1], "test": [2, 3]}\n',
    }
    files.update(overrides)
    root.mkdir(parents=True, exist_ok=True)
    for name, content in files.items():
        if content is None:
            continue
        (root / name).write_text(content)


class TestLoaderValidation:
    def test_well_formed(self, tmp_path):
        write_toy_dataset(tmp_path)
        ds = load_dataset(tmp_path)
        assert ds.n == 4
        assert ds.graph.num_edges == 3

    def test_missing_file(self, tmp_path):
        write_toy_dataset(tmp_path, **{"labels.tsv": None})
        with pytest.raises(DatasetFormatError) as err:
            load_dataset(tmp_path)
        assert err.value.code == "missing-file"

    def test_ragged_features(self, tmp_path):
        write_toy_dataset(tmp_path, **{"features.csv": "1.0,0.0\n0.0\n1.0,1.0\n0.5,0.5\n"})
        with pytest.raises(DatasetFormatError) as err:
            load_dataset(tmp_path)
        assert err.value.code == "ragged-features"

    def test_non_numeric_features(self, tmp_path):
        write_toy_dataset(tmp_path, **{"features.csv": "1.0,x\n0.0,1.0\n1.0,1.0\n0.5,0.5\n"})
        with pytest.raises(DatasetFormatError) as err:
            load_dataset(tmp_path)
        assert err.value.code == "parse-error"

    def test_label_gap(self, tmp_path):
        write_toy_dataset(tmp_path, **{"labels.tsv": "0\t0\n1\t2\n2\t0\n3\t2\n"})
        with pytest.raises(DatasetFormatError) as err:
            load_dataset(tmp_path)
        assert err.value.code == "label-gap"

    def test_label_missing(self, tmp_path):
        write_toy_dataset(tmp_path, **{"labels.tsv": "0\t0\n1\t1\n2\t0\n"})
        with pytest.raises(DatasetFormatError) as err:
            load_dataset(tmp_path)
        assert err.value.code == "label-missing"

    def test_duplicate_label(self, tmp_path):
        write_toy_dataset(tmp_path, **{"labels.tsv": "0\t0\n1\t1\n2\t0\n2\t1\n"})
        with pytest.raises(DatasetFormatError) as err:
            load_dataset(tmp_path)
        assert err.value.code == "duplicate-label"

    def test_edge_out_of_range(self, tmp_path):
        write_toy_dataset(tmp_path, **{"edges.tsv": "0\t1\n1\t9\n"})
        with pytest.raises(DatasetFormatError) as err:
            load_dataset(tmp_path)
        assert err.value.code == "index-out-of-range"

    def test_split_out_of_range(self, tmp_path):
        write_toy_dataset(tmp_path, **{"split.json": '{"train": [0, 99], "test": [2]}\n'})
        with pytest.raises(DatasetFormatError) as err:
            load_dataset(tmp_path)
        assert err.value.code == "index-out-of-range"

    def test_split_overlap(self, tmp_path):
        write_toy_dataset(tmp_path, **{"split.json": '{"train": [0, 2], "test": [2, 3]}\n'})
        with pytest.raises(DatasetFormatError) as err:
            load_dataset(tmp_path)
        assert err.value.code == "split-overlap"

    def test_bad_split_json(self, tmp_path):
        write_toy_dataset(tmp_path, **{"split.json": "{not json"})
        with pytest.raises(DatasetFormatError) as err:
            load_dataset(tmp_path)
        assert err.value.code == "parse-error"

    def test_self_loop_dropped_with_warning(self, tmp_path):
        write_toy_dataset(tmp_path, **{"edges.tsv": "0\t1\n2\t2\n1\t2\n"})
        with pytest.warns(DatasetWarning, match="1 self-loop"):
            ds = load_dataset(tmp_path)
        assert ds.graph.num_edges == 2

    def test_duplicate_edges_merged(self, tmp_path):
        write_toy_dataset(tmp_path, **{"edges.tsv": "0\t1\n1\t0\n0\t1\n"})
        ds = load_dataset(tmp_path)
        assert ds.graph.num_edges == 1

    def test_missing_split_gives_empty_split(self, tmp_path):
        write_toy_dataset(tmp_path, **{"split.json": None})
        ds = load_dataset(tmp_path)
        assert ds.train_idx.size == 0 and ds.test_idx.size == 0

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DatasetFormatError) as err:
            load_dataset(tmp_path / "nope")
        assert err.value.code == "missing-file"


class TestMakeSplit:
    def test_counts_and_disjointness(self):
        dataset = generate_case1(2)
        train, test = make_split(dataset, labels_per_class=20, test_size=500, seed=0)
        assert train.size == 60
        assert test.size == 500
        assert np.intersect1d(train, test).size == 0
        for c in range(3):
            assert np.sum(dataset.labels[train] == c) == 20

    def test_deterministic(self):
        dataset = generate_case1(2)
        s1 = make_split(dataset, 10, test_size=100, seed=5)
        s2 = make_split(dataset, 10, test_size=100, seed=5)
        assert np.array_equal(s1[0], s2[0]) and np.array_equal(s1[1], s2[1])

    def test_class_too_small(self):
        dataset = generate_case1(2)
        with pytest.raises(ValueError):
            make_split(dataset, labels_per_class=400)

    def test_with_split_attaches(self):
        dataset = generate_case1(2)
        train, test = make_split(dataset, 5, test_size=50, seed=1)
        replaced = with_split(dataset, train, test)
        assert np.array_equal(replaced.train_idx, train)
        assert replaced.graph is dataset.graph
