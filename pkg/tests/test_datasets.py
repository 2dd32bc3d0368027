#!/usr/bin/env python3
"""
Ingestion tests for datasets.py

IDX parsing, image preprocessing, the physics datasets and splitting.
"""

import gzip
import math
import struct

import numpy as np
import pytest

from qal.datasets import (
    DatasetError,
    DatasetKind,
    IdxFormatError,
    LabeledDataset,
    RawImages,
    Sample,
    area_weights,
    cluster_ising_sample,
    dataset_files,
    downsample,
    gen_aubry_andre_dataset,
    gen_cluster_ising_dataset,
    gen_synthetic,
    load_idx,
    load_image_dataset,
    preprocess,
    read_idx,
    split,
    write_idx,
)
from qal.quantum import PureState
from qal.runtime import parallel_map
from sample_data import make_images


class TestIdx:
    def test_plain_and_gzip(self, tmp_path):
        images = make_images([0, 1, 2])
        write_idx(tmp_path / "a-idx3-ubyte", images)
        write_idx(tmp_path / "b-idx3-ubyte.gz", images)
        for name in ("a-idx3-ubyte", "b-idx3-ubyte.gz"):
            magic, arr = read_idx(tmp_path / name)
            assert magic == 0x803
            assert np.array_equal(arr, images)
        with gzip.open(tmp_path / "b-idx3-ubyte.gz", "rb") as f:
            assert f.read(4) == b"\x00\x00\x08\x03"

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad"
        path.write_bytes(struct.pack(">II", 0x00000903, 1) + b"\x00")
        with pytest.raises(IdxFormatError, match="bad magic"):
            read_idx(path)
        path.write_bytes(struct.pack(">II", 0x01000801, 1) + b"\x00")
        with pytest.raises(IdxFormatError):
            read_idx(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "short"
        path.write_bytes(b"\x00\x00")
        with pytest.raises(IdxFormatError, match="truncated header"):
            read_idx(path)
        path.write_bytes(struct.pack(">II", 0x00000801, 10) + b"\x01\x02")
        with pytest.raises(IdxFormatError, match="truncated payload"):
            read_idx(path)

    def test_load_idx_checks(self, tmp_path):
        images = make_images([0, 1, 2])
        write_idx(tmp_path / "img", images)
        write_idx(tmp_path / "lbl", np.array([0, 1], dtype=np.uint8))
        with pytest.raises(IdxFormatError, match="count mismatch"):
            load_idx(tmp_path / "img", tmp_path / "lbl")
        with pytest.raises(IdxFormatError, match="expected image magic"):
            load_idx(tmp_path / "lbl", tmp_path / "lbl")

    def test_dataset_files(self, idx_root, tmp_path):
        images, labels = dataset_files("fashion-mnist", "train")
        assert images.name == "train-images-idx3-ubyte.gz"
        images, labels = dataset_files("mnist", "test")
        assert labels.name == "t10k-labels-idx1-ubyte"
        with pytest.raises(DatasetError):
            dataset_files("cifar")
        with pytest.raises(DatasetError):
            dataset_files("mnist", "valid")
        with pytest.raises(DatasetError, match="missing"):
            dataset_files("mnist", root=tmp_path / "nowhere")

    def test_data_root_unset(self, monkeypatch):
        monkeypatch.delenv("QAL_DATA_DIR", raising=False)
        with pytest.raises(DatasetError, match="QAL_DATA_DIR"):
            dataset_files("mnist")


class TestPreprocessing:
    def test_area_weights(self):
        w = area_weights(28, 10)
        assert w.shape == (10, 28)
        assert np.allclose(w.sum(axis=1), 1.0)
        assert np.allclose(w.sum(axis=0), 10 / 28)
        with pytest.raises(DatasetError):
            area_weights(10, 28)

    def test_downsample_preserves_mean(self):
        images = make_images([0, 3, 7]).astype(float)
        small = downsample(images, 10)
        assert small.shape == (3, 10, 10)
        assert np.allclose(small.mean(axis=(1, 2)), images.mean(axis=(1, 2)))
        flat = downsample(np.full((1, 28, 28), 255.0), 7)
        assert np.allclose(flat, 255.0)

    def test_preprocess(self):
        labels = np.array([1, 9, 3, 1, 9], dtype=np.uint8)
        raw = RawImages(make_images(labels), labels)
        data = preprocess(raw, side=10, classes=(1, 9))
        assert len(data) == 4
        assert data.data_dim == 100
        assert list(data.labels()) == [0, 1, 0, 1]
        assert [s.sample_id for s in data] == [0, 1, 3, 4]
        payload = np.concatenate([s.payload for s in data])
        assert payload.min() >= 0.0 and payload.max() <= math.pi + 1e-12
        assert data.classes == (1, 9)

    def test_preprocess_options(self):
        labels = np.array([1, 9, 1, 9], dtype=np.uint8)
        raw = RawImages(make_images(labels), labels)
        assert len(preprocess(raw, classes=(1, 9), limit=3)) == 3
        unit = preprocess(raw, classes=(1, 9), angle_range="unit")
        assert max(s.payload.max() for s in unit) <= 1.0
        with pytest.raises(DatasetError, match="unknown class"):
            preprocess(raw, classes=(1, 5))
        with pytest.raises(DatasetError):
            preprocess(raw, classes=(1,))
        with pytest.raises(DatasetError):
            preprocess(raw, classes=(1, 9), angle_range="degrees")

    def test_load_image_dataset(self, idx_root):
        train = load_image_dataset("fashion-mnist", "train")
        test = load_image_dataset("mnist", "test", side=7, classes=(0, 2, 4))
        assert len(train) == 12
        assert train.kind is DatasetKind.CLASSICAL
        assert test.k_classes == 3
        assert test.data_dim == 49
        assert np.array_equal(np.bincount(test.labels()), [6, 6, 6])


class TestLabeledDataset:
    def test_validation(self):
        with pytest.raises(DatasetError):
            LabeledDataset(DatasetKind.CLASSICAL, [Sample(np.zeros(2), 2)], k_classes=2)
        with pytest.raises(DatasetError, match="mixed dimensions"):
            LabeledDataset("classical", [Sample(np.zeros(2), 0), Sample(np.zeros(3), 1)])

    def test_balance_and_subset(self):
        data = gen_synthetic(9, 4, np.random.default_rng(0), k_classes=3)
        assert np.allclose(data.class_balance(), 1 / 3)
        sub = data.subset([0, 1])
        assert [s.sample_id for s in sub] == [0, 1]
        assert sub.k_classes == 3

    def test_data_dim_only_for_classical(self):
        data = LabeledDataset(DatasetKind.QUANTUM_STATE, [Sample(PureState.zero(1), 0)])
        with pytest.raises(DatasetError):
            data.data_dim


class TestSynthetic:
    def test_gen_synthetic(self):
        a = gen_synthetic(10, 5, np.random.default_rng(1))
        b = gen_synthetic(10, 5, np.random.default_rng(1))
        assert all(np.array_equal(x.payload, y.payload) for x, y in zip(a, b))
        payload = np.stack([s.payload for s in a])
        assert payload.min() >= 0.0 and payload.max() <= math.pi
        assert list(a.labels()) == [0, 1] * 5
        with pytest.raises(DatasetError):
            gen_synthetic(0, 5, np.random.default_rng(1))

    def test_split(self):
        data = gen_synthetic(20, 3, np.random.default_rng(0))
        train, test = split(data, 5, seed=4)
        assert len(train) == 15 and len(test) == 5
        train_ids = [s.sample_id for s in train]
        test_ids = [s.sample_id for s in test]
        assert not set(train_ids) & set(test_ids)
        assert train_ids == sorted(train_ids)
        assert train.split_seed == 4
        again, _ = split(data, 5, seed=4)
        assert [s.sample_id for s in again] == train_ids
        with pytest.raises(DatasetError):
            split(data, 21, seed=0)


class TestPhysicsDatasets:
    def test_aubry_andre(self):
        data = gen_aubry_andre_dataset(20, np.random.default_rng(0), n_qubits=4)
        assert data.kind is DatasetKind.HAMILTONIAN
        for s in data:
            assert s.label == int(s.meta["V"] / s.meta["g"] > 2)
            assert s.payload.n_qubits == 4

    def test_cluster_ising_sample(self):
        s = cluster_ising_sample(5, 0.0)
        assert s.label == 0
        assert s.payload.is_normalized
        assert s.meta["energy"] == pytest.approx(-5.0)
        assert cluster_ising_sample(5, 1.5).label == 1

    def test_cluster_ising_dataset_parallel(self):
        serial = gen_cluster_ising_dataset(6, np.random.default_rng(2), n_qubits=4)
        threaded = gen_cluster_ising_dataset(
            6, np.random.default_rng(2), n_qubits=4,
            mapper=lambda fn, items: parallel_map(fn, items, 3),
        )
        assert [s.meta["h"] for s in serial] == [s.meta["h"] for s in threaded]
        for a, b in zip(serial, threaded):
            assert a.label == b.label
            assert a.meta["energy"] == pytest.approx(b.meta["energy"])
