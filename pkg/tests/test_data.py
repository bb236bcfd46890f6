import numpy as np
import pytest

from fedentopt.errors import DimensionError, DomainError, FormatError
from fedentopt.fedcore import Dataset, gen_synthetic, load_cifar10_bin, load_cifar10_dir, stratified_split, write_dataset_csv
from fedentopt.fedcore.data import class_means


def cifar_record(label, fill):
    pixels = (np.arange(3072) * fill % 256).astype(np.uint8)
    return bytes([label]) + pixels.tobytes()


def test_cifar_two_records(tmp_path):
    path = tmp_path / "batch.bin"
    path.write_bytes(cifar_record(3, 1) + cifar_record(7, 3))
    ds = load_cifar10_bin(path)
    assert len(ds) == 2 and ds.dim == 3072
    np.testing.assert_array_equal(ds.labels, [3, 7])
    # channel-planar: byte 1 of the record is red pixel (0, 0); byte 1025 is green (0, 0)
    assert ds.features[1, 0] == pytest.approx(0 / 255)
    assert ds.features[1, 1024] == pytest.approx((1024 * 3 % 256) / 255)
    assert ds.features.min() >= 0 and ds.features.max() <= 1


def test_cifar_empty(tmp_path):
    path = tmp_path / "empty.bin"
    path.write_bytes(b"")
    assert len(load_cifar10_bin(path)) == 0


def test_cifar_truncated(tmp_path):
    path = tmp_path / "short.bin"
    path.write_bytes(bytes(3072))
    with pytest.raises(FormatError):
        load_cifar10_bin(path)


def test_cifar_bad_label(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(cifar_record(10, 1))
    with pytest.raises(FormatError, match="label"):
        load_cifar10_bin(path)


def test_cifar_directory(tmp_path):
    for i in (1, 2):
        (tmp_path / f"data_batch_{i}.bin").write_bytes(cifar_record(i, 1))
    (tmp_path / "test_batch.bin").write_bytes(cifar_record(9, 2))
    train, test = load_cifar10_dir(tmp_path)
    np.testing.assert_array_equal(train.labels, [1, 2])
    np.testing.assert_array_equal(test.labels, [9])


def test_dataset_invariants():
    with pytest.raises(DimensionError):
        Dataset(np.zeros((3, 2)), np.zeros(2, dtype=int), 2)
    with pytest.raises(DomainError):
        Dataset(np.zeros((1, 2)), np.array([2]), 2)


def test_means_pairwise_distance():
    m = class_means(10, 20, 4.0)
    d = np.linalg.norm(m[:, None] - m[None], axis=-1)
    np.testing.assert_allclose(d[~np.eye(10, dtype=bool)], 4.0)


def test_synthetic_deterministic():
    a = gen_synthetic(3, 5, 10, 2.0, seed=4)
    b = gen_synthetic(3, 5, 10, 2.0, seed=4)
    np.testing.assert_array_equal(a.features, b.features)
    assert not np.array_equal(a.features, gen_synthetic(3, 5, 10, 2.0, seed=5).features)


def test_zero_separation_identical_classes():
    ds = gen_synthetic(4, 3, 5000, 0.0, seed=0)
    means = np.stack([ds.features[ds.labels == c].mean(axis=0) for c in range(4)])
    assert np.abs(means).max() < 0.1


def test_stratified_split_sizes():
    ds = gen_synthetic(3, 2, 10, 1.0, seed=0)
    train, test = stratified_split(ds, 3, seed=1)
    np.testing.assert_array_equal(np.bincount(test.labels), [3, 3, 3])
    np.testing.assert_array_equal(np.bincount(train.labels), [7, 7, 7])


def test_csv_export(tmp_path):
    ds = gen_synthetic(2, 2, 2, 1.0, seed=0)
    path = tmp_path / "d.csv"
    write_dataset_csv(ds, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "label,f0,f1"
    assert len(lines) == 5
    assert float(lines[1].split(",")[1]) == ds.features[0, 0]
