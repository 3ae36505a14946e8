"""
Unit tests for the datasets module.
"""
import numpy as np
import pytest

from bdl_utils.analysis.datasets import (
    CSVSchema, DataError, Dataset, boundary_gap, destandardize, distance_to_moons, gen_two_moons, gen_xsinx,
    load_csv, moon_distances, save_csv, split, standardize, to_frame
)


def test_gen_xsinx_noiseless():
    ds = gen_xsinx(50, 0.0, seed=1)
    assert ds.X.shape == (50, 1) and ds.y.shape == (50, 1)
    assert np.all((ds.X >= -10.0) & (ds.X < 10.0))
    np.testing.assert_array_equal(ds.y, ds.X * np.sin(ds.X))


def test_gen_xsinx_noise_and_seed():
    a, b = gen_xsinx(2000, 0.5, seed=3), gen_xsinx(2000, 0.5, seed=3)
    np.testing.assert_array_equal(a.y, b.y)
    resid = a.y - a.X * np.sin(a.X)
    assert np.std(resid) == pytest.approx(0.5, rel=0.05)
    assert not np.array_equal(gen_xsinx(10, 0.5, seed=4).X, gen_xsinx(10, 0.5, seed=5).X)


@pytest.mark.parametrize('kwargs', [dict(n=0), dict(lo=1.0, hi=1.0), dict(sigma=-0.1)])
def test_gen_xsinx_errors(kwargs):
    with pytest.raises(DataError):
        gen_xsinx(**kwargs)


def test_gen_two_moons():
    ds = gen_two_moons(101, 0.0, seed=0)
    assert ds.task == 'classification' and ds.n_classes == 2
    assert np.bincount(ds.y).tolist() == [51, 50]
    np.testing.assert_allclose(distance_to_moons(ds.X), 0.0, atol=1e-12)
    upper = ds.X[ds.y == 0]
    np.testing.assert_allclose(np.hypot(upper[:, 0], upper[:, 1]), 1.0, rtol=1e-12)
    assert np.all(upper[:, 1] >= 0)


def test_two_moons_noise_moves_points_off_the_arcs():
    ds = gen_two_moons(500, 0.2, seed=1)
    assert np.mean(distance_to_moons(ds.X)) > 0.05
    with pytest.raises(DataError):
        gen_two_moons(1)


def test_distance_to_moons():
    points = np.array([[0.0, 2.0], [1.0, -0.5], [0.0, 0.5], [1.0, -1.5]])
    np.testing.assert_allclose(distance_to_moons(points), [1.0, 0.0, 0.0, 1.0], atol=1e-12)


def test_boundary_gap():
    # The two arcs are point-symmetric about (0.5, 0.25), which lies on the class separation.
    np.testing.assert_allclose(moon_distances([[0.5, 0.25]]), [[1.0 - np.sqrt(0.3125)] * 2], rtol=1e-12)
    assert boundary_gap([[0.5, 0.25]])[0] == 0.0
    p = np.random.default_rng(3).uniform(-3.0, 3.0, size=(50, 2))
    np.testing.assert_allclose(moon_distances([1.0, 0.5] - p), moon_distances(p)[:, ::-1], atol=1e-12)
    np.testing.assert_allclose(boundary_gap([[0.0, 1.0], [1.0, -0.5]]), [0.5, 0.5], atol=1e-12)


def test_dataset_validation():
    with pytest.raises(DataError, match='Unknown task'):
        Dataset([[1.0]], [1.0], task='ranking')
    with pytest.raises(DataError, match='integers'):
        Dataset([[1.0]], [0.5], task='classification')
    with pytest.raises(DataError, match='rows'):
        Dataset(np.ones((3, 2)), np.ones(2))
    with pytest.raises(DataError, match=r'\[0, 2\)'):
        Dataset(np.ones((2, 1)), [0, 2], task='classification', n_classes=2)
    ds = Dataset(np.arange(3.0), [1.0, 2.0, 3.0])
    assert ds.X.shape == (3, 1) and ds.n_outputs == 1 and len(ds) == 3


@pytest.mark.parametrize('n, fraction, n_train', [(10, 0.7, 7), (3, 0.5, 2), (2, 0.99, 1), (5, 0.01, 1)])
def test_split_sizes(n, fraction, n_train):
    train, valid = split(gen_xsinx(n, seed=0), fraction, seed=2)
    assert len(train) == n_train and len(valid) == n - n_train


def test_split_is_a_partition():
    ds = gen_xsinx(40, 0.1, seed=0)
    train, valid = split(ds, 0.75, seed=9)
    merged = np.sort(np.concatenate([train.X[:, 0], valid.X[:, 0]]))
    np.testing.assert_array_equal(merged, np.sort(ds.X[:, 0]))
    again, _ = split(ds, 0.75, seed=9)
    np.testing.assert_array_equal(again.X, train.X)
    with pytest.raises(DataError):
        split(ds, 1.0)
    with pytest.raises(DataError):
        split(gen_xsinx(1), 0.5)


def test_standardize():
    X = np.array([[1.0, 5.0], [3.0, 5.0], [5.0, 5.0]])
    ds, record = standardize(Dataset(X, np.zeros(3)))
    assert abs(ds.X[:, 0].mean()) <= 1e-15
    np.testing.assert_allclose(ds.X[:, 0].std(), 1.0)
    # Constant features pass through unscaled.
    np.testing.assert_array_equal(ds.X[:, 1], X[:, 1])
    assert record.constant.tolist() == [False, True]
    assert ds.standardization is record
    np.testing.assert_allclose(destandardize(record, ds.X), X, rtol=1e-12)


def test_standardize_with_training_record():
    train, record = standardize(Dataset([[0.0], [2.0]], [0.0, 0.0]))
    valid, same = standardize(Dataset([[4.0]], [1.0]), record)
    assert same is record
    np.testing.assert_array_equal(valid.X, [[3.0]])
    with pytest.raises(DataError, match='features'):
        standardize(Dataset(np.ones((2, 2)), np.zeros(2)), record)


def test_save_and_load_csv(tmp_path):
    path = tmp_path / 'xsinx.csv'
    ds = gen_xsinx(15, 0.3, seed=2)
    save_csv(ds, path)
    assert path.read_text().splitlines()[0] == 'x1,y1'
    loaded = load_csv(str(path), CSVSchema(1, 1))
    np.testing.assert_array_equal(loaded.X, ds.X)
    np.testing.assert_array_equal(loaded.y, ds.y)

    moons = gen_two_moons(20, 0.1, seed=2)
    save_csv(moons, tmp_path / 'moons.csv')
    loaded = load_csv(str(tmp_path / 'moons.csv'), CSVSchema(2, task='classification'))
    np.testing.assert_array_equal(loaded.y, moons.y)
    assert list(to_frame(moons).columns) == ['x1', 'x2', 'label']


def test_load_csv_without_header(tmp_path):
    path = tmp_path / 'plain.csv'
    path.write_text('1.0,2.0,3.0\n4.0,5.0,6.0\n\n')
    ds = load_csv(str(path), CSVSchema(1, 2))
    np.testing.assert_array_equal(ds.y, [[2.0, 3.0], [5.0, 6.0]])


@pytest.mark.parametrize('content, schema, match', [
    ('x1,y1\n1.0,2.0,3.0\n', CSVSchema(1), 'line 2: expected 2 columns'),
    ('x1,y1\n1.0,abc\n', CSVSchema(1), 'could not parse'),
    ('x1,y1\n1.0,2.0\n3.0,nan\n', CSVSchema(1), 'line 3: non-finite'),
    ('1.0,inf\n', CSVSchema(1), 'line 1: non-finite'),
    ('x1,y1\n', CSVSchema(1), 'no data rows'),
    ('x1,label\n0.5,1.5\n', CSVSchema(1, task='classification'), 'non-integer label'),
    ('x1,label\n0.5,-1\n', CSVSchema(1, task='classification'), 'non-negative'),
])
def test_load_csv_errors(tmp_path, content, schema, match):
    path = tmp_path / 'bad.csv'
    path.write_text(content)
    with pytest.raises(DataError, match=match):
        load_csv(str(path), schema)


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DataError, match='not found'):
        load_csv(str(tmp_path / 'missing.csv'), CSVSchema(1))
