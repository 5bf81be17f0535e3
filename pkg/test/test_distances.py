import numpy as np
import pytest

from sfcorr.distances import (
    d_x,
    d_y,
    distance_matrix,
    distance_matrix_streamed,
    load_distance_matrix,
    metric_function,
    save_distance_matrix,
    upper_triangle,
)
from sfcorr.errors import DataError, DegenerateError, DimensionError
from sfcorr.matrixio import save_matrix
from sfcorr.models import DistanceMatrix, FeatureMatrix


@pytest.fixture(scope="module")
def features():
    rng = np.random.default_rng(21)
    return FeatureMatrix(data=rng.standard_normal((20, 50)), subject_ids=[f"s{i:02d}" for i in range(20)])


def test_d_x_examples():
    assert d_x([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert d_x([1, 0, 0, 0], [0, 1, 0, 0]) == pytest.approx(np.sqrt(2) / 4, abs=1e-15)


def test_d_x_matches_loop():
    rng = np.random.default_rng(3)
    x, x2 = rng.standard_normal(1000), rng.standard_normal(1000)
    total = 0.0
    for a, b in zip(x, x2):
        total += (a - b) ** 2
    assert d_x(x, x2) == pytest.approx(np.sqrt(total) / 1000, abs=1e-12)


def test_d_x_length_mismatch():
    with pytest.raises(DimensionError):
        d_x([1.0, 2.0], [1.0])


def test_d_x_triangle_inequality():
    rng = np.random.default_rng(8)
    for _ in range(50):
        a, b, c = rng.standard_normal((3, 12))
        assert d_x(a, c) <= d_x(a, b) + d_x(b, c) + 1e-15


def test_d_y_examples():
    y = np.array([1.0, 3.0, 2.0, 7.0])
    assert d_y(y, y) == 0.0
    assert d_y(y, -y) == pytest.approx(2.0, abs=1e-12)
    assert d_y(y, 3.0 * y) == pytest.approx(0.0, abs=1e-12)


def test_d_y_properties():
    rng = np.random.default_rng(9)
    for _ in range(20):
        a, b = rng.standard_normal((2, 15))
        value = d_y(a, b)
        assert 0.0 <= value <= 2.0
        assert value == pytest.approx(d_y(b, a), abs=1e-15)


def test_d_y_zero_variance():
    with pytest.raises(DegenerateError):
        d_y([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])


def test_unknown_metric():
    with pytest.raises(DataError):
        metric_function("cosine")


@pytest.mark.parametrize("metric", ["scaled_euclidean", "pearson_correlation_distance", "euclidean"])
def test_matrix_matches_pairwise_calls(features, metric):
    d = distance_matrix(features, metric, n_jobs=1)
    fn = metric_function(metric)
    for i in range(features.n):
        for j in range(i + 1, features.n):
            assert d.data[i, j] == pytest.approx(fn(features.data[i], features.data[j]), abs=1e-12)
    np.testing.assert_array_equal(d.data, d.data.T)
    assert np.all(np.diag(d.data) == 0.0)


@pytest.mark.parametrize("metric", ["scaled_euclidean", "pearson_correlation_distance"])
def test_matrix_independent_of_threads(features, metric):
    single = distance_matrix(features, metric, n_jobs=1)
    several = distance_matrix(features, metric, n_jobs=4)
    assert single.data.tobytes() == several.data.tobytes()


def test_single_subject_matrix():
    m = FeatureMatrix(data=[[1.0, 2.0, 3.0]], subject_ids=["only"])
    d = distance_matrix(m, "scaled_euclidean")
    assert d.data.shape == (1, 1) and d.data[0, 0] == 0.0


def test_duplicate_rows_give_zero():
    row = [1.0, 4.0, 2.0, 8.0]
    m = FeatureMatrix(data=[row, [0.0, 1.0, 0.0, 1.0], row], subject_ids=["a", "b", "c"])
    for metric in ("scaled_euclidean", "pearson_correlation_distance"):
        assert distance_matrix(m, metric).data[0, 2] == 0.0


def test_relabeling_permutes_matrix(features):
    d = distance_matrix(features, "pearson_correlation_distance")
    perm = np.random.default_rng(4).permutation(features.n)
    permuted = distance_matrix(features.take_rows(perm), "pearson_correlation_distance")
    np.testing.assert_array_equal(permuted.data, d.data[np.ix_(perm, perm)])


def test_zero_variance_row_names_subject():
    m = FeatureMatrix(data=[[1.0, 2.0, 3.0], [5.0, 5.0, 5.0]], subject_ids=["a", "flat"])
    with pytest.raises(DegenerateError) as exc:
        distance_matrix(m, "pearson_correlation_distance")
    assert "flat" in exc.value.detail


@pytest.mark.parametrize("metric", ["scaled_euclidean", "pearson_correlation_distance"])
def test_streamed_matches_in_memory(tmp_path, features, metric):
    path = str(tmp_path / "x.bin")
    save_matrix(features, path)
    streamed = distance_matrix_streamed(path, metric, chunk_rows=6)
    assert streamed.data.tobytes() == distance_matrix(features, metric).data.tobytes()
    assert streamed.subject_ids == features.subject_ids


def test_distance_matrix_persistence(tmp_path, features):
    d = distance_matrix(features, "scaled_euclidean")
    path = str(tmp_path / "dx.bin")
    save_distance_matrix(d, path)
    loaded = load_distance_matrix(path)
    assert loaded.metric_tag == "scaled_euclidean"
    assert loaded.data.tobytes() == d.data.tobytes()
    assert upper_triangle(loaded).shape == (features.n * (features.n - 1) // 2,)


def test_distance_matrix_invariants():
    with pytest.raises(DataError):
        DistanceMatrix(data=[[0.0, 1.0], [2.0, 0.0]], metric_tag="euclidean", subject_ids=["a", "b"])
    with pytest.raises(DataError):
        DistanceMatrix(data=[[1.0, 1.0], [1.0, 0.0]], metric_tag="euclidean", subject_ids=["a", "b"])
    with pytest.raises(DataError):
        DistanceMatrix(data=[[0.0, 2.5], [2.5, 0.0]], metric_tag="pearson_correlation_distance", subject_ids=["a", "b"])
