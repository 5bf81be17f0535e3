import numpy as np
import pytest

from sfcorr.errors import DataError, DegenerateError, DimensionError
from sfcorr.matrixio import (
    iter_row_chunks,
    load_matrix,
    pair,
    read_subject_ids,
    save_matrix,
    scale_rows,
    scale_to_unit_variance,
    standardize_columns,
)
from sfcorr.models import FeatureMatrix


@pytest.fixture(scope="module")
def random_matrix():
    rng = np.random.default_rng(11)
    return FeatureMatrix(
        data=rng.standard_normal((50, 20)) * 1e3,
        subject_ids=[f"sub-{i:03d}" for i in range(50)],
        modality_tag="LCF",
    )


def test_load_small_csv(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("id,f1,f2\na,1,2\nb,3,4\nc,5,6.5\n", encoding="utf-8")
    m = load_matrix(str(path))
    assert m.n == 3 and m.d == 2
    assert m.subject_ids == ["a", "b", "c"]
    assert m.data[2, 1] == 6.5


def test_csv_with_nan_names_the_cell(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("id,f1,f2\na,1,2\nb,NaN,4\n", encoding="utf-8")
    with pytest.raises(DataError) as exc:
        load_matrix(str(path))
    assert "row 2" in exc.value.detail
    assert "f1" in exc.value.detail


def test_csv_requires_id_column(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("subject,f1\na,1\n", encoding="utf-8")
    with pytest.raises(DataError):
        load_matrix(str(path))


def test_csv_rejects_text_values(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("id,f1\na,1\nb,oops\n", encoding="utf-8")
    with pytest.raises(DataError):
        load_matrix(str(path))


def test_duplicate_ids_rejected(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("id,f1\na,1\na,2\n", encoding="utf-8")
    with pytest.raises(DataError) as exc:
        load_matrix(str(path))
    assert "a" in exc.value.detail


def test_binary_round_trip_is_bit_exact(tmp_path, random_matrix):
    path = str(tmp_path / "x.bin")
    save_matrix(random_matrix, path)
    loaded = load_matrix(path)
    assert loaded.data.tobytes() == random_matrix.data.tobytes()
    assert loaded.subject_ids == random_matrix.subject_ids
    assert read_subject_ids(path) == random_matrix.subject_ids


def test_binary_header_layout(tmp_path, random_matrix):
    path = tmp_path / "x.bin"
    save_matrix(random_matrix, str(path))
    raw = path.read_bytes()
    assert raw[:6] == b"HDPR1\x00"
    assert int.from_bytes(raw[6:14], "little") == 50
    assert int.from_bytes(raw[14:22], "little") == 20


def test_csv_round_trip_is_exact(tmp_path, random_matrix):
    path = str(tmp_path / "x.csv")
    save_matrix(random_matrix, path)
    loaded = load_matrix(path)
    np.testing.assert_array_equal(loaded.data, random_matrix.data)


def test_row_chunks_cover_the_matrix(tmp_path, random_matrix):
    path = str(tmp_path / "x.bin")
    save_matrix(random_matrix, path)
    chunks = list(iter_row_chunks(path, rows=7))
    assert [start for start, _ in chunks] == list(range(0, 50, 7))
    np.testing.assert_array_equal(np.vstack([block for _, block in chunks]), random_matrix.data)


def test_truncated_binary_rejected(tmp_path, random_matrix):
    path = tmp_path / "x.bin"
    save_matrix(random_matrix, str(path))
    path.write_bytes(path.read_bytes()[:100])
    with pytest.raises(DataError):
        load_matrix(str(path))


def test_pair_reorders_y():
    x = FeatureMatrix(data=[[1.0], [2.0], [3.0]], subject_ids=["a", "b", "c"])
    y = FeatureMatrix(data=[[30.0], [10.0], [20.0]], subject_ids=["c", "a", "b"])
    paired = pair(x, y)
    assert paired.y.subject_ids == ["a", "b", "c"]
    np.testing.assert_array_equal(paired.y.data[:, 0], [10.0, 20.0, 30.0])


def test_pair_reports_symmetric_difference():
    x = FeatureMatrix(data=[[1.0], [2.0]], subject_ids=["a", "b"])
    y = FeatureMatrix(data=[[1.0], [2.0]], subject_ids=["a", "z"])
    with pytest.raises(DimensionError) as exc:
        pair(x, y)
    assert "'b'" in exc.value.detail and "'z'" in exc.value.detail


def test_pair_keeps_aligned_input():
    x = FeatureMatrix(data=[[1.0], [2.0]], subject_ids=["a", "b"])
    y = FeatureMatrix(data=[[5.0], [6.0]], subject_ids=["a", "b"])
    assert pair(x, y).y is y


def test_scale_to_unit_variance():
    out = scale_to_unit_variance([0.0, 2.0, 4.0])
    np.testing.assert_allclose(out, np.array([0.0, 2.0, 4.0]) / np.sqrt(8.0 / 3.0), atol=1e-15)
    long = scale_to_unit_variance(np.random.default_rng(0).standard_normal(1000) * 7.0)
    assert abs(long.var() - 1.0) < 1e-12
    np.testing.assert_allclose(scale_to_unit_variance(np.arange(5.0) * 3.5), scale_to_unit_variance(np.arange(5.0)), atol=1e-12)


def test_scale_constant_vector_fails():
    with pytest.raises(DegenerateError):
        scale_to_unit_variance([5.0, 5.0, 5.0])


def test_scale_rows_names_subject():
    m = FeatureMatrix(data=[[1.0, 2.0, 3.0], [4.0, 4.0, 4.0]], subject_ids=["ok", "flat"])
    with pytest.raises(DegenerateError) as exc:
        scale_rows(m)
    assert "flat" in exc.value.detail


def test_standardize_columns(random_matrix):
    out = standardize_columns(random_matrix)
    assert np.all(np.abs(out.data.mean(axis=0)) < 1e-12)
    np.testing.assert_allclose(out.data.std(axis=0, ddof=1), 1.0, atol=1e-12)
    again = standardize_columns(out)
    np.testing.assert_allclose(again.data, out.data, atol=1e-10)


def test_standardize_simple_column():
    m = FeatureMatrix(data=[[1.0], [2.0], [3.0]], subject_ids=["a", "b", "c"])
    np.testing.assert_allclose(standardize_columns(m).data[:, 0], [-1.0, 0.0, 1.0], atol=1e-15)


def test_standardize_drops_constant_columns():
    data = np.column_stack([np.arange(6.0), np.full(6, 3.0), np.arange(6.0) ** 2])
    m = FeatureMatrix(data=data, subject_ids=list("abcdef"))
    out = standardize_columns(m)
    assert out.d == 2
    assert out.column_index.tolist() == [0, 2]
    assert out.dropped_columns == [1]


def test_standardize_all_constant_fails():
    m = FeatureMatrix(data=np.ones((4, 3)), subject_ids=list("abcd"))
    with pytest.raises(DegenerateError):
        standardize_columns(m)
