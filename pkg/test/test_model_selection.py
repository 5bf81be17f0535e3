import numpy as np
import pytest

from sfcorr.errors import ConfigError, DataError, DimensionError
from sfcorr.model_selection import (
    cv_grid_search,
    default_grid,
    evaluate_test,
    fit_fold,
    kfold_partition,
    load_grid_file,
    train_test_split,
)
from sfcorr.models import FeatureMatrix
from sfcorr.schemas import SccaParams
from sfcorr.scca import canonical_correlation, project
from sfcorr.synthgen import gen_null, gen_sparse_canonical_pair, planted_vector, support_f1


@pytest.mark.parametrize("n, n_train, n_test", [(12, 10, 2), (793, 661, 132), (100, 84, 16)])
def test_split_sizes(n, n_train, n_test):
    train, test = train_test_split(n, seed=3)
    assert (train.size, test.size) == (n_train, n_test)
    assert np.intersect1d(train, test).size == 0
    assert np.array_equal(np.sort(np.concatenate([train, test])), np.arange(n))


def test_split_is_deterministic():
    a, _ = train_test_split(50, seed=1)
    b, _ = train_test_split(50, seed=1)
    c, _ = train_test_split(50, seed=2)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_split_needs_twelve_subjects():
    with pytest.raises(DimensionError):
        train_test_split(11)


def test_kfold_sizes_and_cover():
    folds = kfold_partition(np.arange(100, 111), k=5, seed=0)
    assert [f.size for f in folds] == [3, 2, 2, 2, 2]
    assert sorted(np.concatenate(folds).tolist()) == list(range(100, 111))


def test_kfold_rejects_bad_k():
    with pytest.raises(ConfigError):
        kfold_partition(np.arange(10), k=1)
    with pytest.raises(ConfigError):
        kfold_partition(np.arange(4), k=5)


def test_default_grid_spans_sqrt_dimension():
    grid = default_grid(16, 25, size=3)
    assert len(grid) == 9
    assert (grid[0].c1, grid[0].c2) == (1.0, 1.0)
    assert grid[-1].c1 == pytest.approx(4.0)
    assert grid[-1].c2 == pytest.approx(5.0)


def test_grid_file(tmp_path):
    path = tmp_path / "grid.csv"
    path.write_text("c1,c2\n1,1\n2.5,3\n", encoding="utf-8")
    grid = load_grid_file(str(path), tol=1e-5)
    assert [(g.c1, g.c2) for g in grid] == [(1.0, 1.0), (2.5, 3.0)]
    assert grid[0].tol == 1e-5
    bad = tmp_path / "bad.csv"
    bad.write_text("c1\n1\n", encoding="utf-8")
    with pytest.raises(DataError):
        load_grid_file(str(bad))
    with pytest.raises(ConfigError):
        load_grid_file(str(tmp_path / "missing.csv"))


def test_validation_rows_never_reach_the_fit():
    data = gen_null(40, 8, 6, seed=5)
    rows = np.arange(40)
    validation = rows[30:]
    params = SccaParams(c1=2.0, c2=2.0)
    pair, _ = fit_fold(data.x, data.y, rows[:30], validation, params)
    corrupted = data.x.data.copy()
    corrupted[validation] = 1e6 * np.random.default_rng(0).standard_normal((10, 8))
    noisy_x = FeatureMatrix(data=corrupted, subject_ids=data.x.subject_ids)
    other, _ = fit_fold(noisy_x, data.y, rows[:30], validation, params)
    assert other.u.tobytes() == pair.u.tobytes()
    assert other.v.tobytes() == pair.v.tobytes()


def test_single_cell_grid_is_selected():
    data = gen_null(30, 5, 5, seed=2)
    report = cv_grid_search(data.x, data.y, [SccaParams(c1=1.5, c2=1.5)], k=3, seed=0)
    assert report.selected == (1.5, 1.5)
    assert len(report.fold_correlations) == 1 and len(report.fold_correlations[0]) == 3
    assert report.fit is not None
    assert -1.0 <= report.train_correlation <= 1.0


def test_null_data_has_no_validation_signal():
    data = gen_null(120, 10, 10, seed=8)
    report = cv_grid_search(data.x, data.y, default_grid(10, 10, size=2), k=5, seed=1)
    means = [m for m in report.mean_validation if m is not None]
    assert abs(np.mean(means)) < 0.25


def test_planted_pair_generalizes():
    data, _ = gen_sparse_canonical_pair(150, 30, 30, s_u=5, s_v=5, rho=0.9, seed=11)
    train, test = train_test_split(data.n, seed=0)
    report = cv_grid_search(
        data.x.take_rows(train), data.y.take_rows(train), default_grid(30, 30, size=2), k=3, seed=0, n_jobs=2
    )
    assert report.train_correlation > 0.7
    assert evaluate_test(report.fit, data.x.take_rows(test), data.y.take_rows(test)) > 0.5


def test_empty_grid_rejected():
    data = gen_null(20, 3, 3, seed=0)
    with pytest.raises(ConfigError):
        cv_grid_search(data.x, data.y, [], k=3)


@pytest.mark.parametrize("body", ["c1,c2\n1,abc\n", "c1,c2\n1,\n", "c1,c2\n1,inf\n", "c1,c2\n"])
def test_unusable_grid_rows_are_config_errors(tmp_path, body):
    path = tmp_path / "grid.csv"
    path.write_text(body, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_grid_file(str(path))


def test_grid_error_names_the_row(tmp_path):
    path = tmp_path / "grid.csv"
    path.write_text("c1,c2\n1,1\n2,abc\n", encoding="utf-8")
    with pytest.raises(ConfigError) as exc:
        load_grid_file(str(path))
    assert "row 2" in exc.value.detail


def test_sparse_support_is_recovered_in_high_dimension():
    data, truth = gen_sparse_canonical_pair(150, 500, 500, s_u=10, s_v=10, rho=0.9, seed=0)
    train, test = train_test_split(data.n, seed=0)
    grid = [SccaParams(c1=c, c2=c) for c in (1.5, 2.0, 3.0)]
    report = cv_grid_search(data.x.take_rows(train), data.y.take_rows(train), grid, k=3, seed=0)
    fit = report.fit
    u_support = fit.x_scaler.columns[fit.support_u].tolist()
    v_support = fit.y_scaler.columns[fit.support_v].tolist()
    assert support_f1(u_support, truth.u_star_support) >= 0.8
    assert support_f1(v_support, truth.v_star_support) >= 0.8

    x_test, y_test = data.x.take_rows(test), data.y.take_rows(test)
    oracle = canonical_correlation(
        project(x_test.data, planted_vector(truth, "u", 500)), project(y_test.data, planted_vector(truth, "v", 500))
    )
    assert abs(evaluate_test(fit, x_test, y_test) - oracle) <= 0.1
