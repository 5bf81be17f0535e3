import numpy as np
import pytest

from sfcorr.distances import d_y
from sfcorr.errors import ConfigError, DegenerateError, DimensionError
from sfcorr.models import FeatureMatrix
from sfcorr.schemas import SccaParams
from sfcorr.scca import (
    ConstraintSet,
    EllipsoidProjector,
    alignment_scores,
    canonical_correlation,
    export_alignment,
    fit_alignment,
    fit_cca,
    fit_scca,
    import_alignment,
    project,
    project_l1,
    project_l2,
)
from sfcorr.synthgen import gen_sparse_canonical_pair


def _whitened(data):
    q, _ = np.linalg.qr(data - data.mean(axis=0))
    return np.sqrt(data.shape[0]) * q


@pytest.fixture(scope="module")
def correlated_whitened():
    rng = np.random.default_rng(17)
    x = rng.standard_normal((200, 5))
    y = rng.standard_normal((200, 5))
    y[:, 0] = x[:, 0] + 0.3 * rng.standard_normal(200)
    return _whitened(x), _whitened(y)


@pytest.fixture(scope="module")
def planted():
    data, truth = gen_sparse_canonical_pair(100, 20, 20, s_u=1, s_v=1, rho=0.9, seed=4)
    return data, truth


def test_project_l1_example():
    np.testing.assert_allclose(project_l1(np.array([3.0, 1.0]), 2.0), [2.0, 0.0], atol=1e-15)
    inside = np.array([0.2, -0.3])
    assert project_l1(inside, 1.0) is inside


def test_project_l1_lands_on_ball():
    rng = np.random.default_rng(0)
    for _ in range(20):
        z = rng.standard_normal(30) * 3.0
        w = project_l1(z, 2.5)
        assert np.abs(w).sum() == pytest.approx(2.5, abs=1e-10)
        assert np.all(w * z >= 0.0)


def test_project_l2():
    np.testing.assert_allclose(project_l2(np.array([3.0, 4.0]), 1.0), [0.6, 0.8], atol=1e-15)


def test_ellipsoid_projection_is_nearest_boundary_point():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((30, 6)) / np.sqrt(30)
    projector = EllipsoidProjector(a)
    for _ in range(10):
        z = rng.standard_normal(6) * 5.0
        w = projector(z)
        assert projector.norm(w) == pytest.approx(1.0, abs=1e-8)
        # radial shrink is feasible but never closer
        radial = z / projector.norm(z)
        assert np.linalg.norm(z - w) <= np.linalg.norm(z - radial) + 1e-10
    small = np.zeros(6)
    assert projector(small) is small


def test_constraint_set_projection_is_feasible():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((40, 12)) / np.sqrt(40)
    constraints = ConstraintSet(a, c=1.5, d=1.0)
    for _ in range(10):
        w = constraints.project(rng.standard_normal(12) * 4.0)
        assert constraints.ellipsoid.norm(w) <= 1.0 + 1e-8
        assert np.abs(w).sum() <= 1.5 + 1e-8
        assert np.linalg.norm(w) <= 1.0 + 1e-8


def test_cca_of_identical_modalities():
    x = np.random.default_rng(3).standard_normal((50, 3))
    assert fit_cca(x, x).objective == pytest.approx(1.0, abs=1e-8)


def test_cca_of_orthogonal_modalities():
    q, _ = np.linalg.qr(np.random.default_rng(4).standard_normal((20, 6)))
    assert abs(fit_cca(q[:, :3], q[:, 3:]).objective) <= 1e-8


def test_cca_of_zero_modality():
    with pytest.raises(DegenerateError):
        fit_cca(np.zeros((10, 3)), np.random.default_rng(5).standard_normal((10, 2)))


def test_cca_matches_principal_angle(correlated_whitened):
    x, y = correlated_whitened
    pair = fit_cca(x, y)
    qx, _ = np.linalg.qr(x)
    qy, _ = np.linalg.qr(y)
    top = np.linalg.svd(qx.T @ qy, compute_uv=False)[0]
    assert pair.objective == pytest.approx(top, abs=1e-10)
    sx, sy = project(x, pair.u), project(y, pair.v)
    assert canonical_correlation(sx, sy) == pytest.approx(top, abs=1e-8)
    assert pair.u[np.argmax(np.abs(pair.u))] > 0


def test_scca_satisfies_constraints(planted):
    data, _ = planted
    x = data.x.data - data.x.data.mean(axis=0)
    y = data.y.data - data.y.data.mean(axis=0)
    params = SccaParams(c1=2.0, c2=1.5)
    pair = fit_scca(x, y, params)
    n = x.shape[0]
    assert np.linalg.norm(x @ pair.u) / np.sqrt(n) <= 1.0 + 1e-8
    assert np.linalg.norm(y @ pair.v) / np.sqrt(n) <= 1.0 + 1e-8
    assert np.abs(pair.u).sum() <= 2.0 + 1e-8
    assert np.abs(pair.v).sum() <= 1.5 + 1e-8
    assert np.linalg.norm(pair.u) <= 1.0 + 1e-8
    assert pair.objective == pair.objective_trace[-1]


def test_scca_trace_never_decreases(planted):
    data, _ = planted
    pair = fit_alignment(data.x, data.y, SccaParams(c1=3.0, c2=3.0, tol=1e-10, max_iters=50))
    trace = np.asarray(pair.objective_trace)
    assert np.all(np.diff(trace) >= -1e-10)


def test_scca_reaches_cca_when_unconstrained(correlated_whitened):
    x, y = correlated_whitened
    params = SccaParams(c1=10.0, c2=10.0, tol=1e-9, max_iters=200)
    sparse = fit_scca(x, y, params)
    assert abs(fit_cca(x, y).objective - sparse.objective) <= 1e-4


def test_unit_l1_bound_recovers_planted_feature(planted):
    data, truth = planted
    pair = fit_alignment(data.x, data.y, SccaParams(c1=1.0, c2=1.0))
    assert pair.support_u == truth.u_star_support
    assert pair.support_v == truth.v_star_support
    xt = pair.x_scaler.transform(data.x.data)
    yt = pair.y_scaler.transform(data.y.data)
    gradient = xt.T @ (yt @ pair.v)
    assert int(np.argmax(np.abs(pair.u))) == int(np.argmax(np.abs(gradient)))



def test_l1_vertex_picks_the_largest_gradient_entry():
    a = np.eye(3) / 2.0
    constraints = ConstraintSet(a, c=1.0, d=1.0)
    assert constraints.l1_inscribed
    np.testing.assert_array_equal(constraints.l1_vertex(np.array([0.5, -2.0, 1.0])), [0.0, -1.0, 0.0])
    assert not ConstraintSet(a, c=1.5, d=1.0).l1_inscribed
    assert not ConstraintSet(np.eye(3) * 2.0, c=1.0, d=1.0).l1_inscribed


def test_unit_l1_bounds_select_exactly_one_feature():
    for seed in range(5):
        data, _ = gen_sparse_canonical_pair(60, 15, 12, s_u=2, s_v=2, rho=0.8, seed=seed)
        pair = fit_alignment(data.x, data.y, SccaParams(c1=1.0, c2=1.0))
        assert np.count_nonzero(pair.u) == 1
        assert np.count_nonzero(pair.v) == 1
        assert np.abs(pair.u).sum() == pytest.approx(1.0, abs=1e-15)
        assert len(pair.support_u) == len(pair.support_v) == 1


def test_scca_is_deterministic(planted):
    data, _ = planted
    params = SccaParams(c1=2.0, c2=2.0)
    first = fit_alignment(data.x, data.y, params)
    second = fit_alignment(data.x, data.y, params)
    assert first.u.tobytes() == second.u.tobytes()
    assert first.v.tobytes() == second.v.tobytes()
    random_a = fit_alignment(data.x, data.y, params, init="random", seed=9)
    random_b = fit_alignment(data.x, data.y, params, init="random", seed=9)
    assert random_a.u.tobytes() == random_b.u.tobytes()


def test_alignment_ignores_column_scale(planted):
    data, _ = planted
    params = SccaParams(c1=2.0, c2=2.0)
    base = fit_alignment(data.x, data.y, params)
    weights = np.linspace(0.5, 20.0, data.x.d)
    rescaled = FeatureMatrix(data=data.x.data * weights + 3.0, subject_ids=data.x.subject_ids)
    moved = fit_alignment(rescaled, data.y, params)
    np.testing.assert_allclose(moved.u, base.u, atol=1e-6)
    np.testing.assert_allclose(moved.v, base.v, atol=1e-6)


def test_project_example():
    np.testing.assert_allclose(project(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]), [1.0, 0.0]), [1.0, 0.0, 1.0])
    with pytest.raises(DimensionError):
        project(np.ones((3, 2)), [1.0, 2.0, 3.0])


def test_canonical_correlation_examples():
    assert canonical_correlation([1.0, 2.0, 3.0], [2.0, 4.0, 6.0]) == pytest.approx(1.0, abs=1e-15)
    assert canonical_correlation([1.0, 2.0, 3.0], [3.0, 2.0, 1.0]) == pytest.approx(-1.0, abs=1e-15)
    rng = np.random.default_rng(6)
    a, b = rng.standard_normal((2, 25))
    assert canonical_correlation(a, b) == pytest.approx(1.0 - d_y(a, b), abs=1e-12)


def test_canonical_correlation_rejects_bad_scores():
    with pytest.raises(DimensionError):
        canonical_correlation([1.0, 2.0], [2.0, 1.0])
    with pytest.raises(DegenerateError):
        canonical_correlation([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


def test_export_round_trip_keeps_scores(planted):
    data, _ = planted
    pair = fit_alignment(data.x, data.y, SccaParams(c1=2.0, c2=2.0))
    restored = import_alignment(export_alignment(pair))
    np.testing.assert_array_equal(restored.u, pair.u)
    np.testing.assert_array_equal(restored.v, pair.v)
    sx, sy = alignment_scores(pair, data.x.data, data.y.data)
    rx, ry = alignment_scores(restored, data.x.data, data.y.data)
    np.testing.assert_array_equal(rx, sx)
    np.testing.assert_array_equal(ry, sy)


def test_params_validation():
    with pytest.raises(ConfigError):
        SccaParams(c1=0.0, c2=1.0)
