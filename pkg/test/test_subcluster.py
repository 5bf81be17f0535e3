import itertools

import numpy as np
import pytest

from sfcorr.errors import DimensionError
from sfcorr.models import DistanceMatrix, FeatureClustering, FeatureMatrix
from sfcorr.subcluster import complete_linkage, feature_distance_matrix, subcluster_cca


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(31)


def _clustering(labels, k):
    return FeatureClustering(
        feature_indices=list(range(len(labels))), labels=labels, k=k, metric_tag="pearson_correlation_distance"
    )


def test_duplicate_and_rescaled_columns_are_close(rng):
    col = rng.standard_normal(40)
    data = np.column_stack([col, col, 3.0 * col + 1.0, rng.standard_normal(40)])
    d = feature_distance_matrix(data, "pearson_correlation_distance")
    assert d.data[0, 1] == 0.0
    assert d.data[0, 2] == pytest.approx(0.0, abs=1e-12)
    assert d.data[0, 3] > 0.1
    assert d.subject_ids == ["f0", "f1", "f2", "f3"]


def test_feature_distances_use_column_index(rng):
    m = FeatureMatrix(data=rng.standard_normal((10, 3)), subject_ids=[f"s{i}" for i in range(10)], column_index=[4, 7, 9])
    assert feature_distance_matrix(m, "scaled_euclidean").subject_ids == ["f4", "f7", "f9"]


def test_linkage_extreme_cuts(rng):
    data = rng.standard_normal((30, 6))
    d = feature_distance_matrix(data, "scaled_euclidean")
    singletons = complete_linkage(d, k=6)
    assert singletons.labels == [1, 2, 3, 4, 5, 6]
    whole = complete_linkage(d, k=1)
    assert whole.labels == [1] * 6
    assert len(whole.merges) == 5
    assert whole.merges[-1][3] == 6
    with pytest.raises(DimensionError):
        complete_linkage(d, k=7)


def test_linkage_separates_blobs(rng):
    base_a, base_b = rng.standard_normal((2, 50))
    columns = [base_a + 0.1 * rng.standard_normal(50) for _ in range(4)]
    columns += [base_b + 0.1 * rng.standard_normal(50) for _ in range(3)]
    order = [0, 4, 1, 5, 2, 6, 3]
    data = np.column_stack([columns[i] for i in order])
    clustering = complete_linkage(feature_distance_matrix(data, "pearson_correlation_distance"), k=2)
    assert clustering.labels == [1, 2, 1, 2, 1, 2, 1]
    assert clustering.members(2) == [1, 3, 5]


def _naive_heights(points):
    clusters = [{i} for i in range(len(points))]
    heights = []
    while len(clusters) > 1:
        best = None
        for i, j in itertools.combinations(range(len(clusters)), 2):
            h = max(np.linalg.norm(points[a] - points[b]) for a in clusters[i] for b in clusters[j])
            if best is None or h < best[0]:
                best = (h, i, j)
        h, i, j = best
        clusters[i] = clusters[i] | clusters[j]
        del clusters[j]
        heights.append(h)
    return heights


def test_linkage_matches_naive_merging(rng):
    points = rng.standard_normal((9, 4))
    d = DistanceMatrix(
        data=np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2),
        metric_tag="euclidean",
        subject_ids=[f"f{i}" for i in range(9)],
    )
    clustering = complete_linkage(d, k=1)
    np.testing.assert_allclose([m[2] for m in clustering.merges], _naive_heights(points), atol=1e-12)


def test_identical_cluster_ranks_first(rng):
    shared = rng.standard_normal((60, 2))
    x = np.column_stack([shared, rng.standard_normal((60, 3))])
    y = np.column_stack([rng.standard_normal((60, 2)), shared])
    ranking = subcluster_cca(x, y, _clustering([1, 1, 2, 2, 2], 2), _clustering([1, 1, 2, 2], 2))
    first = ranking.pairs[0]
    assert (first.x_cluster, first.y_cluster) == (1, 2)
    assert first.canonical_correlation == pytest.approx(1.0, abs=1e-10)
    assert (first.x_size, first.y_size) == (2, 2)


def test_block_correlation_dominates_single_columns(rng):
    x = rng.standard_normal((80, 4))
    y = 0.5 * x[:, :3] @ rng.standard_normal((3, 3)) + rng.standard_normal((80, 3))
    ranking = subcluster_cca(x, y, _clustering([1, 1, 1, 1], 1), _clustering([1, 1, 1], 1))
    best_single = max(abs(np.corrcoef(x[:, i], y[:, j])[0, 1]) for i in range(4) for j in range(3))
    assert ranking.pairs[0].canonical_correlation >= best_single - 1e-12


def test_all_pairs_ranked(rng):
    x = rng.standard_normal((50, 10))
    y = rng.standard_normal((50, 10))
    labels = [1, 2, 3, 4, 5, 1, 2, 3, 4, 5]
    ranking = subcluster_cca(x, y, _clustering(labels, 5), _clustering(labels, 5), top_k=3, n_jobs=2)
    assert len(ranking.pairs) == 25
    values = [p.canonical_correlation for p in ranking.pairs]
    assert values == sorted(values, reverse=True)
    assert len(ranking.top) == 3
    assert all(0.0 <= v <= 1.0 for v in values)


def test_constant_cluster_is_skipped(rng):
    x = np.column_stack([rng.standard_normal(20), np.full(20, 2.0)])
    y = rng.standard_normal((20, 2))
    ranking = subcluster_cca(x, y, _clustering([1, 2], 2), _clustering([1, 1], 1))
    assert [(p.x_cluster, p.y_cluster) for p in ranking.pairs] == [(1, 1)]
    assert len(ranking.notes) == 1


def test_mismatched_clustering_rejected(rng):
    with pytest.raises(DimensionError):
        subcluster_cca(rng.standard_normal((10, 3)), rng.standard_normal((10, 2)), _clustering([1, 1], 1), _clustering([1, 1], 1))


def _naive_linkage(dist, k):
    """Complete linkage over cluster member sets, first pair by name on ties."""
    f = dist.shape[0]
    clusters = {i: [i] for i in range(f)}
    merges, cut = [], None
    if k == f:
        cut = {i: i for i in range(f)}
    while len(clusters) > 1:
        best = None
        for a, b in itertools.combinations(sorted(clusters), 2):
            h = max(dist[i, j] for i in clusters[a] for j in clusters[b])
            if best is None or h < best[0]:
                best = (h, a, b)
        h, a, b = best
        clusters[a] = clusters[a] + clusters.pop(b)
        merges.append((a, b, h, len(clusters[a])))
        if len(clusters) == k:
            cut = {i: name for name, members in clusters.items() for i in members}
    names = sorted(set(cut.values()))
    return merges, [names.index(cut[i]) + 1 for i in range(f)]


def test_linkage_matches_naive_oracle_with_ties(rng):
    for _ in range(30):
        f = int(rng.integers(2, 13))
        upper = np.triu(rng.integers(1, 5, (f, f)).astype(float), k=1)
        d = DistanceMatrix(data=upper + upper.T, metric_tag="euclidean", subject_ids=[f"f{i}" for i in range(f)])
        for k in range(1, f + 1):
            clustering = complete_linkage(d, k=k)
            merges, labels = _naive_linkage(d.data, k)
            assert [tuple(m) for m in clustering.merges] == merges
            assert clustering.labels == labels
