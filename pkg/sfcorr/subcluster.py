"""Feature subclusters and their pairwise canonical correlations."""
from typing import List, Optional, Tuple

import numpy as np

from sfcorr.distances import distance_matrix
from sfcorr.errors import DimensionError
from sfcorr.logger import getLogger
from sfcorr.models import DistanceMatrix, FeatureClustering, FeatureMatrix
from sfcorr.schemas import MetricTag, SubclusterPair, SubclusterPairRanking
from sfcorr.workers import map_indexed

logger = getLogger(__name__)

# Relative singular value cutoff for the within-cluster bases
RANK_TOL = 1e-10


def feature_distance_matrix(m, metric: MetricTag, n_jobs: Optional[int] = None) -> DistanceMatrix:
    """Distances between feature columns, each column read across subjects."""
    if isinstance(m, FeatureMatrix):
        data, columns = m.data, m.column_index.tolist()
    else:
        data = np.asarray(m, dtype=np.float64)
        columns = list(range(data.shape[1]))
    if data.ndim != 2 or data.shape[1] < 2:
        raise DimensionError("feature clustering needs at least 2 selected features")
    features = FeatureMatrix(data=data.T, subject_ids=[f"f{j}" for j in columns])
    return distance_matrix(features, metric, n_jobs)


def complete_linkage(d: DistanceMatrix, k: int = 5, feature_indices: Optional[List[int]] = None) -> FeatureClustering:
    """Agglomerative clustering with the maximum pairwise distance between clusters.

    A cluster is named by its smallest member position. Each step merges the
    closest pair, the first one in row-major order on ties, and the merged
    cluster keeps the smaller name. The full dendrogram is recorded; labels
    come from the cut at k clusters.
    """
    f = d.n
    if not 1 <= k <= f:
        raise DimensionError(f"cannot form {k} clusters from {f} features")
    if feature_indices is None:
        feature_indices = list(range(f))
    elif len(feature_indices) != f:
        raise DimensionError("one feature index per distance-matrix row is required")

    dist = np.array(d.data, dtype=np.float64)
    active = np.ones(f, dtype=bool)
    owner = np.arange(f)
    sizes = np.ones(f, dtype=int)
    merges: List[Tuple[int, int, float, int]] = []
    labels_at_k = None
    if k == f:
        labels_at_k = owner.copy()
    upper = np.triu(np.ones((f, f), dtype=bool), k=1)

    for step in range(f - 1):
        candidates = np.where(upper & active[:, None] & active[None, :], dist, np.inf)
        flat = int(np.argmin(candidates))
        a, b = divmod(flat, f)
        height = float(candidates[a, b])
        dist[a, :] = np.maximum(dist[a, :], dist[b, :])
        dist[:, a] = dist[a, :]
        dist[a, a] = 0.0
        active[b] = False
        owner[owner == b] = a
        sizes[a] += sizes[b]
        merges.append((a, b, height, int(sizes[a])))
        if f - (step + 1) == k:
            labels_at_k = owner.copy()

    names = sorted(set(labels_at_k.tolist()))
    relabel = {name: i + 1 for i, name in enumerate(names)}
    return FeatureClustering(
        feature_indices=list(feature_indices),
        labels=[relabel[o] for o in labels_at_k.tolist()],
        k=k,
        metric_tag=d.metric_tag,
        merges=merges,
    )


def _basis(block: np.ndarray) -> np.ndarray:
    centered = block - block.mean(axis=0)
    u, s, _ = np.linalg.svd(centered, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return u[:, :0]
    return u[:, s > RANK_TOL * s[0]]


def _pair_correlation(bx: np.ndarray, by: np.ndarray) -> Optional[float]:
    if bx.shape[1] == 0 or by.shape[1] == 0:
        return None
    s = np.linalg.svd(bx.T @ by, compute_uv=False)
    return float(min(1.0, s[0]))


def subcluster_cca(
    x_sel,
    y_sel,
    cx: FeatureClustering,
    cy: FeatureClustering,
    top_k: int = 3,
    n_jobs: Optional[int] = None,
) -> SubclusterPairRanking:
    """Unregularized canonical correlation for every (x-cluster, y-cluster) pair.

    The leading canonical correlation of two column blocks is the cosine of
    the smallest principal angle between their centered column spaces.
    """
    xa = x_sel.data if isinstance(x_sel, FeatureMatrix) else np.asarray(x_sel, dtype=np.float64)
    ya = y_sel.data if isinstance(y_sel, FeatureMatrix) else np.asarray(y_sel, dtype=np.float64)
    if xa.shape[0] != ya.shape[0]:
        raise DimensionError(f"x has {xa.shape[0]} rows, y has {ya.shape[0]}")
    if xa.shape[1] != len(cx.labels) or ya.shape[1] != len(cy.labels):
        raise DimensionError("clusterings do not match the selected column counts")

    x_bases = {c: _basis(xa[:, cx.members(c)]) for c in range(1, cx.k + 1) if cx.members(c)}
    y_bases = {c: _basis(ya[:, cy.members(c)]) for c in range(1, cy.k + 1) if cy.members(c)}
    cells = [(a, b) for a in range(1, cx.k + 1) for b in range(1, cy.k + 1)]

    def evaluate(i: int) -> Optional[float]:
        a, b = cells[i]
        if a not in x_bases or b not in y_bases:
            return None
        return _pair_correlation(x_bases[a], y_bases[b])

    values = map_indexed(evaluate, len(cells), n_jobs)
    pairs, notes = [], []
    for (a, b), value in zip(cells, values):
        if value is None:
            notes.append(f"pair (x{a}, y{b}) skipped: empty or constant cluster")
            continue
        pairs.append(
            SubclusterPair(
                x_cluster=a,
                y_cluster=b,
                canonical_correlation=value,
                x_size=len(cx.members(a)),
                y_size=len(cy.members(b)),
            )
        )
    for note in notes:
        logger.warning(note)
    pairs.sort(key=lambda pr: (-pr.canonical_correlation, pr.x_cluster, pr.y_cluster))
    return SubclusterPairRanking(pairs=pairs, top_k_reported=top_k, notes=notes)
