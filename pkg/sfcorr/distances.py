"""Inter-subject distances and distance matrices.

Each row i of a distance matrix is computed as one task (row i against rows
j > i) with a fixed per-pair reduction, so the result is bit-identical for
any worker count.
"""
import json
import os
from typing import Callable, List, Optional

import numpy as np

from sfcorr.errors import DataError, DegenerateError, DimensionError
from sfcorr.logger import getLogger
from sfcorr.matrixio import iter_row_chunks, load_matrix, read_subject_ids, save_matrix
from sfcorr.models import VARIANCE_EPS, DistanceMatrix, FeatureMatrix
from sfcorr.schemas import MetricTag
from sfcorr.workers import map_indexed

logger = getLogger(__name__)

METRICS = ("scaled_euclidean", "pearson_correlation_distance", "euclidean")


def _check_pair(a: np.ndarray, b: np.ndarray, minimum: int) -> None:
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise DimensionError(f"feature vectors differ in shape: {a.shape} vs {b.shape}")
    if a.shape[0] < minimum:
        raise DimensionError(f"feature vectors need at least {minimum} entries")


def d_x(x, x2) -> float:
    """Euclidean distance divided by the number of features."""
    x = np.asarray(x, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    _check_pair(x, x2, 1)
    return float(np.sqrt(np.sum((x - x2) ** 2)) / x.shape[0])


def euclidean(x, x2) -> float:
    x = np.asarray(x, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    _check_pair(x, x2, 1)
    return float(np.sqrt(np.sum((x - x2) ** 2)))


def _unit_centered(y: np.ndarray) -> np.ndarray:
    """Center over the last axis and scale to unit norm."""
    centered = y - y.mean(axis=-1, keepdims=True)
    norm = np.sqrt(np.sum(centered ** 2, axis=-1, keepdims=True))
    scale = np.maximum(1.0, np.abs(y).max(axis=-1, keepdims=True)) * np.sqrt(y.shape[-1])
    if np.any(~(norm > VARIANCE_EPS * scale)):
        raise DegenerateError("correlation distance undefined for a zero-variance vector")
    return centered / norm


def d_y(y, y2) -> float:
    """One minus the Pearson correlation of the two vectors' entries."""
    y = np.asarray(y, dtype=np.float64)
    y2 = np.asarray(y2, dtype=np.float64)
    _check_pair(y, y2, 2)
    if np.array_equal(y, y2):
        _unit_centered(y)
        return 0.0
    rho = float(np.sum(_unit_centered(y) * _unit_centered(y2)))
    return float(np.clip(1.0 - rho, 0.0, 2.0))


def metric_function(metric: MetricTag) -> Callable:
    if metric == "scaled_euclidean":
        return d_x
    if metric == "pearson_correlation_distance":
        return d_y
    if metric == "euclidean":
        return euclidean
    raise DataError(f"unknown metric {metric!r}")


def _prepare(data: np.ndarray, metric: MetricTag, ids: List[str], offset: int = 0) -> np.ndarray:
    if metric != "pearson_correlation_distance":
        return data
    if data.shape[1] < 2:
        raise DimensionError("correlation distance needs at least 2 features")
    out = np.empty_like(data)
    for i in range(data.shape[0]):
        try:
            out[i] = _unit_centered(data[i])
        except DegenerateError as exc:
            raise DegenerateError(f"subject {ids[offset + i]}: {exc.detail}") from exc
    return out


def _row_distances(row: np.ndarray, others: np.ndarray, metric: MetricTag, p: int) -> np.ndarray:
    if metric == "pearson_correlation_distance":
        dist = np.clip(1.0 - np.sum(others * row, axis=1), 0.0, 2.0)
        dist[np.all(others == row, axis=1)] = 0.0
        return dist
    dist = np.sqrt(np.sum((others - row) ** 2, axis=1))
    return dist / p if metric == "scaled_euclidean" else dist


def _assemble(upper_rows: List[np.ndarray], n: int) -> np.ndarray:
    d = np.zeros((n, n))
    for i, row in enumerate(upper_rows):
        d[i, i + 1 :] = row
    d = d + d.T
    np.fill_diagonal(d, 0.0)
    return d


def distance_matrix(m: FeatureMatrix, metric: MetricTag, n_jobs: Optional[int] = None) -> DistanceMatrix:
    if metric not in METRICS:
        raise DataError(f"unknown metric {metric!r}")
    n, p = m.data.shape
    prepared = _prepare(m.data, metric, m.subject_ids)
    rows = map_indexed(lambda i: _row_distances(prepared[i], prepared[i + 1 :], metric, p), n, n_jobs)
    logger.debug("Built %s distance matrix over %d subjects", metric, n)
    return DistanceMatrix(data=_assemble(rows, n), metric_tag=metric, subject_ids=list(m.subject_ids))


def distance_matrix_streamed(path: str, metric: MetricTag, chunk_rows: int = 256) -> DistanceMatrix:
    """Distance matrix over a binary matrix file, holding two row chunks at a time."""
    if metric not in METRICS:
        raise DataError(f"unknown metric {metric!r}")
    ids = read_subject_ids(path)
    n = len(ids)
    upper = [np.empty(n - i - 1) for i in range(n)]
    for start_a, block_a in iter_row_chunks(path, chunk_rows):
        p = block_a.shape[1]
        prep_a = _prepare(block_a, metric, ids, start_a)
        for start_b, block_b in iter_row_chunks(path, chunk_rows):
            if start_b + block_b.shape[0] <= start_a:
                continue
            prep_b = _prepare(block_b, metric, ids, start_b)
            for a in range(prep_a.shape[0]):
                i = start_a + a
                lo = max(i + 1, start_b)
                hi = start_b + prep_b.shape[0]
                if lo >= hi:
                    continue
                upper[i][lo - i - 1 : hi - i - 1] = _row_distances(
                    prep_a[a], prep_b[lo - start_b : hi - start_b], metric, p
                )
    return DistanceMatrix(data=_assemble(upper, n), metric_tag=metric, subject_ids=ids)


def upper_triangle(d: DistanceMatrix) -> np.ndarray:
    return d.data[np.triu_indices(d.n, k=1)]


def save_distance_matrix(d: DistanceMatrix, path: str) -> str:
    save_matrix(FeatureMatrix(data=d.data, subject_ids=d.subject_ids), path, "bin")
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump({"metric_tag": d.metric_tag, "n": d.n}, fh, sort_keys=True)
    return path


def load_distance_matrix(path: str) -> DistanceMatrix:
    sidecar = path + ".json"
    if not os.path.isfile(sidecar):
        raise DataError(f"distance matrix sidecar not found: {sidecar}")
    with open(sidecar, encoding="utf-8") as fh:
        meta = json.load(fh)
    matrix = load_matrix(path, "bin")
    if matrix.n != meta.get("n"):
        raise DimensionError(f"sidecar declares n={meta.get('n')}, file holds {matrix.n} rows")
    return DistanceMatrix(data=matrix.data, metric_tag=meta["metric_tag"], subject_ids=matrix.subject_ids)
