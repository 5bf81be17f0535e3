"""Train/test splitting and cross-validated choice of the sparsity bounds.

Standardization is refitted on the fit rows of every fold; validation and
test rows only ever see parameters estimated elsewhere.
"""
import math
import os
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from sfcorr.errors import ConfigError, DataError, DegenerateError, DimensionError, SfcorrError
from sfcorr.logger import getLogger
from sfcorr.models import AlignmentPair, CvReport, FeatureMatrix
from sfcorr.scca import alignment_scores, canonical_correlation, fit_alignment
from sfcorr.schemas import SccaParams
from sfcorr.workers import map_indexed

logger = getLogger(__name__)

MIN_SPLIT_SUBJECTS = 12


def train_test_split(n: int, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Random 5:1 split; the training side gets ceil(5n/6) subjects."""
    if n < MIN_SPLIT_SUBJECTS:
        raise DimensionError(f"train/test split needs at least {MIN_SPLIT_SUBJECTS} subjects, got {n}")
    n_train = -(-5 * n // 6)
    order = np.random.default_rng(seed).permutation(n)
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def kfold_partition(indices: Sequence[int], k: int = 5, seed: int = 0) -> List[np.ndarray]:
    indices = np.asarray(indices, dtype=int)
    if k < 2:
        raise ConfigError(f"need at least 2 folds, got {k}")
    if k > indices.size:
        raise ConfigError(f"{k} folds requested for {indices.size} subjects")
    shuffled = indices[np.random.default_rng(seed).permutation(indices.size)]
    return [np.sort(fold) for fold in np.array_split(shuffled, k)]


def default_grid(p: int, q: int, size: int = 8, tol: float = 1e-6, max_iters: int = 500) -> List[SccaParams]:
    """Log-spaced l1 bounds over [1, sqrt(dim)] for each side."""
    c1s = np.geomspace(1.0, math.sqrt(p), size) if p > 1 else np.ones(1)
    c2s = np.geomspace(1.0, math.sqrt(q), size) if q > 1 else np.ones(1)
    return [SccaParams(c1=float(a), c2=float(b), tol=tol, max_iters=max_iters) for a in c1s for b in c2s]


def load_grid_file(path: str, tol: float = 1e-6, max_iters: int = 500) -> List[SccaParams]:
    """Grid cells from a CSV file with columns c1 and c2."""
    if not os.path.isfile(path):
        raise ConfigError(f"grid file not found: {path}")
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError, ValueError) as exc:
        raise ConfigError(f"cannot parse grid file {path}: {exc}") from exc
    missing = {"c1", "c2"} - set(frame.columns)
    if missing:
        raise DataError(f"{path}: grid file lacks column(s) {sorted(missing)}")
    if frame.empty:
        raise ConfigError(f"{path}: grid file has no cells")
    bounds = frame[["c1", "c2"]].apply(pd.to_numeric, errors="coerce")
    bad = np.flatnonzero(~np.isfinite(bounds.to_numpy(dtype=np.float64)).all(axis=1))
    if bad.size:
        row = int(bad[0])
        raise ConfigError(
            f"{path}: row {row + 1} has a non-numeric bound (c1={frame.c1.iat[row]!r}, c2={frame.c2.iat[row]!r})"
        )
    return [
        SccaParams(c1=float(row.c1), c2=float(row.c2), tol=tol, max_iters=max_iters)
        for row in bounds.itertuples(index=False)
    ]


def fit_fold(
    x: FeatureMatrix,
    y: FeatureMatrix,
    fit_rows: np.ndarray,
    validation_rows: np.ndarray,
    params: SccaParams,
    init: str = "svd",
    seed: int = 0,
) -> Tuple[AlignmentPair, float]:
    """Fit on fit_rows and return the validation canonical correlation."""
    pair = fit_alignment(x.take_rows(fit_rows), y.take_rows(fit_rows), params, init, seed)
    sx, sy = alignment_scores(pair, x.data[validation_rows], y.data[validation_rows])
    return pair, canonical_correlation(sx, sy)


def _select(grid: List[SccaParams], means: List[Optional[float]]) -> int:
    candidates = [i for i, m in enumerate(means) if m is not None]
    best = max(means[i] for i in candidates)
    tied = [i for i in candidates if means[i] == best]
    # ties go to the sparser cell
    return min(tied, key=lambda i: (grid[i].c1 + grid[i].c2, i))


def cv_grid_search(
    x: FeatureMatrix,
    y: FeatureMatrix,
    grid: List[SccaParams],
    k: int = 5,
    seed: int = 0,
    init: str = "svd",
    n_jobs: Optional[int] = None,
) -> CvReport:
    if not grid:
        raise ConfigError("parameter grid is empty")
    if list(x.subject_ids) != list(y.subject_ids):
        raise DimensionError("x and y rows are not aligned by subject id")
    folds = kfold_partition(np.arange(x.n), k, seed)
    if min(x.n - f.size for f in folds) < 3:
        raise DimensionError("fold fit sets are too small to standardize")
    all_rows = np.arange(x.n)

    def task(t: int) -> Tuple[Optional[float], Optional[str]]:
        cell, fold = divmod(t, k)
        validation = folds[fold]
        fit_rows = np.setdiff1d(all_rows, validation)
        try:
            _, corr = fit_fold(x, y, fit_rows, validation, grid[cell], init, seed)
            return corr, None
        except SfcorrError as exc:
            params = grid[cell]
            return None, f"c1={params.c1:g}, c2={params.c2:g}, fold {fold}: {exc.detail}"

    results = map_indexed(task, len(grid) * k, n_jobs)
    fold_correlations = [[results[c * k + f][0] for f in range(k)] for c in range(len(grid))]
    failures = [msg for _, msg in results if msg is not None]
    for msg in failures:
        logger.warning("CV fit failed (%s)", msg)
    means = [
        float(np.mean([r for r in row if r is not None])) if any(r is not None for r in row) else None
        for row in fold_correlations
    ]
    if all(m is None for m in means):
        raise DegenerateError("every grid cell failed: " + "; ".join(failures))
    best = _select(grid, means)
    selected = grid[best]
    logger.info("CV selected c1=%g, c2=%g (mean validation %.4f)", selected.c1, selected.c2, means[best])

    final = fit_alignment(x, y, selected, init, seed)
    train_corr = canonical_correlation(*alignment_scores(final, x.data, y.data))
    return CvReport(
        grid=[(g.c1, g.c2) for g in grid],
        fold_correlations=fold_correlations,
        mean_validation=means,
        selected=(selected.c1, selected.c2),
        train_correlation=train_corr,
        seed=seed,
        k=k,
        failures=failures,
        fit=final,
    )


def evaluate_test(fit: AlignmentPair, x_test, y_test) -> float:
    """Canonical correlation of the held-out projections."""
    xa = x_test.data if isinstance(x_test, FeatureMatrix) else x_test
    ya = y_test.data if isinstance(y_test, FeatureMatrix) else y_test
    corr = canonical_correlation(*alignment_scores(fit, xa, ya))
    logger.info("Held-out canonical correlation %.4f", corr)
    return corr
