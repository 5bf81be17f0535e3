"""Inference on the correlation of two subjects-by-subjects distance matrices.

The statistic is the Pearson correlation of the upper-triangular (i < j)
entries of D^X and D^Y. The null is simulated by relabeling the subjects of
D^X only; the feature dimension is never touched.
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from sfcorr.distances import distance_matrix
from sfcorr.errors import ConfigError, DegenerateError, DimensionError
from sfcorr.logger import getLogger
from sfcorr.models import DistanceMatrix, FeatureMatrix
from sfcorr.schemas import (
    BootstrapResult,
    ConfidenceInterval,
    DcorResult,
    MetricTag,
    PermutationResult,
    RatioChoice,
)
from sfcorr.workers import map_indexed, replicate_rng

logger = getLogger(__name__)

# Smallest sample for which every statistic here is defined
MIN_SUBJECTS = 4


def _check_pair(dx: DistanceMatrix, dy: DistanceMatrix, minimum: int = 3) -> None:
    if dx.n != dy.n:
        raise DimensionError(f"distance matrices differ in size: {dx.n} vs {dy.n}")
    if list(dx.subject_ids) != list(dy.subject_ids):
        raise DimensionError("distance matrices are not in the same subject order")
    if dx.n < minimum:
        raise DimensionError(f"need at least {minimum} subjects, got {dx.n}")


def _centered(triangle: np.ndarray, name: str) -> Tuple[np.ndarray, float]:
    if triangle.size == 0 or np.all(triangle == triangle[0]):
        raise DegenerateError(f"{name} distances are constant over all subject pairs")
    centered = triangle - triangle.mean()
    return centered, float(np.sqrt(np.sum(centered ** 2)))


class _PairKernel:
    """Precomputed centered triangles of one (D^X, D^Y) pair.

    Relabeling subjects permutes the multiset of D^X distances without
    changing it, so the mean and the centered norm of D^X are computed once
    and reused for every permuted replicate.
    """

    def __init__(self, ax: np.ndarray, ay: np.ndarray):
        n = ax.shape[0]
        self.n = n
        self.iu = np.triu_indices(n, k=1)
        tx = ax[self.iu]
        ty = ay[self.iu]
        _, self.norm_x = _centered(tx, "X")
        self.cy, self.norm_y = _centered(ty, "Y")
        self.cx_full = ax - tx.mean()

    @property
    def denominator(self) -> float:
        return self.norm_x * self.norm_y

    def statistic(self, sigma: Optional[np.ndarray] = None) -> float:
        if sigma is None:
            sigma = np.arange(self.n)
        permuted = self.cx_full[np.ix_(sigma, sigma)][self.iu]
        value = float(np.sum(permuted * self.cy)) / self.denominator
        return min(1.0, max(-1.0, value))


def _sub_statistic(ax: np.ndarray, ay: np.ndarray, idx: np.ndarray) -> float:
    block = np.ix_(idx, idx)
    return _PairKernel(ax[block], ay[block]).statistic()


def distance_pair_correlation(dx: DistanceMatrix, dy: DistanceMatrix) -> float:
    _check_pair(dx, dy)
    return _PairKernel(dx.data, dy.data).statistic()


def permuted_statistic(dx: DistanceMatrix, dy: DistanceMatrix, sigma: Sequence[int]) -> float:
    """The statistic with the subjects of D^X relabeled by sigma."""
    _check_pair(dx, dy)
    sigma = np.asarray(sigma, dtype=int)
    if sorted(sigma.tolist()) != list(range(dx.n)):
        raise DimensionError(f"sigma is not a permutation of 0..{dx.n - 1}")
    return _PairKernel(dx.data, dy.data).statistic(sigma)


def permutation_test(
    dx: DistanceMatrix, dy: DistanceMatrix, b: int = 10_000, seed: int = 0, n_jobs: Optional[int] = None
) -> PermutationResult:
    _check_pair(dx, dy)
    if b < 1:
        raise ConfigError("number of permutations must be at least 1")
    kernel = _PairKernel(dx.data, dy.data)
    observed = kernel.statistic()
    null = map_indexed(lambda i: kernel.statistic(replicate_rng(seed, i).permutation(kernel.n)), b, n_jobs)
    count = int(sum(1 for r in null if r >= observed))
    logger.info("Permutation test: observed %.4f, %d of %d replicates at least as large", observed, count, b)
    return PermutationResult(
        observed=observed,
        n_permutations=b,
        null_samples=null,
        count_at_least=count,
        p_value=count / b,
        p_value_smoothed=(1 + count) / (1 + b),
        seed=seed,
    )


def rank_correlations(dx: DistanceMatrix, dy: DistanceMatrix) -> Tuple[float, float]:
    """Spearman's rho and Kendall's tau-b over the upper triangles."""
    _check_pair(dx, dy)
    iu = np.triu_indices(dx.n, k=1)
    tx, ty = dx.data[iu], dy.data[iu]
    _centered(tx, "X")
    _centered(ty, "Y")
    spearman = stats.spearmanr(tx, ty).statistic
    kendall = stats.kendalltau(tx, ty, variant="b").statistic
    return float(spearman), float(kendall)


def ucenter(d) -> np.ndarray:
    """U-centered distance matrix with a zero diagonal."""
    a = d.data if isinstance(d, DistanceMatrix) else np.asarray(d, dtype=np.float64)
    n = a.shape[0]
    if n < MIN_SUBJECTS:
        raise DimensionError(f"U-centering needs at least {MIN_SUBJECTS} subjects, got {n}")
    rows = a.sum(axis=1)
    cols = a.sum(axis=0)
    total = a.sum()
    u = a - rows[:, None] / (n - 2) - cols[None, :] / (n - 2) + total / ((n - 1) * (n - 2))
    np.fill_diagonal(u, 0.0)
    return u


def _u_inner(a: np.ndarray, b: np.ndarray) -> float:
    n = a.shape[0]
    return float(np.sum(a * b)) / (n * (n - 3))


def bias_corrected_dcor(dx, dy) -> float:
    """Bias-corrected distance correlation of two distance matrices."""
    ux, uy = ucenter(dx), ucenter(dy)
    if ux.shape != uy.shape:
        raise DimensionError(f"distance matrices differ in size: {ux.shape} vs {uy.shape}")
    xx, yy = _u_inner(ux, ux), _u_inner(uy, uy)
    if not (xx > 0.0 and yy > 0.0):
        raise DegenerateError("distance covariance of a modality with itself is zero")
    return min(1.0, max(-1.0, _u_inner(ux, uy) / math.sqrt(xx * yy)))


def dcor_ttest_distances(dx: DistanceMatrix, dy: DistanceMatrix) -> DcorResult:
    _check_pair(dx, dy, MIN_SUBJECTS)
    n = dx.n
    r = bias_corrected_dcor(dx, dy)
    v = n * (n - 3) // 2
    df = v - 1
    if r >= 1.0:
        t_stat, p_value = None, 0.0
        logger.info("dCor t-test: r=1, unbounded t, df=%d", df)
    else:
        t_stat = math.sqrt(df) * r / math.sqrt(1.0 - r * r)
        p_value = float(stats.t.sf(t_stat, df))
        logger.info("dCor t-test: r=%.4f t=%.3f df=%d p=%.3g", r, t_stat, df, p_value)
    return DcorResult(n=n, bias_corrected_r=r, t_statistic=t_stat, degrees_of_freedom=df, p_value=p_value)


def dcor_ttest(x: FeatureMatrix, y: FeatureMatrix, n_jobs: Optional[int] = None) -> DcorResult:
    """t-test of the bias-corrected distance correlation under Euclidean distances."""
    if list(x.subject_ids) != list(y.subject_ids):
        raise DimensionError("x and y rows are not aligned by subject id")
    if x.n < MIN_SUBJECTS:
        raise DimensionError(f"dCor t-test needs at least {MIN_SUBJECTS} subjects, got {x.n}")
    return dcor_ttest_distances(
        distance_matrix(x, "euclidean", n_jobs), distance_matrix(y, "euclidean", n_jobs)
    )


def subsample_size(n: int, ratio: float) -> int:
    if not 0.0 < ratio <= 1.0:
        raise ConfigError(f"subsample ratio must lie in (0, 1], got {ratio}")
    m = int(math.floor(ratio * n + 0.5))
    if m < MIN_SUBJECTS:
        raise ConfigError(f"ratio {ratio} gives a subsample of {m} subjects (need {MIN_SUBJECTS})")
    return min(m, n)


def _subsample_replicates(
    ax: np.ndarray, ay: np.ndarray, m: int, b: int, seed: int, offset: int = 0, n_jobs: Optional[int] = None
) -> List[Optional[float]]:
    n = ax.shape[0]

    def replicate(i: int) -> Optional[float]:
        idx = np.sort(replicate_rng(seed, offset + i).choice(n, size=m, replace=False))
        try:
            return _sub_statistic(ax, ay, idx)
        except DegenerateError:
            return None

    return map_indexed(replicate, b, n_jobs)


def subsample_ci_distances(
    dx: DistanceMatrix,
    dy: DistanceMatrix,
    ratio: float = 0.135,
    b: int = 10_000,
    level: float = 0.95,
    seed: int = 0,
    method: str = "root",
    n_jobs: Optional[int] = None,
    bracket_estimate: bool = False,
) -> ConfidenceInterval:
    """Root or percentile interval from b subsamples of size round(ratio * n).

    With bracket_estimate the root interval is widened to contain the point
    estimate when the subsample roots are skewed enough to exclude it.
    """
    _check_pair(dx, dy, MIN_SUBJECTS)
    if b < 1:
        raise ConfigError("number of subsamples must be at least 1")
    if not 0.0 < level < 1.0:
        raise ConfigError(f"confidence level must lie in (0, 1), got {level}")
    if method not in ("root", "percentile"):
        raise ConfigError(f"unknown interval method {method!r}")
    n = dx.n
    m = subsample_size(n, ratio)
    theta_n = distance_pair_correlation(dx, dy)
    raw = _subsample_replicates(dx.data, dy.data, m, b, seed, n_jobs=n_jobs)
    replicates = [r for r in raw if r is not None]
    if len(replicates) < len(raw):
        logger.warning("%d of %d subsamples had a constant distance triangle", len(raw) - len(replicates), b)
    if not replicates:
        raise DegenerateError("every subsample had a constant distance triangle")
    values = np.asarray(replicates)
    alpha = 1.0 - level
    if method == "root":
        roots = math.sqrt(m) * (values - theta_n)
        q_lo, q_hi = np.quantile(roots, [alpha / 2.0, 1.0 - alpha / 2.0])
        lower = theta_n - q_hi / math.sqrt(n)
        upper = theta_n - q_lo / math.sqrt(n)
        if bracket_estimate:
            lower, upper = min(lower, theta_n), max(upper, theta_n)
    else:
        lower, upper = np.quantile(values, [alpha / 2.0, 1.0 - alpha / 2.0])
    logger.info("Subsampling %s interval (m=%d, b=%d): [%.4f, %.4f]", method, m, b, lower, upper)
    return ConfidenceInterval(
        point_estimate=theta_n,
        lower=float(lower),
        upper=float(upper),
        level=level,
        subsample_ratio=ratio,
        subsample_size=m,
        n_subsamples=len(replicates),
        method=method,
        bracketed=bracket_estimate and method == "root",
        seed=seed,
        replicates=replicates,
    )


def subsample_ci(
    x: FeatureMatrix,
    y: FeatureMatrix,
    ratio: float = 0.135,
    b: int = 10_000,
    level: float = 0.95,
    seed: int = 0,
    method: str = "root",
    metric_x: MetricTag = "scaled_euclidean",
    metric_y: MetricTag = "pearson_correlation_distance",
    n_jobs: Optional[int] = None,
    bracket_estimate: bool = False,
) -> ConfidenceInterval:
    """Subsampling interval for the distance correlation of x and y.

    Distances depend only on the pair of subjects, so each subsample uses the
    sub-block of the full distance matrices.
    """
    if list(x.subject_ids) != list(y.subject_ids):
        raise DimensionError("x and y rows are not aligned by subject id")
    subsample_size(x.n, ratio)
    return subsample_ci_distances(
        distance_matrix(x, metric_x, n_jobs),
        distance_matrix(y, metric_y, n_jobs),
        ratio=ratio,
        b=b,
        level=level,
        seed=seed,
        method=method,
        n_jobs=n_jobs,
        bracket_estimate=bracket_estimate,
    )


def bootstrap_from_distances(
    dx: DistanceMatrix, dy: DistanceMatrix, b: int = 1000, seed: int = 0, n_jobs: Optional[int] = None
) -> BootstrapResult:
    """Resample subjects with replacement; duplicates give zero distances."""
    _check_pair(dx, dy, MIN_SUBJECTS)
    if b < 1:
        raise ConfigError("number of bootstrap replicates must be at least 1")
    n = dx.n
    observed = distance_pair_correlation(dx, dy)

    def replicate(i: int) -> Optional[float]:
        idx = replicate_rng(seed, i).integers(0, n, size=n)
        try:
            return _sub_statistic(dx.data, dy.data, idx)
        except DegenerateError:
            return None

    replicates = map_indexed(replicate, b, n_jobs)
    missing = sum(1 for r in replicates if r is None)
    if missing:
        logger.warning("%d of %d bootstrap replicates were undefined", missing, b)
    return BootstrapResult(observed=observed, replicates=replicates, n_missing=missing, seed=seed)


def bootstrap_distribution(
    x: FeatureMatrix,
    y: FeatureMatrix,
    b: int = 1000,
    seed: int = 0,
    metric_x: MetricTag = "scaled_euclidean",
    metric_y: MetricTag = "pearson_correlation_distance",
    n_jobs: Optional[int] = None,
) -> BootstrapResult:
    if list(x.subject_ids) != list(y.subject_ids):
        raise DimensionError("x and y rows are not aligned by subject id")
    return bootstrap_from_distances(
        distance_matrix(x, metric_x, n_jobs), distance_matrix(y, metric_y, n_jobs), b=b, seed=seed, n_jobs=n_jobs
    )


def choose_subsample_ratio(
    dx: DistanceMatrix,
    dy: DistanceMatrix,
    shrink: float = 0.75,
    b: int = 500,
    seed: int = 0,
    n_jobs: Optional[int] = None,
) -> RatioChoice:
    """Pick the subsample size whose root distribution is most stable.

    Candidate sizes ceil(shrink^j * n) for j >= 1 are kept while at least
    four subjects remain; the chosen size minimizes the Kolmogorov-Smirnov
    distance to the next smaller candidate's root distribution.
    """
    _check_pair(dx, dy, MIN_SUBJECTS)
    if not 0.0 < shrink < 1.0:
        raise ConfigError(f"shrink factor must lie in (0, 1), got {shrink}")
    n = dx.n
    sizes: List[int] = []
    j = 1
    while True:
        m = int(math.ceil(shrink ** j * n))
        if m < MIN_SUBJECTS:
            break
        if m < n and (not sizes or m < sizes[-1]):
            sizes.append(m)
        j += 1
    if len(sizes) < 2:
        raise ConfigError(f"n={n} leaves fewer than two candidate subsample sizes")
    theta_n = distance_pair_correlation(dx, dy)
    roots = []
    for k, m in enumerate(sizes):
        values = [r for r in _subsample_replicates(dx.data, dy.data, m, b, seed, k * b, n_jobs) if r is not None]
        if not values:
            raise DegenerateError(f"every subsample of size {m} had a constant distance triangle")
        roots.append(math.sqrt(m) * (np.asarray(values) - theta_n))
    distances = [float(stats.ks_2samp(roots[k], roots[k + 1]).statistic) for k in range(len(sizes) - 1)]
    best = int(np.argmin(distances))
    logger.info("Subsample size %d chosen from candidates %s", sizes[best], sizes)
    return RatioChoice(sizes=sizes, distances=distances, chosen_size=sizes[best], chosen_ratio=sizes[best] / n)


def significance_marker(p_value: Optional[float] = None, interval: Optional[Tuple[float, float]] = None) -> str:
    if interval is not None:
        lower, upper = interval
        return "+" if lower > 0.0 or upper < 0.0 else ""
    if p_value is None:
        return ""
    if p_value < 0.001:
        return "***"
    if p_value < 0.01:
        return "**"
    if p_value < 0.05:
        return "*"
    return ""
