"""Synthetic paired datasets with a known ground truth.

Noise is i.i.d. standard normal from numpy's Generator (ziggurat sampler).
Every generator is a pure function of its arguments.
"""
from typing import Iterable, List, Optional, Tuple

import numpy as np

from sfcorr.errors import ConfigError, DimensionError
from sfcorr.logger import getLogger
from sfcorr.models import FeatureMatrix, PairedDataset
from sfcorr.schemas import MetricTag, PlantedTruth

logger = getLogger(__name__)

POPULATION_CHUNK = 10_000


def subject_ids(n: int) -> List[str]:
    return [f"s{i + 1:04d}" for i in range(n)]


def _paired(x: np.ndarray, y: np.ndarray) -> PairedDataset:
    ids = subject_ids(x.shape[0])
    return PairedDataset(
        x=FeatureMatrix(data=x, subject_ids=ids, modality_tag="x"),
        y=FeatureMatrix(data=y, subject_ids=ids, modality_tag="y"),
    )


def _check_sizes(n: int, p: int, q: int) -> None:
    if n < 4:
        raise DimensionError(f"need at least 4 subjects, got {n}")
    if p < 1 or q < 1:
        raise DimensionError(f"feature counts must be positive, got p={p}, q={q}")


def gen_null(n: int, p: int, q: int, seed: int = 0) -> PairedDataset:
    _check_sizes(n, p, q)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    y = rng.standard_normal((n, q))
    return _paired(x, y)


def latent_directions(p: int, q: int, direction_seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Uniform random directions with unit per-coordinate RMS (norms sqrt(p), sqrt(q))."""
    rng = np.random.default_rng(direction_seed)
    a = rng.standard_normal(p)
    b = rng.standard_normal(q)
    return a * (np.sqrt(p) / np.linalg.norm(a)), b * (np.sqrt(q) / np.linalg.norm(b))


def gen_shared_latent(
    n: int, p: int, q: int, strength: float = 0.8, seed: int = 0, direction_seed: Optional[int] = None
) -> Tuple[PairedDataset, PlantedTruth]:
    """Both modalities load one per-subject latent on a fixed direction."""
    _check_sizes(n, p, q)
    if not 0.0 <= strength <= 1.0:
        raise ConfigError(f"strength must lie in [0, 1], got {strength}")
    a, b = latent_directions(p, q, seed if direction_seed is None else direction_seed)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(n)
    x = strength * np.outer(g, a) + rng.standard_normal((n, p))
    y = strength * np.outer(g, b) + rng.standard_normal((n, q))
    truth = PlantedTruth(kind="shared-latent", latent_correlation=strength, seed=seed)
    return _paired(x, y), truth


def _sparse_unit(rng: np.random.Generator, dim: int, s: int) -> Tuple[np.ndarray, np.ndarray]:
    support = np.sort(rng.choice(dim, size=s, replace=False))
    values = rng.choice([-1.0, 1.0], size=s) / np.sqrt(s)
    return support, values


def gen_sparse_canonical_pair(
    n: int,
    p: int,
    q: int,
    s_u: int = 10,
    s_v: int = 10,
    rho: float = 0.9,
    seed: int = 0,
    signal_scale: float = 2.0,
) -> Tuple[PairedDataset, PlantedTruth]:
    """Correlated latents (z_x, z_y) loaded on sparse unit directions u*, v*.

    Every active feature carries +/- signal_scale times its latent on top of
    unit noise.
    """
    _check_sizes(n, p, q)
    if not (1 <= s_u <= p and 1 <= s_v <= q):
        raise ConfigError(f"supports must satisfy 1 <= s_u <= p and 1 <= s_v <= q, got {s_u}, {s_v}")
    if not 0.0 <= rho < 1.0:
        raise ConfigError(f"latent correlation must lie in [0, 1), got {rho}")
    if not signal_scale > 0.0:
        raise ConfigError(f"signal scale must be positive, got {signal_scale}")
    rng = np.random.default_rng(seed)
    u_support, u_values = _sparse_unit(rng, p, s_u)
    v_support, v_values = _sparse_unit(rng, q, s_v)
    z_x = rng.standard_normal(n)
    z_y = rho * z_x + np.sqrt(1.0 - rho ** 2) * rng.standard_normal(n)

    x = rng.standard_normal((n, p))
    y = rng.standard_normal((n, q))
    x[:, u_support] += np.outer(z_x, signal_scale * np.sqrt(s_u) * u_values)
    y[:, v_support] += np.outer(z_y, signal_scale * np.sqrt(s_v) * v_values)
    truth = PlantedTruth(
        kind="sparse-canonical-pair",
        latent_correlation=rho,
        u_star_support=u_support.tolist(),
        u_star_values=u_values.tolist(),
        v_star_support=v_support.tolist(),
        v_star_values=v_values.tolist(),
        signal_scale=signal_scale,
        seed=seed,
    )
    return _paired(x, y), truth


def planted_vector(truth: PlantedTruth, side: str, dim: int) -> np.ndarray:
    support = truth.u_star_support if side == "u" else truth.v_star_support
    values = truth.u_star_values if side == "u" else truth.v_star_values
    if support is None:
        raise ConfigError(f"{truth.kind} data has no planted {side} vector")
    w = np.zeros(dim)
    w[support] = values
    return w


def _pairwise(a: np.ndarray, b: np.ndarray, metric: MetricTag) -> np.ndarray:
    if metric == "pearson_correlation_distance":
        ca = a - a.mean(axis=1, keepdims=True)
        cb = b - b.mean(axis=1, keepdims=True)
        rho = np.sum(ca * cb, axis=1) / np.sqrt(np.sum(ca ** 2, axis=1) * np.sum(cb ** 2, axis=1))
        return np.clip(1.0 - rho, 0.0, 2.0)
    dist = np.sqrt(np.sum((a - b) ** 2, axis=1))
    return dist / a.shape[1] if metric == "scaled_euclidean" else dist


def population_distance_correlation(
    p: int,
    q: int,
    strength: float,
    n_pairs: int = 100_000,
    seed: int = 0,
    metric_x: MetricTag = "scaled_euclidean",
    metric_y: MetricTag = "pearson_correlation_distance",
    direction_seed: Optional[int] = None,
) -> float:
    """Monte Carlo value of the distance correlation over independent subject pairs.

    Uses the same directions gen_shared_latent draws for direction_seed.
    """
    if n_pairs < 2:
        raise ConfigError("need at least 2 subject pairs")
    a, b = latent_directions(p, q, seed if direction_seed is None else direction_seed)
    rng = np.random.default_rng([seed, 1])
    dx_parts, dy_parts = [], []
    remaining = n_pairs
    while remaining > 0:
        m = min(POPULATION_CHUNK, remaining)
        g = rng.standard_normal((2, m))
        x1 = strength * np.outer(g[0], a) + rng.standard_normal((m, p))
        x2 = strength * np.outer(g[1], a) + rng.standard_normal((m, p))
        y1 = strength * np.outer(g[0], b) + rng.standard_normal((m, q))
        y2 = strength * np.outer(g[1], b) + rng.standard_normal((m, q))
        dx_parts.append(_pairwise(x1, x2, metric_x))
        dy_parts.append(_pairwise(y1, y2, metric_y))
        remaining -= m
    value = float(np.corrcoef(np.concatenate(dx_parts), np.concatenate(dy_parts))[0, 1])
    logger.info("Population distance correlation (strength %.2f, %d pairs): %.4f", strength, n_pairs, value)
    return value


def support_f1(estimated: Iterable[int], planted: Iterable[int]) -> float:
    est, true = set(estimated), set(planted)
    if not est and not true:
        return 1.0
    hits = len(est & true)
    if hits == 0:
        return 0.0
    precision = hits / len(est)
    recall = hits / len(true)
    return 2.0 * precision * recall / (precision + recall)
