"""Plain and elastic-net sparse canonical correlation analysis.

Both solvers work on the scaled matrices X/sqrt(n) and Y/sqrt(n) of
column-standardized data, so that <Xu, Yv> is u' S_xy v with the empirical
cross-covariance S_xy = X'Y / n, and ||Xu|| = 1 makes the objective a
correlation. S_xy is only materialized for small problems.
"""
import math
from typing import Optional, Tuple

import numpy as np
from scipy import optimize
from scipy.sparse.linalg import LinearOperator, svds

from sfcorr.errors import DegenerateError, DimensionError
from sfcorr.logger import getLogger
from sfcorr.models import AlignmentPair, FeatureMatrix, Standardizer
from sfcorr.schemas import AlignmentExport, SccaParams

logger = getLogger(__name__)

# Above this many cross-covariance entries the leading pair is found Gram-free
DENSE_SVD_LIMIT = 4_000_000
POWER_ITERATIONS = 10
INIT_SEED = 0
DYKSTRA_CYCLES = 200
DYKSTRA_TOL = 1e-12
INNER_ITERS = 100
BACKTRACKS = 30
STEP_SCALE = 10.0


def _as_array(m, name: str) -> np.ndarray:
    data = m.data if isinstance(m, FeatureMatrix) else np.asarray(m, dtype=np.float64)
    if data.ndim != 2:
        raise DimensionError(f"{name} must be a 2-dimensional matrix")
    return data


def _scaled_pair(x, y) -> Tuple[np.ndarray, np.ndarray]:
    xa, ya = _as_array(x, "x"), _as_array(y, "y")
    if xa.shape[0] != ya.shape[0]:
        raise DimensionError(f"x has {xa.shape[0]} rows, y has {ya.shape[0]}")
    if xa.shape[0] < 2:
        raise DimensionError("need at least 2 subjects")
    root_n = math.sqrt(xa.shape[0])
    return xa / root_n, ya / root_n


def _objective(xs: np.ndarray, ys: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    return float(np.dot(xs @ u, ys @ v))


def _sign_fix(u: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if u.size and u[int(np.argmax(np.abs(u)))] < 0:
        return -u, -v
    return u, v


def _support(w: np.ndarray):
    return np.flatnonzero(w != 0.0).tolist()


# Projections

def project_l2(z: np.ndarray, radius: float) -> np.ndarray:
    norm = float(np.linalg.norm(z))
    return z if norm <= radius else z * (radius / norm)


def project_l1(z: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto the l1 ball by sorting the magnitudes."""
    magnitude = np.abs(z)
    if magnitude.sum() <= radius:
        return z
    ordered = np.sort(magnitude)[::-1]
    cumulative = np.cumsum(ordered) - radius
    rho = np.nonzero(ordered * np.arange(1, z.size + 1) > cumulative)[0][-1]
    theta = cumulative[rho] / (rho + 1.0)
    return np.sign(z) * np.maximum(magnitude - theta, 0.0)


class EllipsoidProjector:
    """Projection onto {w : ||A w|| <= 1} through the thin SVD of A."""

    def __init__(self, a: np.ndarray):
        self.a = a
        _, s, vt = np.linalg.svd(a, full_matrices=False)
        keep = s > 1e-10 * s[0] if s.size and s[0] > 0 else np.zeros(s.shape, dtype=bool)
        self.s2 = s[keep] ** 2
        self.vt = vt[keep]

    def norm(self, w: np.ndarray) -> float:
        return float(np.linalg.norm(self.a @ w))

    def __call__(self, z: np.ndarray) -> np.ndarray:
        coef = self.vt @ z
        energy = self.s2 * coef ** 2
        if energy.sum() <= 1.0:
            return z

        def excess(lam: float) -> float:
            return float(np.sum(energy / (1.0 + lam * self.s2) ** 2)) - 1.0

        hi = 1.0 / self.s2.min()
        while excess(hi) > 0.0:
            hi *= 2.0
        lam = optimize.brentq(excess, 0.0, hi, xtol=1e-14, rtol=1e-12)
        shrink = lam * self.s2 / (1.0 + lam * self.s2)
        return z - self.vt.T @ (shrink * coef)


class ConstraintSet:
    """{||A w|| <= 1, ||w||_1 <= c, ||w||_2 <= d} with a Dykstra projection."""

    def __init__(self, a: np.ndarray, c: float, d: float):
        self.ellipsoid = EllipsoidProjector(a)
        self.c = c
        self.d = d
        # the l1 ball already satisfies the l2 and variance bounds
        column_norm = float(np.linalg.norm(a, axis=0).max()) if a.size else 0.0
        self.l1_inscribed = c <= d and c * column_norm <= 1.0

    def l1_vertex(self, gradient: np.ndarray) -> np.ndarray:
        """Exact maximizer of gradient'w over the l1 ball: one signed coordinate."""
        w = np.zeros_like(gradient)
        j = int(np.argmax(np.abs(gradient)))
        w[j] = self.c * np.sign(gradient[j])
        return w

    def project(self, z: np.ndarray) -> np.ndarray:
        # l1 goes last so its exact zeros reach the caller
        steps = (
            self.ellipsoid,
            lambda w: project_l2(w, self.d),
            lambda w: project_l1(w, self.c),
        )
        x = z.copy()
        increments = [np.zeros_like(z) for _ in steps]
        for _ in range(DYKSTRA_CYCLES):
            previous = x
            for i, proj in enumerate(steps):
                y = proj(x + increments[i])
                increments[i] = x + increments[i] - y
                x = y
            if np.linalg.norm(x - previous) <= DYKSTRA_TOL * max(1.0, float(np.linalg.norm(x))):
                break
        return self.feasible(x)

    def feasible(self, w: np.ndarray) -> np.ndarray:
        """Shrink w toward zero until every constraint holds."""
        scale = 1.0
        for value, bound in (
            (self.ellipsoid.norm(w), 1.0),
            (float(np.abs(w).sum()), self.c),
            (float(np.linalg.norm(w)), self.d),
        ):
            if value > bound:
                scale = min(scale, bound / value)
        return w * scale if scale < 1.0 else w


def _half_step(constraints: ConstraintSet, w: np.ndarray, gradient: np.ndarray, tol: float) -> np.ndarray:
    """Maximize gradient'w over the constraint set by projected ascent."""
    gnorm = float(np.linalg.norm(gradient))
    if gnorm == 0.0:
        return w
    if constraints.l1_inscribed:
        vertex = constraints.l1_vertex(gradient)
        return vertex if float(np.dot(gradient, vertex)) >= float(np.dot(gradient, w)) else w
    step = STEP_SCALE * max(constraints.c, constraints.d) / gnorm
    value = float(np.dot(gradient, w))
    for _ in range(INNER_ITERS):
        trial_step = step
        for _ in range(BACKTRACKS):
            candidate = constraints.project(w + trial_step * gradient)
            candidate_value = float(np.dot(gradient, candidate))
            if candidate_value >= value:
                break
            trial_step /= 2.0
        else:
            return w
        moved = float(np.linalg.norm(candidate - w))
        improvement = candidate_value - value
        w, value = candidate, candidate_value
        if moved <= tol * max(1.0, float(np.linalg.norm(w))) or improvement <= tol * max(1.0, abs(value)) * 1e-3:
            break
    return w


def _power_start(xs: np.ndarray, ys: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(ys.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(POWER_ITERATIONS):
        u = xs.T @ (ys @ v)
        un = np.linalg.norm(u)
        if un == 0.0:
            break
        v = ys.T @ (xs @ (u / un))
        vn = np.linalg.norm(v)
        if vn == 0.0:
            raise DegenerateError("cross-covariance vanishes along the starting direction")
        v /= vn
    return v


def fit_cca(x, y) -> AlignmentPair:
    """Leading canonical pair from the top singular pair of S_xy."""
    xs, ys = _scaled_pair(x, y)
    p, q = xs.shape[1], ys.shape[1]
    if p * q <= DENSE_SVD_LIMIT:
        cross = xs.T @ ys
        if not np.any(cross):
            raise DegenerateError("cross-covariance matrix is zero; no canonical direction")
        left, _, right = np.linalg.svd(cross, full_matrices=False)
        a, b = left[:, 0], right[0]
    else:
        operator = LinearOperator(
            (p, q),
            matvec=lambda w: xs.T @ (ys @ np.ravel(w)),
            rmatvec=lambda w: ys.T @ (xs @ np.ravel(w)),
            dtype=np.float64,
        )
        v0 = np.full(min(p, q), 1.0 / math.sqrt(min(p, q)))
        left, s, right = svds(operator, k=1, v0=v0)
        if s[0] == 0.0:
            raise DegenerateError("cross-covariance matrix is zero; no canonical direction")
        a, b = left[:, 0], right[0]
    xa, yb = float(np.linalg.norm(xs @ a)), float(np.linalg.norm(ys @ b))
    if xa == 0.0 or yb == 0.0:
        raise DegenerateError("leading singular direction lies in the null space of the data")
    u, v = _sign_fix(a / xa, b / yb)
    objective = _objective(xs, ys, u, v)
    logger.info("CCA fit: canonical correlation %.4f", objective)
    return AlignmentPair(
        u=u, v=v, objective=objective, support_u=_support(u), support_v=_support(v), objective_trace=[objective]
    )


def fit_scca(x, y, params: SccaParams, init: str = "svd", seed: int = INIT_SEED) -> AlignmentPair:
    """Alternating maximization of <Xu, Yv> under elastic-net and variance bounds.

    Each half-step is a linear objective over a convex set; steps that would
    lower the objective are rejected, so the recorded trace never decreases.
    Returns the last iterate with converged=False after max_iters.
    """
    xs, ys = _scaled_pair(x, y)
    if init not in ("svd", "random"):
        raise DimensionError(f"unknown initialization {init!r}")
    u_set = ConstraintSet(xs, params.c1, params.d1)
    v_set = ConstraintSet(ys, params.c2, params.d2)

    if init == "svd":
        v = _power_start(xs, ys, np.random.default_rng(INIT_SEED))
    else:
        v = np.random.default_rng(seed).standard_normal(ys.shape[1])
    v = v_set.project(v / np.linalg.norm(v))
    u = np.zeros(xs.shape[1])

    trace = [_objective(xs, ys, u, v)]
    converged = False
    iterations = 0
    for iterations in range(1, params.max_iters + 1):
        u = _half_step(u_set, u, xs.T @ (ys @ v), params.tol)
        v = _half_step(v_set, v, ys.T @ (xs @ u), params.tol)
        objective = _objective(xs, ys, u, v)
        previous = trace[-1]
        trace.append(objective)
        logger.debug("scca iteration %d: objective %.8f", iterations, objective)
        if iterations > 1 and abs(objective - previous) <= params.tol * max(1.0, abs(previous)):
            converged = True
            break
    if not converged:
        logger.warning("Sparse CCA did not converge in %d iterations", params.max_iters)

    u, v = _sign_fix(u, v)
    objective = trace[-1]
    logger.info(
        "Sparse CCA fit (c1=%g, c2=%g): objective %.4f, |u|_0=%d, |v|_0=%d",
        params.c1, params.c2, objective, np.count_nonzero(u), np.count_nonzero(v),
    )
    return AlignmentPair(
        u=u,
        v=v,
        objective=objective,
        support_u=_support(u),
        support_v=_support(v),
        iterations=iterations,
        converged=converged,
        objective_trace=trace,
        params=params,
        init=init,
    )


def fit_alignment(x: FeatureMatrix, y: FeatureMatrix, params: Optional[SccaParams] = None, init: str = "svd", seed: int = INIT_SEED) -> AlignmentPair:
    """Standardize both modalities, fit, and keep the fitted standardizers."""
    if list(x.subject_ids) != list(y.subject_ids):
        raise DimensionError("x and y rows are not aligned by subject id")
    x_scaler, y_scaler = Standardizer.fit(x.data), Standardizer.fit(y.data)
    if x_scaler.columns.size == 0 or y_scaler.columns.size == 0:
        raise DegenerateError("a modality has no non-constant columns")
    xt, yt = x_scaler.transform(x.data), y_scaler.transform(y.data)
    pair = fit_cca(xt, yt) if params is None else fit_scca(xt, yt, params, init, seed)
    return pair.model_copy(update={"x_scaler": x_scaler, "y_scaler": y_scaler})


def project(m, w) -> np.ndarray:
    data = _as_array(m, "matrix")
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or data.shape[1] != w.shape[0]:
        raise DimensionError(f"matrix has {data.shape[1]} columns, alignment vector has {w.shape[0]} entries")
    return data @ w


def alignment_scores(pair: AlignmentPair, x, y) -> Tuple[np.ndarray, np.ndarray]:
    """Project raw rows after applying the training standardization."""
    xa, ya = _as_array(x, "x"), _as_array(y, "y")
    if pair.x_scaler is not None:
        xa = pair.x_scaler.transform(xa)
    if pair.y_scaler is not None:
        ya = pair.y_scaler.transform(ya)
    return project(xa, pair.u), project(ya, pair.v)


def canonical_correlation(sx, sy) -> float:
    sx = np.asarray(sx, dtype=np.float64)
    sy = np.asarray(sy, dtype=np.float64)
    if sx.shape != sy.shape or sx.ndim != 1:
        raise DimensionError(f"score vectors differ in shape: {sx.shape} vs {sy.shape}")
    if sx.shape[0] < 3:
        raise DimensionError("canonical correlation needs at least 3 scores")
    cx, cy = sx - sx.mean(), sy - sy.mean()
    nx, ny = float(np.sqrt(np.sum(cx ** 2))), float(np.sqrt(np.sum(cy ** 2)))
    if nx <= 1e-12 * max(1.0, float(np.abs(sx).max())) or ny <= 1e-12 * max(1.0, float(np.abs(sy).max())):
        raise DegenerateError("canonical correlation undefined for constant scores")
    return float(np.clip(np.sum(cx * cy) / (nx * ny), -1.0, 1.0))


def export_alignment(pair: AlignmentPair) -> AlignmentExport:
    def scaler_fields(prefix: str, scaler: Optional[Standardizer]):
        if scaler is None:
            return {}
        return {
            f"{prefix}_columns": scaler.columns.tolist(),
            f"{prefix}_mean": scaler.mean.tolist(),
            f"{prefix}_scale": scaler.scale.tolist(),
            f"{prefix}_features_in": scaler.n_features_in,
        }

    return AlignmentExport(
        support_u=pair.support_u,
        values_u=pair.u[pair.support_u].tolist(),
        support_v=pair.support_v,
        values_v=pair.v[pair.support_v].tolist(),
        n_features_x=pair.u.shape[0],
        n_features_y=pair.v.shape[0],
        objective=pair.objective,
        iterations=pair.iterations,
        converged=pair.converged,
        init=pair.init,
        params=pair.params,
        **scaler_fields("x", pair.x_scaler),
        **scaler_fields("y", pair.y_scaler),
    )


def import_alignment(export: AlignmentExport) -> AlignmentPair:
    def dense(size: int, support, values) -> np.ndarray:
        w = np.zeros(size)
        w[np.asarray(support, dtype=int)] = values
        return w

    def scaler(prefix: str) -> Optional[Standardizer]:
        columns = getattr(export, f"{prefix}_columns")
        if columns is None:
            return None
        return Standardizer(
            mean=np.asarray(getattr(export, f"{prefix}_mean")),
            scale=np.asarray(getattr(export, f"{prefix}_scale")),
            columns=np.asarray(columns, dtype=np.int64),
            n_features_in=getattr(export, f"{prefix}_features_in"),
        )

    return AlignmentPair(
        u=dense(export.n_features_x, export.support_u, export.values_u),
        v=dense(export.n_features_y, export.support_v, export.values_v),
        objective=export.objective,
        support_u=export.support_u,
        support_v=export.support_v,
        iterations=export.iterations,
        converged=export.converged,
        params=export.params,
        init=export.init,
        x_scaler=scaler("x"),
        y_scaler=scaler("y"),
    )
