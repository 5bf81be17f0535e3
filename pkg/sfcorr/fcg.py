"""Functional correlation graph construction from ROI time series.

Pipeline per subject: OLS nuisance residualization, Butterworth bandpass,
pairwise Pearson correlation between ROIs, upper-triangle vectorization.
"""
import math
import os

import numpy as np
import pandas as pd
from scipy import linalg, signal

from sfcorr.errors import DataError, DegenerateError, DimensionError
from sfcorr.logger import getLogger
from sfcorr.models import VARIANCE_EPS, BandpassSpec, NuisanceMatrix, RoiTimeSeries

logger = getLogger(__name__)

# Envelope level that defines the effective impulse length of the filter
IMPULSE_DECAY = 1e-4
PAD_FACTOR = 3


def _read_numeric_csv(path: str, what: str) -> pd.DataFrame:
    if not os.path.isfile(path):
        raise DataError(f"{what} file not found: {path}")
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError, ValueError) as exc:
        raise DataError(f"cannot parse {what} file {path}: {exc}") from exc
    if frame.empty:
        raise DataError(f"{path}: {what} file has no samples")
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    bad = np.argwhere(~np.isfinite(numeric.to_numpy(dtype=np.float64)))
    if bad.size:
        row, col = int(bad[0][0]), int(bad[0][1])
        raise DataError(
            f"{path}: non-numeric or non-finite {what} value {frame.iat[row, col]!r} at row {row + 1}, "
            f"column {frame.columns[col]!r}"
        )
    return numeric


def load_timeseries(path: str, fs: float = 1.0) -> RoiTimeSeries:
    frame = _read_numeric_csv(path, "time series")
    return RoiTimeSeries(data=frame.to_numpy(dtype=np.float64), fs=fs, roi_labels=[str(c) for c in frame.columns])


def load_nuisance(path: str) -> NuisanceMatrix:
    return NuisanceMatrix(data=_read_numeric_csv(path, "nuisance").to_numpy(dtype=np.float64))


def ols_residualize(ts: RoiTimeSeries, nuisance: NuisanceMatrix) -> RoiTimeSeries:
    """Replace each ROI column by its OLS residual against [1 | nuisance]."""
    T = ts.data.shape[0]
    if nuisance.data.shape[0] != T:
        raise DimensionError(
            f"nuisance has {nuisance.data.shape[0]} timepoints, series has {T}"
        )
    if nuisance.includes_intercept:
        design = nuisance.data
        offset = 0
    else:
        design = np.column_stack([np.ones(T), nuisance.data])
        offset = 1
    if design.shape[1] > T:
        raise DegenerateError(f"{design.shape[1]} regressors exceed {T} timepoints")

    q, r, piv = linalg.qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(design.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < design.shape[1]:
        dependent = sorted(int(j) - offset for j in piv[rank:])
        raise DegenerateError(f"nuisance design is rank deficient; dependent columns: {dependent}")

    y = ts.data
    residual = y - q @ (q.T @ y)
    return ts.with_data(residual)


def design_bandpass(spec: BandpassSpec, fs: float) -> np.ndarray:
    """Digital Butterworth bandpass (bilinear transform, prewarped) as SOS."""
    spec.check_against(fs)
    return signal.butter(spec.order, [spec.f_low, spec.f_high], btype="bandpass", fs=fs, output="sos")


def impulse_length(sos: np.ndarray) -> int:
    """Samples until the slowest pole's envelope falls below IMPULSE_DECAY."""
    _, poles, _ = signal.sos2zpk(sos)
    radius = float(np.max(np.abs(poles)))
    if radius <= 0.0:
        return 1
    return int(math.ceil(math.log(IMPULSE_DECAY) / math.log(radius)))


def butterworth_bandpass(ts: RoiTimeSeries, spec: BandpassSpec) -> RoiTimeSeries:
    sos = design_bandpass(spec, ts.fs)
    T = ts.data.shape[0]
    padlen = min(PAD_FACTOR * impulse_length(sos), T - 1)
    if spec.zero_phase:
        filtered = signal.sosfiltfilt(sos, ts.data, axis=0, padtype="even", padlen=padlen)
    else:
        padded = np.pad(ts.data, ((padlen, padlen), (0, 0)), mode="reflect")
        filtered = signal.sosfilt(sos, padded, axis=0)[padlen : padlen + T]
    return ts.with_data(filtered)


def pearson_fcg(ts: RoiTimeSeries) -> np.ndarray:
    """Pairwise ROI correlations over (i < j), ordered lexicographically."""
    data = ts.data
    sd = data.std(axis=0)
    scale = np.maximum(1.0, np.abs(data).max(axis=0))
    flat = np.flatnonzero(~(sd > VARIANCE_EPS * scale))
    if flat.size:
        raise DegenerateError(f"ROI {int(flat[0])} has zero variance")
    corr = np.corrcoef(data, rowvar=False)
    iu = np.triu_indices(data.shape[1], k=1)
    return np.clip(corr[iu], -1.0, 1.0)


def motion_with_derivatives(motion) -> np.ndarray:
    """Rigid-body parameters plus their backward-difference derivatives."""
    motion = np.asarray(motion, dtype=np.float64)
    if motion.ndim != 2:
        raise DimensionError("motion parameters must be a (T x k) matrix")
    derivative = np.vstack([np.zeros((1, motion.shape[1])), np.diff(motion, axis=0)])
    return np.hstack([motion, derivative])


def white_matter_components(voxels, k: int = 3) -> np.ndarray:
    """Time courses of the top-k principal components of (T x V) voxel signals."""
    voxels = np.asarray(voxels, dtype=np.float64)
    if voxels.ndim != 2 or k > min(voxels.shape):
        raise DimensionError(f"cannot extract {k} components from shape {voxels.shape}")
    centered = voxels - voxels.mean(axis=0)
    u, s, _ = np.linalg.svd(centered, full_matrices=False)
    components = u[:, :k] * s[:k]
    # sign fix: largest-magnitude entry positive
    peaks = components[np.argmax(np.abs(components), axis=0), np.arange(k)]
    return components * np.where(peaks < 0, -1.0, 1.0)


def build_nuisance(global_signal, motion, wm_voxels, k: int = 3) -> NuisanceMatrix:
    global_signal = np.asarray(global_signal, dtype=np.float64).reshape(-1, 1)
    columns = [global_signal, motion_with_derivatives(motion), white_matter_components(wm_voxels, k)]
    lengths = {c.shape[0] for c in columns}
    if len(lengths) != 1:
        raise DimensionError(f"regressors disagree on timepoint count: {sorted(lengths)}")
    return NuisanceMatrix(data=np.hstack(columns))


def subject_fcg(ts: RoiTimeSeries, nuisance: NuisanceMatrix, spec: BandpassSpec) -> np.ndarray:
    residual = ols_residualize(ts, nuisance)
    filtered = butterworth_bandpass(residual, spec)
    return pearson_fcg(filtered)
