"""Domain data types.

Array-holding types are frozen pydantic models; arrays are copied to float64
and marked read-only on validation so instances can be shared across threads.
"""
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from sfcorr.errors import DataError, DimensionError
from sfcorr.schemas import MetricTag, SccaParams


# Zero-variance threshold relative to the column/row magnitude
VARIANCE_EPS = 1e-12


def readonly(values, ndim: int, name: str, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    if arr.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


def first_non_finite(data: np.ndarray) -> Optional[Tuple[int, int]]:
    bad = np.argwhere(~np.isfinite(data))
    if bad.size == 0:
        return None
    return int(bad[0][0]), int(bad[0][1])


class FeatureMatrix(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray
    subject_ids: List[str]
    modality_tag: str = ""
    # Original column index of every retained column
    column_index: Optional[np.ndarray] = None
    dropped_columns: List[int] = Field(default_factory=list)

    @field_validator("data", mode="before")
    @classmethod
    def _coerce_data(cls, value):
        return readonly(value, 2, "feature matrix")

    @field_validator("column_index", mode="before")
    @classmethod
    def _coerce_index(cls, value):
        if value is None:
            return None
        return readonly(value, 1, "column index", dtype=np.int64)

    @model_validator(mode="after")
    def _check_invariants(self):
        cell = first_non_finite(self.data)
        if cell is not None:
            row, col = cell
            raise DataError(
                f"non-finite entry {self.data[row, col]!r} at row {row} "
                f"(subject {self.subject_ids[row] if row < len(self.subject_ids) else '?'}), column {col}"
            )
        if len(self.subject_ids) != self.data.shape[0]:
            raise DimensionError(
                f"{len(self.subject_ids)} subject ids for {self.data.shape[0]} rows"
            )
        if len(set(self.subject_ids)) != len(self.subject_ids):
            seen, dups = set(), []
            for sid in self.subject_ids:
                if sid in seen:
                    dups.append(sid)
                seen.add(sid)
            raise DataError(f"duplicate subject ids: {sorted(set(dups))}")
        if self.column_index is None:
            index = np.arange(self.data.shape[1], dtype=np.int64)
            index.setflags(write=False)
            object.__setattr__(self, "column_index", index)
        elif self.column_index.shape[0] != self.data.shape[1]:
            raise DimensionError("column manifest length does not match column count")
        return self

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def take_rows(self, rows) -> "FeatureMatrix":
        rows = np.asarray(rows, dtype=int)
        return FeatureMatrix(
            data=self.data[rows],
            subject_ids=[self.subject_ids[i] for i in rows],
            modality_tag=self.modality_tag,
            column_index=self.column_index,
            dropped_columns=list(self.dropped_columns),
        )

    def take_columns(self, cols) -> "FeatureMatrix":
        cols = np.asarray(cols, dtype=int)
        return FeatureMatrix(
            data=self.data[:, cols],
            subject_ids=list(self.subject_ids),
            modality_tag=self.modality_tag,
            column_index=self.column_index[cols],
            dropped_columns=list(self.dropped_columns),
        )


class PairedDataset(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: FeatureMatrix
    y: FeatureMatrix

    @model_validator(mode="after")
    def _check_alignment(self):
        if list(self.x.subject_ids) != list(self.y.subject_ids):
            raise DimensionError("x and y rows are not aligned by subject id")
        return self

    @property
    def n(self) -> int:
        return self.x.n


class RoiTimeSeries(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray
    fs: float = 1.0
    roi_labels: Optional[List[str]] = None

    @field_validator("data", mode="before")
    @classmethod
    def _coerce_data(cls, value):
        return readonly(value, 2, "time series")

    @model_validator(mode="after")
    def _check_invariants(self):
        if self.data.shape[0] < 3:
            raise DataError(f"time series needs at least 3 timepoints, got {self.data.shape[0]}")
        if not self.fs > 0:
            raise DataError(f"sampling frequency must be positive, got {self.fs}")
        cell = first_non_finite(self.data)
        if cell is not None:
            raise DataError(f"non-finite sample at timepoint {cell[0]}, ROI {cell[1]}")
        if self.roi_labels is not None and len(self.roi_labels) != self.data.shape[1]:
            raise DimensionError("ROI label count does not match column count")
        return self

    def with_data(self, data: np.ndarray) -> "RoiTimeSeries":
        return RoiTimeSeries(data=data, fs=self.fs, roi_labels=self.roi_labels)


class NuisanceMatrix(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray
    includes_intercept: bool = False

    @field_validator("data", mode="before")
    @classmethod
    def _coerce_data(cls, value):
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        return readonly(arr, 2, "nuisance matrix")

    @model_validator(mode="after")
    def _check_finite(self):
        cell = first_non_finite(self.data)
        if cell is not None:
            raise DataError(f"non-finite regressor value at timepoint {cell[0]}, column {cell[1]}")
        return self

    @classmethod
    def empty(cls, timepoints: int) -> "NuisanceMatrix":
        return cls(data=np.zeros((timepoints, 0)))


class BandpassSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    f_low: float = 0.08
    f_high: float = 0.15
    order: int = 1
    zero_phase: bool = True

    @model_validator(mode="after")
    def _check_band(self):
        if not 0 < self.f_low < self.f_high:
            raise DataError(f"band edges must satisfy 0 < low < high, got ({self.f_low}, {self.f_high})")
        if self.order < 1:
            raise DataError(f"filter order must be positive, got {self.order}")
        return self

    def check_against(self, fs: float) -> None:
        nyquist = fs / 2.0
        if self.f_high >= nyquist:
            raise DataError(f"upper band edge {self.f_high} Hz is at or beyond Nyquist ({nyquist} Hz)")


class DistanceMatrix(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray
    metric_tag: MetricTag
    subject_ids: List[str]

    @field_validator("data", mode="before")
    @classmethod
    def _coerce_data(cls, value):
        return readonly(value, 2, "distance matrix")

    @model_validator(mode="after")
    def _check_invariants(self):
        d = self.data
        n = d.shape[0]
        if d.shape != (n, n):
            raise DimensionError(f"distance matrix must be square, got {d.shape}")
        if len(self.subject_ids) != n:
            raise DimensionError(f"{len(self.subject_ids)} ids for a {n}x{n} distance matrix")
        if not np.all(np.isfinite(d)):
            raise DataError("distance matrix has non-finite entries")
        if np.any(np.diag(d) != 0.0):
            raise DataError("distance matrix diagonal must be exactly zero")
        if n and np.max(np.abs(d - d.T)) > 1e-12:
            raise DataError("distance matrix is not symmetric")
        if np.any(d < 0):
            raise DataError("distances must be nonnegative")
        if self.metric_tag == "pearson_correlation_distance" and np.any(d > 2.0):
            raise DataError("correlation distances must lie in [0, 2]")
        return self

    @property
    def n(self) -> int:
        return self.data.shape[0]


class Standardizer(BaseModel):
    """Column centering/scaling fitted on one set of rows, reusable on others."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mean: np.ndarray
    scale: np.ndarray
    # Retained column positions (into the matrix the standardizer was fitted on)
    columns: np.ndarray
    n_features_in: int

    @classmethod
    def fit(cls, data: np.ndarray) -> "Standardizer":
        data = np.asarray(data, dtype=np.float64)
        if data.shape[0] < 2:
            raise DimensionError("standardization needs at least 2 rows")
        mean = data.mean(axis=0)
        sd = data.std(axis=0, ddof=1)
        keep = sd > VARIANCE_EPS * np.maximum(1.0, np.abs(mean))
        columns = np.flatnonzero(keep)
        return cls(
            mean=readonly(mean[columns], 1, "mean"),
            scale=readonly(sd[columns], 1, "scale"),
            columns=readonly(columns, 1, "columns", dtype=np.int64),
            n_features_in=data.shape[1],
        )

    @property
    def dropped(self) -> List[int]:
        return sorted(set(range(self.n_features_in)) - set(self.columns.tolist()))

    def transform(self, data: np.ndarray) -> np.ndarray:
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[1] != self.n_features_in:
            raise DimensionError(
                f"expected {self.n_features_in} columns, got shape {data.shape}"
            )
        return (data[:, self.columns] - self.mean) / self.scale


class AlignmentPair(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    u: np.ndarray
    v: np.ndarray
    objective: float
    support_u: List[int]
    support_v: List[int]
    iterations: int = 0
    converged: bool = True
    objective_trace: List[float] = Field(default_factory=list)
    params: Optional[SccaParams] = None
    init: str = "svd"
    x_scaler: Optional[Standardizer] = None
    y_scaler: Optional[Standardizer] = None

    @field_validator("u", "v", mode="before")
    @classmethod
    def _coerce_vector(cls, value):
        return readonly(value, 1, "alignment vector")


class FeatureClustering(BaseModel):
    model_config = ConfigDict(frozen=True)

    feature_indices: List[int]
    labels: List[int]
    k: int
    linkage: Literal["complete"] = "complete"
    metric_tag: MetricTag
    # Dendrogram: (cluster a, cluster b, height, merged size); clusters are
    # named by their smallest member position
    merges: List[Tuple[int, int, float, int]] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_labels(self):
        if len(self.labels) != len(self.feature_indices):
            raise DimensionError("every selected feature needs a label")
        if self.labels and (min(self.labels) < 1 or max(self.labels) > self.k):
            raise DataError(f"labels must lie in 1..{self.k}")
        return self

    def members(self, label: int) -> List[int]:
        return [pos for pos, lab in enumerate(self.labels) if lab == label]


class CvReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    grid: List[Tuple[float, float]]
    fold_correlations: List[List[Optional[float]]]
    mean_validation: List[Optional[float]]
    selected: Tuple[float, float]
    train_correlation: float
    test_correlation: Optional[float] = None
    seed: int
    k: int
    failures: List[str] = Field(default_factory=list)
    fit: Optional[AlignmentPair] = Field(default=None, exclude=True)
