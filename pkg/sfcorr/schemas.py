from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

from sfcorr.errors import ConfigError, DataError

MetricTag = Literal["scaled_euclidean", "pearson_correlation_distance", "euclidean"]

# Solver Schemas

class SccaParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    c1: float
    c2: float
    d1: float = 1.0
    d2: float = 1.0
    max_iters: int = 500
    tol: float = 1e-6

    @model_validator(mode="after")
    def _check_bounds(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise ConfigError(f"l1 bounds must be positive, got c1={self.c1}, c2={self.c2}")
        if not (self.d1 > 0 and self.d2 > 0):
            raise ConfigError(f"l2 bounds must be positive, got d1={self.d1}, d2={self.d2}")
        if not self.tol > 0:
            raise ConfigError(f"tolerance must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        return self


# Inference Schemas

class PermutationResult(BaseModel):
    observed: float
    n_permutations: int
    null_samples: List[float] = Field(repr=False)
    count_at_least: int
    p_value: float
    p_value_smoothed: float
    seed: int

    @model_validator(mode="after")
    def _check_consistency(self):
        if not -1.0 <= self.observed <= 1.0:
            raise DataError(f"observed statistic must lie in [-1, 1], got {self.observed}")
        if not 0.0 <= self.p_value <= 1.0:
            raise DataError(f"p-value must lie in [0, 1], got {self.p_value}")
        return self


class DcorResult(BaseModel):
    n: int
    bias_corrected_r: float
    # None when r = 1 and the statistic is unbounded
    t_statistic: Optional[float]
    degrees_of_freedom: int
    p_value: float

    @computed_field
    @property
    def perfect_dependence(self) -> bool:
        return self.t_statistic is None

    @field_validator("degrees_of_freedom")
    @classmethod
    def _positive_df(cls, value):
        if value < 1:
            raise DataError(f"degrees of freedom must be at least 1, got {value}")
        return value


class ConfidenceInterval(BaseModel):
    point_estimate: float
    lower: float
    upper: float
    level: float = 0.95
    subsample_ratio: float
    subsample_size: int
    n_subsamples: int
    method: Literal["root", "percentile"] = "root"
    bracketed: bool = False
    seed: int
    replicates: List[float] = Field(default_factory=list, repr=False)

    @field_validator("level")
    @classmethod
    def _check_level(cls, value):
        if not 0.0 < value < 1.0:
            raise ConfigError(f"confidence level must lie in (0, 1), got {value}")
        return value

    @property
    def excludes_zero(self) -> bool:
        return self.lower > 0.0 or self.upper < 0.0


class BootstrapResult(BaseModel):
    observed: float
    replicates: List[Optional[float]] = Field(repr=False)
    n_missing: int
    seed: int

    @property
    def valid(self) -> List[float]:
        return [r for r in self.replicates if r is not None]


class RatioChoice(BaseModel):
    sizes: List[int]
    distances: List[float]
    chosen_size: int
    chosen_ratio: float


class SubclusterPair(BaseModel):
    x_cluster: int
    y_cluster: int
    canonical_correlation: float
    x_size: int
    y_size: int


class SubclusterPairRanking(BaseModel):
    pairs: List[SubclusterPair]
    top_k_reported: int = 3
    notes: List[str] = Field(default_factory=list)

    @property
    def top(self) -> List[SubclusterPair]:
        return self.pairs[: self.top_k_reported]


# Synthetic Data Schemas

class PlantedTruth(BaseModel):
    kind: Literal["null", "shared-latent", "sparse-canonical-pair"]
    latent_correlation: float = 0.0
    u_star_support: Optional[List[int]] = None
    u_star_values: Optional[List[float]] = None
    v_star_support: Optional[List[int]] = None
    v_star_values: Optional[List[float]] = None
    signal_scale: Optional[float] = None
    seed: int


# Report Schemas

class Provenance(BaseModel):
    tool_version: str
    command: str
    seed: int
    config: Dict[str, Any]
    input_digests: Dict[str, str] = Field(default_factory=dict)


class Table2Row(BaseModel):
    method: str
    correlation: float
    result_type: str
    result: str
    p_value: Optional[float] = None
    interval: Optional[Tuple[float, float]] = None
    marker: str = ""


class AlignmentExport(BaseModel):
    support_u: List[int]
    values_u: List[float]
    support_v: List[int]
    values_v: List[float]
    n_features_x: int
    n_features_y: int
    objective: float
    iterations: int
    converged: bool
    init: str
    params: Optional[SccaParams] = None
    x_columns: Optional[List[int]] = None
    x_mean: Optional[List[float]] = None
    x_scale: Optional[List[float]] = None
    x_features_in: Optional[int] = None
    y_columns: Optional[List[int]] = None
    y_mean: Optional[List[float]] = None
    y_scale: Optional[List[float]] = None
    y_features_in: Optional[int] = None


class RunConfig(BaseModel):
    command: str = ""
    # inputs
    x: Optional[str] = None
    y: Optional[str] = None
    x_test: Optional[str] = None
    y_test: Optional[str] = None
    timeseries_dir: Optional[str] = None
    alignment: Optional[str] = None
    grid_file: Optional[str] = None
    output_dir: str = "out"
    format: Literal["csv", "bin"] = "csv"
    seed: int = Field(default=0, ge=0, lt=2**64)
    threads: int = 1
    # inference
    b: int = Field(default=10_000, ge=1)
    # "auto" picks the subsample size from the data
    ratio: Union[Literal["auto"], Annotated[float, Field(gt=0.0, le=1.0)]] = 0.135
    bracket_estimate: bool = False
    level: float = Field(default=0.95, gt=0.0, lt=1.0)
    method: Literal["root", "percentile"] = "root"
    metric_x: MetricTag = "scaled_euclidean"
    metric_y: MetricTag = "pearson_correlation_distance"
    bins: int = Field(default=50, ge=1)
    dump_replicates: bool = False
    stream: bool = False
    chunk_rows: int = Field(default=256, ge=1)
    scale_x: bool = False
    # sparse CCA and model selection
    k: int = Field(default=5, ge=2)
    grid_size: int = Field(default=8, ge=1)
    c1: Optional[float] = None
    c2: Optional[float] = None
    tol: float = Field(default=1e-6, gt=0.0)
    max_iters: int = Field(default=500, ge=1)
    init: Literal["svd", "random"] = "svd"
    # subclusters
    clusters: int = Field(default=5, ge=1)
    top: int = Field(default=3, ge=1)
    # functional connectivity
    fs: float = Field(default=1.0, gt=0.0)
    low: float = 0.08
    high: float = 0.15
    order: int = Field(default=1, ge=1)
    zero_phase: bool = True
    # synthetic generators
    n: int = Field(default=100, ge=4)
    p: int = Field(default=200, ge=1)
    q: int = Field(default=200, ge=1)
    strength: float = Field(default=0.8, ge=0.0, le=1.0)
    rho: float = Field(default=0.9, gt=0.0, lt=1.0)
    s_u: int = Field(default=10, ge=1)
    s_v: int = Field(default=10, ge=1)
    signal_scale: float = Field(default=2.0, gt=0.0)

    @field_validator("threads")
    @classmethod
    def _check_threads(cls, value):
        if value == 0 or value < -1:
            raise ValueError("threads must be a positive count or -1 (auto)")
        return value
