"""Report persistence: JSON results with provenance, and plot-ready CSV tables."""
import hashlib
import json
import math
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel

from sfcorr import __version__
from sfcorr.inference import significance_marker
from sfcorr.logger import getLogger
from sfcorr.models import AlignmentPair, CvReport, DistanceMatrix, FeatureClustering
from sfcorr.schemas import ConfidenceInterval, DcorResult, PermutationResult, Provenance, RunConfig, Table2Row

logger = getLogger(__name__)

DIGEST_BLOCK = 1 << 20


def file_digest(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(DIGEST_BLOCK), b""):
            digest.update(block)
    return digest.hexdigest()


def provenance(config: RunConfig, inputs: Iterable[Optional[str]] = ()) -> Provenance:
    digests = {path: file_digest(path) for path in inputs if path and os.path.isfile(path)}
    return Provenance(
        tool_version=__version__,
        command=config.command,
        seed=config.seed,
        config=config.model_dump(mode="json", exclude={"threads"}),
        input_digests=digests,
    )


def jsonable(value: Any) -> Any:
    """Plain JSON values; non-finite floats become null."""
    if isinstance(value, BaseModel):
        return jsonable(value.model_dump(mode="json"))
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, np.generic):
        return jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def write_json(path: str, result: Any, prov: Optional[Provenance] = None) -> str:
    payload = {"result": jsonable(result)}
    if prov is not None:
        payload["provenance"] = jsonable(prov)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    logger.info("Wrote %s", path)
    return path


def write_csv(path: str, frame: pd.DataFrame) -> str:
    frame.to_csv(path, index=False, float_format="%.17g", encoding="utf-8", lineterminator="\n")
    logger.info("Wrote %s", path)
    return path


# Distance tables

def distance_pairs_frame(dx: DistanceMatrix, dy: DistanceMatrix) -> pd.DataFrame:
    """One row per subject pair (i < j) with both distances, for scatter plots."""
    i, j = np.triu_indices(dx.n, k=1)
    ids = np.asarray(dx.subject_ids, dtype=object)
    return pd.DataFrame(
        {
            "subject_i": ids[i],
            "subject_j": ids[j],
            "d_x": dx.data[i, j],
            "d_y": dy.data[i, j],
        }
    )


def histogram_frame(values: Sequence[float], bins: int = 50, lower: Optional[float] = 0.0) -> pd.DataFrame:
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return pd.DataFrame({"bin_left": [], "bin_right": [], "count": []})
    lo = float(values.min()) if lower is None else min(lower, float(values.min()))
    hi = float(values.max())
    if hi <= lo:
        hi = lo + 1.0
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return pd.DataFrame({"bin_left": edges[:-1], "bin_right": edges[1:], "count": counts})


def distance_summary(d: DistanceMatrix) -> Dict[str, float]:
    tri = d.data[np.triu_indices(d.n, k=1)]
    return {
        "metric": d.metric_tag,
        "n_subjects": d.n,
        "n_pairs": int(tri.size),
        "mean": float(tri.mean()) if tri.size else float("nan"),
        "sd": float(tri.std(ddof=1)) if tri.size > 1 else float("nan"),
        "min": float(tri.min()) if tri.size else float("nan"),
        "max": float(tri.max()) if tri.size else float("nan"),
    }


def replicates_frame(values: Sequence[Optional[float]], observed: Optional[float] = None) -> pd.DataFrame:
    frame = pd.DataFrame({"replicate": np.arange(len(values)), "statistic": [np.nan if v is None else v for v in values]})
    if observed is not None:
        frame["observed"] = observed
    return frame


# Inference summary

def table2_rows(
    perm: Optional[PermutationResult] = None,
    dcor: Optional[DcorResult] = None,
    ci: Optional[ConfidenceInterval] = None,
) -> List[Table2Row]:
    rows = []
    if perm is not None:
        rows.append(
            Table2Row(
                method="Permutation test",
                correlation=perm.observed,
                result_type="p-value",
                result=f"{perm.p_value:.4g}",
                p_value=perm.p_value,
                marker=significance_marker(perm.p_value),
            )
        )
    if dcor is not None:
        rows.append(
            Table2Row(
                method="Distance correlation t-test",
                correlation=dcor.bias_corrected_r,
                result_type="p-value",
                result=f"{dcor.p_value:.4g}",
                p_value=dcor.p_value,
                marker=significance_marker(dcor.p_value),
            )
        )
    if ci is not None:
        rows.append(
            Table2Row(
                method="Subsampling",
                correlation=ci.point_estimate,
                result_type=f"{round(ci.level * 100):d}% CI ({ci.method})",
                result=f"({ci.lower:.3f}, {ci.upper:.3f})",
                interval=(ci.lower, ci.upper),
                marker=significance_marker(interval=(ci.lower, ci.upper)),
            )
        )
    return rows


# Alignment tables

def cv_surface_frame(report: CvReport) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "c1": [c[0] for c in report.grid],
            "c2": [c[1] for c in report.grid],
            "mean_validation": [np.nan if m is None else m for m in report.mean_validation],
        }
    )


def projection_frame(subject_ids: Sequence[str], sx, sy, split: str) -> pd.DataFrame:
    return pd.DataFrame({"subject": list(subject_ids), "split": split, "score_x": sx, "score_y": sy})


def _original_columns(pair: AlignmentPair, side: str, manifest: Optional[Sequence[int]]) -> np.ndarray:
    w = pair.u if side == "x" else pair.v
    scaler = pair.x_scaler if side == "x" else pair.y_scaler
    positions = np.arange(w.shape[0]) if scaler is None else scaler.columns
    if manifest is not None:
        positions = np.asarray(manifest)[positions]
    return positions


def selected_features_frame(pair: AlignmentPair, side: str, manifest: Optional[Sequence[int]] = None) -> pd.DataFrame:
    """Nonzero alignment weights keyed by the original column index."""
    w = pair.u if side == "x" else pair.v
    support = pair.support_u if side == "x" else pair.support_v
    columns = _original_columns(pair, side, manifest)
    return pd.DataFrame({"feature": columns[support], "weight": w[support]})


def selection_summary(pair: AlignmentPair, n_features_x: int, n_features_y: int) -> Dict[str, Any]:
    nx, ny = len(pair.support_u), len(pair.support_v)
    return {
        "selected_x": nx,
        "selected_y": ny,
        "percent_x": 100.0 * nx / n_features_x if n_features_x else 0.0,
        "percent_y": 100.0 * ny / n_features_y if n_features_y else 0.0,
    }


def cluster_members_frame(clustering: FeatureClustering) -> pd.DataFrame:
    return pd.DataFrame({"feature": clustering.feature_indices, "cluster": clustering.labels})
