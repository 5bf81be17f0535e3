"""Command-line entrypoint.

    python -m sfcorr <command> [options]

Every command resolves a RunConfig (flags > --config file > SFCORR_*
environment > defaults), writes its outputs under --output-dir and embeds
the resolved config, seed and input digests in each JSON report. Failures
print {"detail": ..., "code": ...} to stderr and exit with status 1.
"""
import argparse
import json
import os
import sys
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from sfcorr import __version__
from sfcorr import reports
from sfcorr.config import logging_settings, resolve_config
from sfcorr.distances import METRICS, distance_matrix, distance_matrix_streamed, save_distance_matrix, upper_triangle
from sfcorr.errors import ConfigError, DataError, DimensionError, SfcorrError
from sfcorr.fcg import load_nuisance, load_timeseries, subject_fcg
from sfcorr.inference import (
    bootstrap_from_distances,
    choose_subsample_ratio,
    dcor_ttest,
    permutation_test,
    rank_correlations,
    subsample_ci_distances,
)
from sfcorr.logger import configure_logging, getLogger
from sfcorr.matrixio import infer_format, load_matrix, pair, save_matrix, scale_rows
from sfcorr.model_selection import (
    cv_grid_search,
    default_grid,
    evaluate_test,
    load_grid_file,
    train_test_split,
)
from sfcorr.models import BandpassSpec, DistanceMatrix, FeatureMatrix, PairedDataset
from sfcorr.scca import alignment_scores, export_alignment, fit_alignment, import_alignment
from sfcorr.schemas import AlignmentExport, PlantedTruth, RunConfig, SccaParams
from sfcorr.subcluster import complete_linkage, feature_distance_matrix, subcluster_cca
from sfcorr.synthgen import gen_null, gen_shared_latent, gen_sparse_canonical_pair
from sfcorr.workers import set_thread_cap

logger = getLogger(__name__)

TIMESERIES_FILE = "timeseries.csv"
NUISANCE_FILE = "nuisance.csv"


def parse_threads(value: str) -> int:
    if value == "auto":
        return -1
    try:
        return int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"threads must be a count or 'auto', got {value!r}")


def parse_ratio(value: str):
    if value == "auto":
        return value
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"ratio must be a fraction or 'auto', got {value!r}")


# Parser

def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="KEY=VALUE settings file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=parse_threads, default=None, help="worker count or 'auto'")
    parser.add_argument("--output-dir", dest="output_dir", default=None)
    parser.add_argument("--format", choices=("csv", "bin"), default=None, help="matrix output format")
    parser.add_argument("--log-level", dest="log_level", default=None)


def _pair_inputs(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--x", default=None, help="X-modality matrix (CSV or binary)")
    parser.add_argument("--y", default=None, help="Y-modality matrix (CSV or binary)")
    parser.add_argument("--metric-x", dest="metric_x", choices=METRICS, default=None)
    parser.add_argument("--metric-y", dest="metric_y", choices=METRICS, default=None)
    parser.add_argument(
        "--scale-x-rows", dest="scale_x", action="store_const", const=True, default=None,
        help="scale every X subject row to unit variance",
    )


def _inference_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--b", type=int, default=None, help="permutations / subsamples / resamples")
    parser.add_argument("--ratio", type=parse_ratio, default=None, help="subsample fraction of n or 'auto'")
    parser.add_argument(
        "--bracket-estimate", dest="bracket_estimate", action="store_const", const=True, default=None,
        help="widen the root interval to contain the point estimate",
    )
    parser.add_argument("--level", type=float, default=None)
    parser.add_argument("--method", choices=("root", "percentile"), default=None)
    parser.add_argument("--bins", type=int, default=None)
    parser.add_argument(
        "--dump-replicates", dest="dump_replicates", action="store_const", const=True, default=None
    )


def _solver_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--c1", type=float, default=None)
    parser.add_argument("--c2", type=float, default=None)
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument("--max-iters", dest="max_iters", type=int, default=None)
    parser.add_argument("--init", choices=("svd", "random"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sfcorr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"sfcorr {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    fcg = commands.add_parser("fcg", help="functional correlation graphs from ROI time series")
    _common(fcg)
    fcg.add_argument("--timeseries-dir", dest="timeseries_dir", default=None)
    fcg.add_argument("--fs", type=float, default=None, help="sampling frequency (Hz)")
    fcg.add_argument("--low", type=float, default=None)
    fcg.add_argument("--high", type=float, default=None)
    fcg.add_argument("--order", type=int, default=None)
    fcg.add_argument("--causal", dest="zero_phase", action="store_const", const=False, default=None)

    dist = commands.add_parser("dist", help="distance matrices, histograms and pair tables")
    _common(dist)
    _pair_inputs(dist)
    dist.add_argument("--bins", type=int, default=None)
    dist.add_argument(
        "--stream", action="store_const", const=True, default=None, help="row-chunked distances over binary inputs"
    )
    dist.add_argument("--chunk-rows", dest="chunk_rows", type=int, default=None)

    infer = commands.add_parser("infer", help="inference on the distance correlation")
    infer_kinds = infer.add_subparsers(dest="kind", required=True)
    for kind in ("perm", "dcor", "subsample", "bootstrap"):
        sub = infer_kinds.add_parser(kind)
        _common(sub)
        _pair_inputs(sub)
        _inference_options(sub)

    scca = commands.add_parser("scca", help="sparse canonical correlation analysis")
    scca_kinds = scca.add_subparsers(dest="kind", required=True)
    fit = scca_kinds.add_parser("fit")
    _common(fit)
    _pair_inputs(fit)
    _solver_options(fit)
    cv = scca_kinds.add_parser("cv")
    _common(cv)
    _pair_inputs(cv)
    _solver_options(cv)
    cv.add_argument("--x-test", dest="x_test", default=None)
    cv.add_argument("--y-test", dest="y_test", default=None)
    cv.add_argument("--grid-file", dest="grid_file", default=None)
    cv.add_argument("--grid-size", dest="grid_size", type=int, default=None)
    cv.add_argument("--k", type=int, default=None)
    ev = scca_kinds.add_parser("eval")
    _common(ev)
    ev.add_argument("--alignment", default=None)
    ev.add_argument("--x-test", dest="x_test", default=None)
    ev.add_argument("--y-test", dest="y_test", default=None)

    sub = commands.add_parser("subcluster", help="subclusters of the selected features")
    _common(sub)
    _pair_inputs(sub)
    sub.add_argument("--alignment", default=None)
    sub.add_argument("--clusters", "--k", dest="clusters", type=int, default=None)
    sub.add_argument("--top", type=int, default=None)

    synth = commands.add_parser("synth", help="synthetic paired datasets")
    synth_kinds = synth.add_subparsers(dest="kind", required=True)
    for kind in ("null", "latent", "planted"):
        gen = synth_kinds.add_parser(kind)
        _common(gen)
        gen.add_argument("--n", type=int, default=None)
        gen.add_argument("--p", type=int, default=None)
        gen.add_argument("--q", type=int, default=None)
        if kind == "latent":
            gen.add_argument("--strength", type=float, default=None)
        if kind == "planted":
            gen.add_argument("--rho", type=float, default=None)
            gen.add_argument("--s-u", dest="s_u", type=int, default=None)
            gen.add_argument("--s-v", dest="s_v", type=int, default=None)
            gen.add_argument("--signal-scale", dest="signal_scale", type=float, default=None)

    report = commands.add_parser("report", help="permutation, dCor and subsampling summary")
    _common(report)
    _pair_inputs(report)
    _inference_options(report)
    return parser


# Helpers

def _require(path: Optional[str], flag: str) -> str:
    if not path:
        raise ConfigError(f"{flag} is required")
    if not os.path.exists(path):
        raise ConfigError(f"{flag}: path not found: {path}")
    return path


def _out(config: RunConfig, name: str) -> str:
    return os.path.join(reports.ensure_dir(config.output_dir), name)


def _load_pair(config: RunConfig, x_path: Optional[str], y_path: Optional[str], x_flag="--x", y_flag="--y") -> PairedDataset:
    x = load_matrix(_require(x_path, x_flag), modality_tag="x")
    y = load_matrix(_require(y_path, y_flag), modality_tag="y")
    if config.scale_x:
        x = scale_rows(x)
    return pair(x, y)


def _distances(config: RunConfig, data: PairedDataset):
    return distance_matrix(data.x, config.metric_x), distance_matrix(data.y, config.metric_y)


def _align_distances(dx: DistanceMatrix, dy: DistanceMatrix) -> DistanceMatrix:
    """Reorder dy's subjects to dx's order."""
    if set(dx.subject_ids) != set(dy.subject_ids):
        diff = sorted(set(dx.subject_ids).symmetric_difference(dy.subject_ids))
        raise DimensionError(f"subject ids differ between modalities: {diff}")
    if list(dx.subject_ids) == list(dy.subject_ids):
        return dy
    position = {sid: i for i, sid in enumerate(dy.subject_ids)}
    order = [position[sid] for sid in dx.subject_ids]
    return DistanceMatrix(data=dy.data[np.ix_(order, order)], metric_tag=dy.metric_tag, subject_ids=list(dx.subject_ids))


def _streamed_distances(config: RunConfig):
    if config.scale_x:
        raise ConfigError("--scale-x-rows cannot be combined with --stream")
    paths = []
    for path, flag in ((config.x, "--x"), (config.y, "--y")):
        _require(path, flag)
        if infer_format(path) != "bin":
            raise ConfigError(f"{flag}: --stream needs a binary matrix file, got {path}")
        paths.append(path)
    dx = distance_matrix_streamed(paths[0], config.metric_x, config.chunk_rows)
    dy = distance_matrix_streamed(paths[1], config.metric_y, config.chunk_rows)
    return dx, _align_distances(dx, dy)


def _subsample_interval(config: RunConfig, dx: DistanceMatrix, dy: DistanceMatrix):
    """Interval at the configured ratio, or at the data-driven one for 'auto'."""
    choice = None
    ratio = config.ratio
    if ratio == "auto":
        choice = choose_subsample_ratio(dx, dy, b=config.b, seed=config.seed)
        ratio = choice.chosen_ratio
    ci = subsample_ci_distances(
        dx, dy, ratio, config.b, config.level, config.seed, config.method, bracket_estimate=config.bracket_estimate
    )
    return ci, choice


def _replicate_summary(values: List[Optional[float]]) -> Dict[str, Any]:
    valid = np.asarray([v for v in values if v is not None], dtype=np.float64)
    if valid.size == 0:
        return {"count": 0}
    return {
        "count": int(valid.size),
        "mean": float(valid.mean()),
        "sd": float(valid.std(ddof=1)) if valid.size > 1 else 0.0,
        "q025": float(np.quantile(valid, 0.025)),
        "median": float(np.median(valid)),
        "q975": float(np.quantile(valid, 0.975)),
    }


def _matrix_name(config: RunConfig, stem: str) -> str:
    return _out(config, f"{stem}.{config.format}")


# Commands

def run_fcg(config: RunConfig) -> Dict[str, Any]:
    root = _require(config.timeseries_dir, "--timeseries-dir")
    subjects = sorted(e for e in os.listdir(root) if os.path.isdir(os.path.join(root, e)))
    if not subjects:
        raise DataError(f"no subject directories under {root}")
    spec = BandpassSpec(f_low=config.low, f_high=config.high, order=config.order, zero_phase=config.zero_phase)
    rows, inputs = [], []
    for subject in subjects:
        ts_path = os.path.join(root, subject, TIMESERIES_FILE)
        nuisance_path = os.path.join(root, subject, NUISANCE_FILE)
        for path in (ts_path, nuisance_path):
            if not os.path.isfile(path):
                raise DataError(f"subject {subject}: missing {os.path.basename(path)} ({path})")
        try:
            fcg = subject_fcg(load_timeseries(ts_path, config.fs), load_nuisance(nuisance_path), spec)
        except SfcorrError as exc:
            raise type(exc)(f"subject {subject}: {exc.detail}") from exc
        if rows and fcg.shape != rows[0].shape:
            raise DimensionError(f"subject {subject}: ROI count differs from {subjects[0]}")
        rows.append(fcg)
        inputs += [ts_path, nuisance_path]
        logger.info("Built FCG for subject %s", subject)
    matrix = FeatureMatrix(data=np.vstack(rows), subject_ids=subjects, modality_tag="fcg")
    path = save_matrix(matrix, _matrix_name(config, "fcg"), config.format)
    summary = {"output": path, "n_subjects": matrix.n, "n_features": matrix.d}
    reports.write_json(_out(config, "fcg.json"), summary, reports.provenance(config, inputs))
    return summary


def run_distance_report(config: RunConfig) -> Dict[str, Any]:
    if config.stream:
        dx, dy = _streamed_distances(config)
    else:
        dx, dy = _distances(config, _load_pair(config, config.x, config.y))
    save_distance_matrix(dx, _out(config, "dist_x.bin"))
    save_distance_matrix(dy, _out(config, "dist_y.bin"))
    reports.write_csv(_out(config, "distance_pairs.csv"), reports.distance_pairs_frame(dx, dy))
    reports.write_csv(_out(config, "histogram_x.csv"), reports.histogram_frame(upper_triangle(dx), config.bins))
    reports.write_csv(_out(config, "histogram_y.csv"), reports.histogram_frame(upper_triangle(dy), config.bins))
    summary = {"x": reports.distance_summary(dx), "y": reports.distance_summary(dy)}
    reports.write_json(_out(config, "distances.json"), summary, reports.provenance(config, [config.x, config.y]))
    return summary


def _dump(config: RunConfig, stem: str, values, observed: Optional[float]) -> None:
    if config.dump_replicates:
        reports.write_csv(_out(config, f"{stem}_replicates.csv"), reports.replicates_frame(values, observed))
        valid = [v for v in values if v is not None]
        reports.write_csv(_out(config, f"{stem}_histogram.csv"), reports.histogram_frame(valid, config.bins, None))


def run_inference(config: RunConfig, kind: str) -> Dict[str, Any]:
    data = _load_pair(config, config.x, config.y)
    prov = reports.provenance(config, [config.x, config.y])
    if kind == "dcor":
        result = dcor_ttest(data.x, data.y)
        payload = {"observed": result.bias_corrected_r, "p_value": result.p_value, "dcor": result}
        reports.write_json(_out(config, "dcor.json"), payload, prov)
        return payload

    dx, dy = _distances(config, data)
    if kind == "perm":
        result = permutation_test(dx, dy, config.b, config.seed)
        spearman, kendall = rank_correlations(dx, dy)
        payload = {
            "observed": result.observed,
            "p_value": result.p_value,
            "p_value_smoothed": result.p_value_smoothed,
            "count_at_least": result.count_at_least,
            "n_permutations": result.n_permutations,
            "spearman": spearman,
            "kendall": kendall,
            "replicate_summary": _replicate_summary(result.null_samples),
        }
        _dump(config, "permutation", result.null_samples, result.observed)
    elif kind == "subsample":
        ci, choice = _subsample_interval(config, dx, dy)
        payload = {
            "observed": ci.point_estimate,
            "ci": ci.model_dump(mode="json", exclude={"replicates"}),
            "ratio_choice": choice,
            "excludes_zero": ci.excludes_zero,
            "replicate_summary": _replicate_summary(ci.replicates),
        }
        _dump(config, "subsample", ci.replicates, ci.point_estimate)
    elif kind == "bootstrap":
        boot = bootstrap_from_distances(dx, dy, config.b, config.seed)
        payload = {
            "observed": boot.observed,
            "n_missing": boot.n_missing,
            "replicate_summary": _replicate_summary(boot.replicates),
        }
        _dump(config, "bootstrap", boot.replicates, boot.observed)
    else:
        raise ConfigError(f"unknown inference kind {kind!r}")
    reports.write_json(_out(config, f"{kind}.json"), payload, prov)
    return payload


def _write_alignment_outputs(config: RunConfig, fit, data: PairedDataset) -> None:
    reports.write_json(_out(config, "alignment.json"), export_alignment(fit), reports.provenance(config, [config.x, config.y]))
    reports.write_csv(_out(config, "selected_x.csv"), reports.selected_features_frame(fit, "x", data.x.column_index))
    reports.write_csv(_out(config, "selected_y.csv"), reports.selected_features_frame(fit, "y", data.y.column_index))


def run_scca_fit(config: RunConfig) -> Dict[str, Any]:
    data = _load_pair(config, config.x, config.y)
    params = None
    if config.c1 is not None or config.c2 is not None:
        if config.c1 is None or config.c2 is None:
            raise ConfigError("--c1 and --c2 must be given together")
        params = SccaParams(c1=config.c1, c2=config.c2, tol=config.tol, max_iters=config.max_iters)
    fit = fit_alignment(data.x, data.y, params, config.init, config.seed)
    _write_alignment_outputs(config, fit, data)
    summary = {"objective": fit.objective, "converged": fit.converged, "iterations": fit.iterations}
    summary.update(reports.selection_summary(fit, data.x.d, data.y.d))
    return summary


def run_scca(config: RunConfig) -> Dict[str, Any]:
    """Split, cross-validate, refit and evaluate on the held-out subjects."""
    data = _load_pair(config, config.x, config.y)
    inputs = [config.x, config.y]
    if config.x_test or config.y_test:
        train = data
        test = _load_pair(config, config.x_test, config.y_test, "--x-test", "--y-test")
        inputs += [config.x_test, config.y_test]
    else:
        train_idx, test_idx = train_test_split(data.n, config.seed)
        train = PairedDataset(x=data.x.take_rows(train_idx), y=data.y.take_rows(train_idx))
        test = PairedDataset(x=data.x.take_rows(test_idx), y=data.y.take_rows(test_idx))
    if config.grid_file:
        grid = load_grid_file(_require(config.grid_file, "--grid-file"), config.tol, config.max_iters)
        inputs.append(config.grid_file)
    elif config.c1 is not None and config.c2 is not None:
        grid = [SccaParams(c1=config.c1, c2=config.c2, tol=config.tol, max_iters=config.max_iters)]
    else:
        grid = default_grid(train.x.d, train.y.d, config.grid_size, config.tol, config.max_iters)

    report = cv_grid_search(train.x, train.y, grid, config.k, config.seed, config.init)
    test_corr = evaluate_test(report.fit, test.x, test.y)
    report = report.model_copy(update={"test_correlation": test_corr})
    prov = reports.provenance(config, inputs)

    reports.write_json(_out(config, "cv_report.json"), report, prov)
    reports.write_csv(_out(config, "cv_surface.csv"), reports.cv_surface_frame(report))
    _write_alignment_outputs(config, report.fit, train)
    train_scores = alignment_scores(report.fit, train.x.data, train.y.data)
    test_scores = alignment_scores(report.fit, test.x.data, test.y.data)
    frame = reports.projection_frame(train.x.subject_ids, *train_scores, "train")
    frame = pd.concat(
        [frame, reports.projection_frame(test.x.subject_ids, *test_scores, "test")], ignore_index=True
    )
    reports.write_csv(_out(config, "projections.csv"), frame)

    summary = {
        "selected": report.selected,
        "train_correlation": report.train_correlation,
        "test_correlation": test_corr,
        "n_train": train.n,
        "n_test": test.n,
    }
    summary.update(reports.selection_summary(report.fit, train.x.d, train.y.d))
    reports.write_json(_out(config, "scca_summary.json"), summary, prov)
    return summary


def _load_alignment(path: str):
    with open(_require(path, "--alignment"), encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise DataError(f"cannot parse alignment file {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise DataError(f"{path}: alignment file must hold a JSON object")
    try:
        export = AlignmentExport.model_validate(payload.get("result", payload))
    except ValidationError as exc:
        raise DataError(f"{path}: not an alignment export ({exc.error_count()} problem(s))") from exc
    return import_alignment(export)


def run_scca_eval(config: RunConfig) -> Dict[str, Any]:
    fit = _load_alignment(config.alignment)
    test = _load_pair(config, config.x_test, config.y_test, "--x-test", "--y-test")
    corr = evaluate_test(fit, test.x, test.y)
    payload = {"test_correlation": corr, "n_test": test.n}
    reports.write_json(
        _out(config, "evaluation.json"), payload, reports.provenance(config, [config.alignment, config.x_test, config.y_test])
    )
    return payload


def _selected_columns(fit, side: str, matrix: FeatureMatrix) -> FeatureMatrix:
    scaler = fit.x_scaler if side == "x" else fit.y_scaler
    support = fit.support_u if side == "x" else fit.support_v
    positions = np.asarray(support, dtype=int) if scaler is None else scaler.columns[support]
    if positions.size < 2:
        raise DimensionError(f"{side}: at least 2 selected features are needed for subclusters")
    return matrix.take_columns(positions)


def run_subcluster(config: RunConfig) -> Dict[str, Any]:
    fit = _load_alignment(config.alignment)
    data = _load_pair(config, config.x, config.y)
    x_sel = _selected_columns(fit, "x", data.x)
    y_sel = _selected_columns(fit, "y", data.y)
    clusterings = []
    for side, sel, metric in (("x", x_sel, config.metric_x), ("y", y_sel, config.metric_y)):
        k = min(config.clusters, sel.d)
        if k < config.clusters:
            logger.warning("%s: only %d selected features, clustering into %d", side, sel.d, k)
        clustering = complete_linkage(feature_distance_matrix(sel, metric), k, sel.column_index.tolist())
        reports.write_csv(_out(config, f"clusters_{side}.csv"), reports.cluster_members_frame(clustering))
        clusterings.append(clustering)
    ranking = subcluster_cca(x_sel, y_sel, clusterings[0], clusterings[1], config.top)
    payload = {"ranking": ranking, "top": ranking.top}
    reports.write_json(
        _out(config, "subclusters.json"), payload, reports.provenance(config, [config.alignment, config.x, config.y])
    )
    return {"top": [p.model_dump() for p in ranking.top], "n_pairs": len(ranking.pairs)}


def run_synth(config: RunConfig, kind: str) -> Dict[str, Any]:
    truth = PlantedTruth(kind="null", seed=config.seed)
    if kind == "null":
        data = gen_null(config.n, config.p, config.q, config.seed)
    elif kind == "latent":
        data, truth = gen_shared_latent(config.n, config.p, config.q, config.strength, config.seed)
    elif kind == "planted":
        data, truth = gen_sparse_canonical_pair(
            config.n, config.p, config.q, config.s_u, config.s_v, config.rho, config.seed, config.signal_scale
        )
    else:
        raise ConfigError(f"unknown generator {kind!r}")
    x_path = save_matrix(data.x, _matrix_name(config, "x"), config.format)
    y_path = save_matrix(data.y, _matrix_name(config, "y"), config.format)
    payload = {"x": x_path, "y": y_path, "truth": truth}
    reports.write_json(_out(config, "truth.json"), payload, reports.provenance(config))
    return {"x": x_path, "y": y_path, "kind": kind}


def run_report(config: RunConfig) -> Dict[str, Any]:
    """Permutation test, dCor t-test and subsampling interval in one table."""
    data = _load_pair(config, config.x, config.y)
    dx, dy = _distances(config, data)
    perm = permutation_test(dx, dy, config.b, config.seed)
    dcor = dcor_ttest(data.x, data.y)
    ci, choice = _subsample_interval(config, dx, dy)
    spearman, kendall = rank_correlations(dx, dy)
    rows = reports.table2_rows(perm, dcor, ci)
    payload = {
        "rows": rows,
        "rank_correlations": {"spearman": spearman, "kendall": kendall},
        "permutation": perm.model_dump(mode="json", exclude={"null_samples"}),
        "dcor": dcor,
        "subsampling": ci.model_dump(mode="json", exclude={"replicates"}),
        "ratio_choice": choice,
    }
    reports.write_json(_out(config, "table2.json"), payload, reports.provenance(config, [config.x, config.y]))
    _dump(config, "permutation", perm.null_samples, perm.observed)
    return {"rows": [r.model_dump(mode="json") for r in rows]}


def _dispatch(command: str, kind: Optional[str]) -> Callable[[RunConfig], Dict[str, Any]]:
    table: Dict[str, Callable[[RunConfig], Dict[str, Any]]] = {
        "fcg": run_fcg,
        "dist": run_distance_report,
        "infer": lambda c: run_inference(c, kind),
        "scca fit": run_scca_fit,
        "scca cv": run_scca,
        "scca eval": run_scca_eval,
        "subcluster": run_subcluster,
        "synth": lambda c: run_synth(c, kind),
        "report": run_report,
    }
    key = f"{command} {kind}" if command == "scca" else command
    return table[key]


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    values = vars(args)
    command, kind = values.pop("command"), values.pop("kind", None)
    config_file = values.pop("config", None)
    log_level = values.pop("log_level", None)
    try:
        settings = logging_settings(config_file)
        configure_logging(
            log_level or settings["level"], settings["log_file"], settings["syslog_host"], settings["syslog_port"]
        )
        label = f"{command} {kind}" if kind else command
        config = resolve_config({**values, "command": label}, config_file)
        set_thread_cap(config.threads)
        logger.info("Running %s (seed %d)", label, config.seed)
        summary = _dispatch(command, kind)(config)
    except SfcorrError as exc:
        logger.error("%s failed: %s", command, exc.detail)
        sys.stderr.write(json.dumps(exc.to_dict()) + "\n")
        return 1
    sys.stdout.write(json.dumps(reports.jsonable(summary), sort_keys=True, allow_nan=False) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
