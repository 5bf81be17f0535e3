"""Loading, saving, pairing and scaling of per-subject feature matrices.

Two on-disk formats are supported:

* CSV: header row required, first column ``id``, remaining columns numeric.
* Binary: magic ``HDPR1\\0``, u64 LE row count, u64 LE column count,
  row-major f64 LE payload, then a u64 LE byte length followed by the
  newline-separated UTF-8 subject ids.
"""
import os
from typing import Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd

from sfcorr.errors import DataError, DegenerateError, DimensionError
from sfcorr.logger import getLogger
from sfcorr.models import VARIANCE_EPS, FeatureMatrix, PairedDataset, Standardizer

logger = getLogger(__name__)

MAGIC = b"HDPR1\x00"
HEADER_BYTES = len(MAGIC) + 16
FORMATS = ("csv", "bin")


def infer_format(path: str, fmt: Optional[str] = None) -> str:
    if fmt is not None:
        if fmt not in FORMATS:
            raise DataError(f"unknown matrix format {fmt!r}; expected one of {FORMATS}")
        return fmt
    return "bin" if str(path).endswith((".bin", ".hdpr")) else "csv"


def _load_csv(path: str, modality_tag: str) -> FeatureMatrix:
    try:
        frame = pd.read_csv(path, dtype={"id": str}, encoding="utf-8", float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError, ValueError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    if frame.columns.empty or frame.columns[0] != "id":
        raise DataError(f"{path}: first header column must be 'id'")
    missing_ids = np.flatnonzero(frame["id"].isna().to_numpy())
    if missing_ids.size:
        raise DataError(f"{path}: missing subject id at row {int(missing_ids[0]) + 1}")
    values = frame.iloc[:, 1:]
    numeric = values.apply(pd.to_numeric, errors="coerce")
    unparsed = np.argwhere((numeric.isna() & values.notna()).to_numpy())
    if unparsed.size:
        row, col = int(unparsed[0][0]), int(unparsed[0][1])
        raise DataError(
            f"{path}: non-numeric feature value {values.iat[row, col]!r} at row {row + 1}, "
            f"column {values.columns[col]!r}"
        )
    data = numeric.to_numpy(dtype=np.float64)
    bad = np.argwhere(~np.isfinite(data))
    if bad.size:
        row, col = int(bad[0][0]), int(bad[0][1])
        raise DataError(
            f"{path}: non-finite value {float(data[row, col])!r} at row {row + 1}, "
            f"column {values.columns[col]!r}"
        )
    return FeatureMatrix(
        data=data, subject_ids=frame["id"].tolist(), modality_tag=modality_tag
    )


def _read_header(buffer: bytes, path: str) -> Tuple[int, int]:
    if len(buffer) < HEADER_BYTES or buffer[: len(MAGIC)] != MAGIC:
        raise DataError(f"{path}: missing binary matrix magic")
    rows, cols = np.frombuffer(buffer, dtype="<u8", count=2, offset=len(MAGIC))
    return int(rows), int(cols)


def _load_bin(path: str, modality_tag: str) -> FeatureMatrix:
    with open(path, "rb") as fh:
        buffer = fh.read()
    rows, cols = _read_header(buffer, path)
    payload_end = HEADER_BYTES + 8 * rows * cols
    if len(buffer) < payload_end + 8:
        raise DataError(f"{path}: truncated payload")
    data = np.frombuffer(buffer, dtype="<f8", count=rows * cols, offset=HEADER_BYTES)
    (id_bytes,) = np.frombuffer(buffer, dtype="<u8", count=1, offset=payload_end)
    id_block = buffer[payload_end + 8 : payload_end + 8 + int(id_bytes)]
    if len(id_block) != int(id_bytes):
        raise DataError(f"{path}: truncated subject id block")
    try:
        ids = id_block.decode("utf-8").split("\n") if rows else []
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: subject ids are not valid UTF-8") from exc
    return FeatureMatrix(
        data=data.reshape(rows, cols).astype(np.float64),
        subject_ids=ids,
        modality_tag=modality_tag,
    )


def load_matrix(path: str, fmt: Optional[str] = None, modality_tag: str = "") -> FeatureMatrix:
    if not os.path.isfile(path):
        raise DataError(f"matrix file not found: {path}")
    fmt = infer_format(path, fmt)
    matrix = _load_csv(path, modality_tag) if fmt == "csv" else _load_bin(path, modality_tag)
    logger.info("Loaded %s matrix %s (%d x %d)", fmt, path, matrix.n, matrix.d)
    return matrix


def save_matrix(matrix: FeatureMatrix, path: str, fmt: Optional[str] = None) -> str:
    fmt = infer_format(path, fmt)
    if fmt == "csv":
        frame = pd.DataFrame(
            matrix.data, columns=[f"f{j}" for j in matrix.column_index.tolist()]
        )
        frame.insert(0, "id", matrix.subject_ids)
        frame.to_csv(path, index=False, float_format="%.17g", encoding="utf-8", lineterminator="\n")
    else:
        ids = "\n".join(matrix.subject_ids).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(np.array([matrix.n, matrix.d], dtype="<u8").tobytes())
            fh.write(np.ascontiguousarray(matrix.data, dtype="<f8").tobytes(order="C"))
            fh.write(np.array([len(ids)], dtype="<u8").tobytes())
            fh.write(ids)
    return path


def read_subject_ids(path: str) -> List[str]:
    with open(path, "rb") as fh:
        buffer = fh.read()
    rows, cols = _read_header(buffer, path)
    payload_end = HEADER_BYTES + 8 * rows * cols
    (id_bytes,) = np.frombuffer(buffer, dtype="<u8", count=1, offset=payload_end)
    block = buffer[payload_end + 8 : payload_end + 8 + int(id_bytes)]
    return block.decode("utf-8").split("\n") if rows else []


def iter_row_chunks(path: str, rows: int = 256) -> Iterator[Tuple[int, np.ndarray]]:
    """Yield (first row index, block) pairs from a binary matrix via memmap."""
    if rows < 1:
        raise DataError("chunk size must be positive")
    with open(path, "rb") as fh:
        header = fh.read(HEADER_BYTES)
    n, d = _read_header(header, path)
    mapped = np.memmap(path, dtype="<f8", mode="r", offset=HEADER_BYTES, shape=(n, d))
    for start in range(0, n, rows):
        yield start, np.array(mapped[start : start + rows], dtype=np.float64)


def pair(x: FeatureMatrix, y: FeatureMatrix) -> PairedDataset:
    """Align y's rows to x's subject order."""
    x_ids, y_ids = set(x.subject_ids), set(y.subject_ids)
    if x_ids != y_ids:
        diff = sorted(x_ids.symmetric_difference(y_ids))
        raise DimensionError(f"subject ids differ between modalities: {diff}")
    position = {sid: i for i, sid in enumerate(y.subject_ids)}
    order = [position[sid] for sid in x.subject_ids]
    if order != list(range(y.n)):
        y = y.take_rows(order)
    return PairedDataset(x=x, y=y)


def scale_to_unit_variance(row) -> np.ndarray:
    """Divide by the population standard deviation of the entries."""
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1 or row.shape[0] < 2:
        raise DataError("unit-variance scaling needs a vector of length >= 2")
    sd = row.std()
    if not sd > VARIANCE_EPS * max(1.0, float(np.abs(row).max())):
        raise DegenerateError("cannot scale a zero-variance vector")
    return row / sd


def scale_rows(matrix: FeatureMatrix) -> FeatureMatrix:
    """Per-subject unit-variance scaling of every row."""
    scaled = np.empty_like(matrix.data)
    for i in range(matrix.n):
        try:
            scaled[i] = scale_to_unit_variance(matrix.data[i])
        except DegenerateError as exc:
            raise DegenerateError(f"subject {matrix.subject_ids[i]}: {exc.detail}") from exc
    return FeatureMatrix(
        data=scaled,
        subject_ids=list(matrix.subject_ids),
        modality_tag=matrix.modality_tag,
        column_index=matrix.column_index,
        dropped_columns=list(matrix.dropped_columns),
    )


def standardize_columns(matrix: FeatureMatrix) -> FeatureMatrix:
    """Center columns and scale to unit sample sd; constant columns are dropped."""
    scaler = Standardizer.fit(matrix.data)
    if scaler.columns.size == 0:
        raise DegenerateError("every column is constant; nothing left to standardize")
    dropped = [int(matrix.column_index[j]) for j in scaler.dropped]
    if dropped:
        logger.warning(
            "Dropping %d zero-variance column(s) from %s matrix", len(dropped), matrix.modality_tag or "feature"
        )
    return FeatureMatrix(
        data=scaler.transform(matrix.data),
        subject_ids=list(matrix.subject_ids),
        modality_tag=matrix.modality_tag,
        column_index=matrix.column_index[scaler.columns],
        dropped_columns=sorted(set(matrix.dropped_columns) | set(dropped)),
    )
