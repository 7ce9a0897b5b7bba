"""
Descriptor I/O Module
Loads and saves descriptor sets in the binary (GBD1) or CSV layout
"""

import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from exceptions import DescriptorFormatError
from feature_stats import DescriptorSet, descriptor_set_from_matrix, describe

logger = logging.getLogger(__name__)

MAGIC = "GBD1"
HEADER_KEYS = ("magic", "n", "d", "has_count", "has_domain")


def _detect_format(path: Path, fmt: str = None) -> str:
    if fmt is not None:
        if fmt not in ("bin", "csv"):
            raise DescriptorFormatError(f"unknown descriptor format {fmt!r}", code="bad_format")
        return fmt
    return "csv" if path.suffix.lower() == ".csv" else "bin"


def _check_finite(matrix: np.ndarray, what: str):
    if not np.all(np.isfinite(matrix)):
        raise DescriptorFormatError(f"non-finite values in {what}", code="non_finite")


def _check_unique(ids):
    if len(set(ids)) != len(ids):
        seen, dups = set(), []
        for sid in ids:
            if sid in seen:
                dups.append(sid)
            seen.add(sid)
        raise DescriptorFormatError(f"duplicate sample ids: {dups[:5]}", code="duplicate_id")


def _load_binary(path: Path) -> DescriptorSet:
    raw = path.read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise DescriptorFormatError("missing header line", code="header_mismatch")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DescriptorFormatError(f"unreadable header: {e}", code="header_mismatch")
    if not isinstance(header, dict) or any(k not in header for k in HEADER_KEYS):
        raise DescriptorFormatError(f"header must contain keys {HEADER_KEYS}", code="header_mismatch")
    if header["magic"] != MAGIC:
        raise DescriptorFormatError(f"bad magic {header['magic']!r}, expected {MAGIC!r}", code="bad_magic")

    n, d = header["n"], header["d"]
    if not (isinstance(n, int) and isinstance(d, int)) or n < 0 or d < 1:
        raise DescriptorFormatError(f"invalid shape n={n}, d={d}", code="header_mismatch")
    has_count, has_domain = bool(header["has_count"]), bool(header["has_domain"])

    payload = raw[newline + 1:]
    expected = 4 * (n * d + (n if has_count else 0) + (n if has_domain else 0))
    if len(payload) != expected:
        raise DescriptorFormatError(
            f"payload size mismatch: header n={n}, d={d} needs {expected} bytes, found {len(payload)}",
            code="payload_size_mismatch")

    offset = 0
    Z = np.frombuffer(payload, dtype="<f4", count=n * d, offset=offset).reshape(n, d)
    offset += 4 * n * d
    counts = None
    if has_count:
        counts = np.frombuffer(payload, dtype="<f4", count=n, offset=offset)
        offset += 4 * n
        _check_finite(counts, "counts")
    domains = None
    if has_domain:
        domains = np.frombuffer(payload, dtype="<i4", count=n, offset=offset)
    _check_finite(Z, "descriptor payload")

    return descriptor_set_from_matrix(Z.astype(np.float64),
                                      gt_counts=None if counts is None else counts.astype(np.float64),
                                      true_domains=None if domains is None else domains.astype(np.int64))


def _save_binary(dset: DescriptorSet, path: Path):
    header = {
        "magic": MAGIC,
        "n": dset.N,
        "d": dset.D,
        "has_count": dset.has_count,
        "has_domain": dset.has_domain,
    }
    chunks = [json.dumps(header, separators=(",", ":")).encode("utf-8") + b"\n",
              dset.matrix.astype("<f4").tobytes()]
    if dset.has_count:
        chunks.append(dset.gt_counts.astype("<f4").tobytes())
    if dset.has_domain:
        chunks.append(dset.true_domains.astype("<i4").tobytes())
    path.write_bytes(b"".join(chunks))


def _check_row_arity(path: Path, width: int):
    # pandas pads short rows, so field counts are checked on the raw lines
    for line_no, line in enumerate(path.read_text().splitlines()[1:], start=2):
        if not line.strip() or '"' in line:
            continue
        fields = line.count(",") + 1
        if fields != width:
            raise DescriptorFormatError(f"row arity mismatch on line {line_no}: {fields} fields, "
                                        f"header has {width}", code="row_arity_mismatch")


def _load_csv(path: Path) -> DescriptorSet:
    try:
        # header=None: column count is fixed by the header line, longer rows fail to parse
        table = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, na_filter=False)
    except pd.errors.ParserError as e:
        raise DescriptorFormatError(f"row arity mismatch: {e}", code="row_arity_mismatch")
    except pd.errors.EmptyDataError:
        raise DescriptorFormatError("empty CSV file", code="header_mismatch")

    columns = [str(c) for c in table.iloc[0].tolist()]
    df = table.iloc[1:].reset_index(drop=True)
    df.columns = columns
    if not columns or columns[0] != "id":
        raise DescriptorFormatError("CSV header must start with 'id'", code="header_mismatch")
    z_cols = [c for c in columns[1:] if c.startswith("z")]
    if [f"z{j}" for j in range(len(z_cols))] != columns[1:1 + len(z_cols)] or not z_cols:
        raise DescriptorFormatError("CSV header must list z0..z{D-1} after 'id'", code="header_mismatch")
    extra = columns[1 + len(z_cols):]
    if extra not in ([], ["count"], ["domain"], ["count", "domain"]):
        raise DescriptorFormatError(f"unexpected trailing columns {extra}", code="header_mismatch")

    _check_row_arity(path, len(columns))

    try:
        Z = df[z_cols].apply(pd.to_numeric).to_numpy(dtype=np.float64)
        counts = df["count"].astype(np.float64).to_numpy() if "count" in extra else None
        domains = df["domain"].astype(np.int64).to_numpy() if "domain" in extra else None
    except ValueError as e:
        raise DescriptorFormatError(f"unparseable value: {e}", code="non_finite")
    _check_finite(Z, "descriptor values")
    if counts is not None:
        _check_finite(counts, "counts")

    ids = df["id"].tolist()
    _check_unique(ids)
    return descriptor_set_from_matrix(Z, sample_ids=ids, gt_counts=counts, true_domains=domains)


def _save_csv(dset: DescriptorSet, path: Path):
    df = pd.DataFrame(dset.matrix, columns=[f"z{j}" for j in range(dset.D)])
    df.insert(0, "id", dset.sample_ids)
    if dset.has_count:
        df["count"] = dset.gt_counts
    if dset.has_domain:
        df["domain"] = dset.true_domains
    df.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")


def load_descriptors(path, fmt: str = None) -> DescriptorSet:
    """
    Load a descriptor file

    Args:
        path: file path; `.csv` selects the CSV layout unless fmt is given
        fmt: 'bin' or 'csv'

    Returns:
        DescriptorSet in file order
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Descriptor file not found: {path}")
    fmt = _detect_format(path, fmt)
    dset = _load_csv(path) if fmt == "csv" else _load_binary(path)
    logger.debug("loaded %d descriptors (D=%d) from %s", dset.N, dset.D, path)
    return dset


def save_descriptors(dset: DescriptorSet, path, fmt: str = None):
    """Write a descriptor set; binary stores float32, CSV stores 10 significant digits"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fmt = _detect_format(path, fmt)
    if fmt == "csv":
        _save_csv(dset, path)
    else:
        _save_binary(dset, path)


class DescriptorLoader:
    """
    Descriptor loader that remembers what it loaded for later reporting
    """

    def __init__(self, fmt: str = None):
        self.fmt = fmt
        self.data_info = {}

    def load(self, path) -> DescriptorSet:
        dset = load_descriptors(path, fmt=self.fmt)
        self.data_info = self.get_data_info(dset)
        self.data_info['path'] = str(path)
        return dset

    def get_data_info(self, dset: DescriptorSet) -> dict:
        return describe(dset)
