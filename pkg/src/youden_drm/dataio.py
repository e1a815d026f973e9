"""CSV ingestion: one row per subject with columns ``value`` and ``group`` (0 healthy, 1 diseased)."""

from __future__ import annotations

import csv
import math
from pathlib import Path

from .core import DataError, TwoSampleData


class DataFormatError(DataError):
    pass


def parse_dataset(path, fmt: str = "csv") -> TwoSampleData:
    if fmt != "csv":
        raise DataFormatError(f"unsupported format {fmt!r}; only csv is read")
    path = Path(path)
    groups = {0: [], 1: []}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        try:
            iv, ig = header.index("value"), header.index("group")
        except ValueError:
            raise DataFormatError(f"{path}: header must contain 'value' and 'group', got {header}") from None
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                value = float(row[iv])
                code = row[ig].strip()
            except (IndexError, ValueError):
                raise DataFormatError(f"{path}:{lineno}: malformed row {row!r}") from None
            if not math.isfinite(value):
                raise DataFormatError(f"{path}:{lineno}: non-finite value {row[iv]!r}")
            if code not in ("0", "1", "0.0", "1.0"):
                raise DataFormatError(f"{path}:{lineno}: unknown group code {code!r} (expected 0 or 1)")
            groups[int(float(code))].append(value)
    for g, name in ((0, "healthy (group 0)"), (1, "diseased (group 1)")):
        if not groups[g]:
            raise DataFormatError(f"{path}: no {name} rows")
    return TwoSampleData(groups[0], groups[1])


def write_dataset(data: TwoSampleData, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["value", "group"])
        for v in data.healthy:
            w.writerow([repr(float(v)), 0])
        for v in data.diseased:
            w.writerow([repr(float(v)), 1])
