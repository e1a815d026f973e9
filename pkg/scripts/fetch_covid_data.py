"""Placeholder for obtaining the COVID-19 antibody dataset.

The data (100 subjects: 58 infection-negative, 42 infection-positive, one
antibody measurement each) are distributed with the supporting information
of the study that collected them. They are not redistributed here and no
download location is hard-coded. To enable the conditional acceptance check
and scripts/covid_analysis.py, save the measurements as

    data/covid_antibody.csv

with a header row ``value,group`` and group coded 0 (negative) / 1 (positive).
This script only checks that the file is present and well formed.
"""

from __future__ import annotations

import sys
from pathlib import Path

from youden_drm.core import DataError
from youden_drm.dataio import parse_dataset

TARGET = Path(__file__).resolve().parents[1] / "data" / "covid_antibody.csv"


def main() -> int:
    if not TARGET.exists():
        print(__doc__)
        print(f"missing: {TARGET}")
        return 1
    try:
        d = parse_dataset(TARGET)
    except DataError as exc:
        print(f"invalid file: {exc}")
        return 2
    print(f"ok: n0={d.n0} n1={d.n1} (expected 58 and 42)")
    return 0 if (d.n0, d.n1) == (58, 42) else 3


if __name__ == "__main__":
    sys.exit(main())
