"""Deterministic serialization: canonical JSON (sorted keys, 12 significant
digits) and stable CSV layouts."""

from __future__ import annotations

import json
from typing import Any


def _canonical(value: Any) -> Any:
    if isinstance(value, float):
        return float(f"{value:.12g}")
    if isinstance(value, dict):
        return {str(k): _canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    return value


def to_json(obj: Any) -> str:
    """Canonical JSON document; re-serializing the parsed text is byte-identical."""
    return json.dumps(_canonical(obj), sort_keys=True, separators=(",", ":")) + "\n"


REPORT_CSV_HEADER = (
    "trials,n,mean_alg_cost,stderr_alg,mean_opt_cost,stderr_opt,"
    "ratio_of_means,seed,policy,violations,exact"
)


def report_to_csv(report_dict: dict) -> str:
    cols = REPORT_CSV_HEADER.split(",")
    cells = []
    for col in cols:
        v = report_dict[col]
        if isinstance(v, float):
            cells.append(f"{v:.12g}")
        else:
            cells.append(str(v))
    return REPORT_CSV_HEADER + "\n" + ",".join(cells) + "\n"


def curve_to_csv(rows: list[tuple], header: tuple[str, ...]) -> str:
    """Rows of (x, value) pairs, e.g. ladder depth against the ratio bound."""
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(f"{v:.12g}" if isinstance(v, float) else str(v) for v in row))
    return "\n".join(out) + "\n"
