"""On-disk formats for datasets, scores, grid results and report tables.

A dataset directory holds:

* ``telemetry.csv``  long form, one row per (sector_id, hour_index, kpi_id, value);
  a missing value is an empty field
* ``sectors.csv``    sector_id, x_km, y_km in tensor order
* ``dataset.json``   start timestamp, dimensions and holidays
* ``scoring.json``   per-KPI weights and thresholds, hot spot threshold

Every file carries ``schema_version``: JSON files as a key, delimited text as a
leading ``# schema_version=N`` comment line.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from pathlib import Path

import numpy as np
import pandas as pd

from .core import KpiDataset, ScoringConfig, build_calendar

SCHEMA_VERSION = 1
SCHEMA_LINE = f"# schema_version={SCHEMA_VERSION}\n"


class SchemaError(ValueError):
    """Input file is missing, malformed or of an unsupported schema version."""


def _check_version(found, path):
    if found != SCHEMA_VERSION:
        raise SchemaError(f"{path}: schema_version {found!r}, expected {SCHEMA_VERSION}")


def _read_schema_line(path: Path):
    with open(path, encoding="utf-8") as f:
        first = f.readline().strip()
    if not first.startswith("# schema_version="):
        raise SchemaError(f"{path}: missing schema_version header")
    try:
        _check_version(int(first.split("=", 1)[1]), path)
    except ValueError as e:
        raise SchemaError(f"{path}: bad schema header {first!r}") from e


def write_json(path, obj):
    obj = {"schema_version": SCHEMA_VERSION, **obj}
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def read_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: invalid JSON ({e})") from e
    _check_version(obj.get("schema_version"), path)
    return obj


def write_dataset(data: KpiDataset, directory, scoring: ScoringConfig | None = None):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    n, m, l = data.kpi.shape
    sector = np.repeat(data.sector_ids, m * l)
    hour = np.tile(np.repeat(np.arange(m), l), n)
    kpi_id = np.tile(np.arange(l), n * m)
    values = np.where(data.missing_mask, np.nan, data.kpi).ravel()
    frame = pd.DataFrame({"sector_id": sector, "hour_index": hour, "kpi_id": kpi_id, "value": values})
    with open(d / "telemetry.csv", "w", encoding="utf-8", newline="") as f:
        f.write(SCHEMA_LINE)
        frame.to_csv(f, index=False, na_rep="", lineterminator="\n")
    with open(d / "sectors.csv", "w", encoding="utf-8", newline="") as f:
        f.write(SCHEMA_LINE)
        pd.DataFrame(
            {"sector_id": data.sector_ids, "x_km": data.sector_coords[:, 0], "y_km": data.sector_coords[:, 1]}
        ).to_csv(f, index=False, lineterminator="\n")
    write_json(
        d / "dataset.json",
        {
            "start_timestamp": data.start_timestamp.isoformat(),
            "n_sectors": n,
            "m_hours": m,
            "l_kpis": l,
            "holidays": [h.isoformat() for h in data.holidays],
        },
    )
    if scoring is not None:
        write_scoring(scoring, d / "scoring.json")


def read_dataset(directory) -> KpiDataset:
    d = Path(directory)
    meta = read_json(d / "dataset.json")
    for name in ("telemetry.csv", "sectors.csv"):
        if not (d / name).exists():
            raise SchemaError(f"{d / name}: file not found")
        _read_schema_line(d / name)
    try:
        n, m, l = int(meta["n_sectors"]), int(meta["m_hours"]), int(meta["l_kpis"])
        start = dt.datetime.fromisoformat(meta["start_timestamp"])
        holidays = tuple(dt.date.fromisoformat(h) for h in meta.get("holidays", []))
    except (KeyError, ValueError, TypeError) as e:
        raise SchemaError(f"{d / 'dataset.json'}: {e}") from e
    sectors = pd.read_csv(d / "sectors.csv", comment="#", float_precision="round_trip")
    if list(sectors.columns) != ["sector_id", "x_km", "y_km"] or len(sectors) != n:
        raise SchemaError(f"{d / 'sectors.csv'}: expected {n} rows of sector_id,x_km,y_km")
    tele = pd.read_csv(
        d / "telemetry.csv",
        comment="#",
        float_precision="round_trip",
        dtype={"sector_id": np.int64, "hour_index": np.int64, "kpi_id": np.int64, "value": np.float64},
    )
    if list(tele.columns) != ["sector_id", "hour_index", "kpi_id", "value"]:
        raise SchemaError(f"{d / 'telemetry.csv'}: unexpected columns {list(tele.columns)}")
    ids = sectors["sector_id"].to_numpy(np.int64)
    pos = pd.Series(np.arange(n), index=ids)
    try:
        si = pos.loc[tele["sector_id"].to_numpy()].to_numpy()
    except KeyError as e:
        raise SchemaError(f"{d / 'telemetry.csv'}: unknown sector id {e}") from e
    hi, ki = tele["hour_index"].to_numpy(), tele["kpi_id"].to_numpy()
    if hi.min(initial=0) < 0 or hi.max(initial=0) >= m or ki.min(initial=0) < 0 or ki.max(initial=0) >= l:
        raise SchemaError(f"{d / 'telemetry.csv'}: index out of range")
    kpi = np.full((n, m, l), np.nan)
    kpi[si, hi, ki] = tele["value"].to_numpy()
    missing = np.isnan(kpi)
    coords = sectors[["x_km", "y_km"]].to_numpy(np.float64)
    try:
        return KpiDataset(
            kpi=kpi,
            missing_mask=missing,
            sector_coords=coords,
            calendar=build_calendar(start, m, holidays),
            start_timestamp=start,
            sector_ids=ids,
            holidays=holidays,
        )
    except ValueError as e:
        raise SchemaError(f"{d}: {e}") from e


def write_scoring(cfg: ScoringConfig, path):
    write_json(
        path,
        {
            "weights": cfg.weights.tolist(),
            "kpi_thresholds": cfg.kpi_thresholds.tolist(),
            "hot_threshold": cfg.hot_threshold,
        },
    )


def read_scoring(path) -> ScoringConfig:
    obj = read_json(path)
    try:
        return ScoringConfig(obj["weights"], obj["kpi_thresholds"], obj["hot_threshold"])
    except (KeyError, ValueError) as e:
        raise SchemaError(f"{path}: {e}") from e


def _clean(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for rec in records:
            row = {"schema_version": SCHEMA_VERSION, **{k: _clean(v) for k, v in rec.items()}}
            f.write(json.dumps(row, sort_keys=True, allow_nan=False) + "\n")


def read_jsonl(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaError(f"{path}:{lineno}: invalid JSON ({e})") from e
            _check_version(rec.pop("schema_version", None), f"{path}:{lineno}")
            out.append(rec)
    return out


def _fmt(v) -> str:
    v = _clean(v)
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def write_table(path, rows: list[dict], columns: list[str] | None = None):
    """Tab-separated table with a schema comment line."""
    if columns is None:
        columns = list(rows[0]) if rows else []
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(SCHEMA_LINE)
        f.write("\t".join(columns) + "\n")
        for r in rows:
            f.write("\t".join(_fmt(r.get(c)) for c in columns) + "\n")


def read_table(path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    _read_schema_line(path)
    return pd.read_csv(path, sep="\t", comment="#")
