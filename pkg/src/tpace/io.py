"""Dataset CSV ingestion/emission and report serialization."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .data import CONTROL, EXPERIMENTAL, TrialDataset, record_problem
from .errors import DataError
from .tipping import TippingCurvePoint, TippingReport

DATASET_COLUMNS = ("subject_id", "arm", "time_to_maintenance", "time", "event", "cutoff_time")
CURVE_COLUMNS = ("lambda", "hr_overall", "hr_phase_b", "p_one_sided", "avg_events")

REPORT_FILE = "report.json"
CURVE_FILE = "curve.csv"
SUMMARY_FILE = "summary.csv"


def fmt(value: float) -> str:
    """17 significant digits: enough for any float64 to round-trip."""
    return format(float(value), ".17g")


def _parse_time(raw: str, field: str, errors: list, row: int):
    try:
        value = float(raw)
    except ValueError:
        errors.append(f"row {row}: field {field!r}: not a number: {raw!r}")
        return None
    if not math.isfinite(value) or value < 0:
        errors.append(f"row {row}: field {field!r}: must be a finite non-negative number, got {raw!r}")
        return None
    return value


def parse_dataset_csv(path) -> TrialDataset:
    """Read and validate a dataset; any bad row rejects the whole file."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header required") from None
        missing = [c for c in DATASET_COLUMNS if c not in header]
        if missing:
            raise DataError(f"{path}: missing columns {missing}; expected header {','.join(DATASET_COLUMNS)}")
        col = {name: header.index(name) for name in DATASET_COLUMNS}

        errors: list[str] = []
        ids, exp, time, event, onset, cutoff = [], [], [], [], [], []
        seen: dict[str, int] = {}
        for row, fields in enumerate(reader, start=2):
            if not any(f.strip() for f in fields):
                continue
            if len(fields) != len(header):
                errors.append(f"row {row}: expected {len(header)} fields, got {len(fields)}")
                continue
            get = {name: fields[i].strip() for name, i in col.items()}
            n_before = len(errors)

            sid = get["subject_id"]
            if not sid:
                errors.append(f"row {row}: field 'subject_id': empty")
            elif sid in seen:
                errors.append(f"row {row}: field 'subject_id': duplicate id {sid!r} (first on row {seen[sid]})")
            arm = get["arm"]
            if arm not in (EXPERIMENTAL, CONTROL):
                errors.append(f"row {row}: field 'arm': must be {EXPERIMENTAL} or {CONTROL}, got {arm!r}")
            if get["event"] not in ("0", "1"):
                errors.append(f"row {row}: field 'event': must be 0 or 1, got {get['event']!r}")
            s = _parse_time(get["time"], "time", errors, row)
            c = _parse_time(get["cutoff_time"], "cutoff_time", errors, row)
            x = None
            if get["time_to_maintenance"] != "":
                x = _parse_time(get["time_to_maintenance"], "time_to_maintenance", errors, row)
            if len(errors) == n_before:
                problem = record_problem(arm, s, x, c)
                if problem:
                    errors.append(f"row {row}: {problem}")
            if len(errors) > n_before:
                continue
            seen[sid] = row
            ids.append(sid)
            exp.append(arm == EXPERIMENTAL)
            time.append(s)
            event.append(int(get["event"]))
            onset.append(math.nan if x is None else x)
            cutoff.append(c)

    if errors:
        shown = errors[:50]
        more = f"\n... and {len(errors) - 50} more" if len(errors) > 50 else ""
        raise DataError(f"{path}: {len(errors)} invalid row(s):\n" + "\n".join(shown) + more)
    if not ids:
        raise DataError(f"{path}: no data rows")
    return TrialDataset(ids=ids, experimental=exp, time=time, event=event, onset=onset, cutoff=cutoff)


def write_dataset_csv(dataset: TrialDataset, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DATASET_COLUMNS)
        for k in range(len(dataset)):
            x = dataset.onset[k]
            w.writerow([
                dataset.ids[k],
                EXPERIMENTAL if dataset.experimental[k] else CONTROL,
                "" if math.isnan(x) else fmt(x),
                fmt(dataset.time[k]),
                int(dataset.event[k]),
                fmt(dataset.cutoff[k]),
            ])
    return path


def _num(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def _point_dict(pt: TippingCurvePoint) -> dict:
    return {
        "lambda": pt.lam,
        "hr_overall": _num(pt.hr_overall),
        "hr_phase_a": _num(pt.hr_phase_a),
        "hr_phase_b": _num(pt.hr_phase_b),
        "p_one_sided": _num(pt.p_one_sided),
        "p_two_sided": _num(pt.p_two_sided),
        "avg_events": _num(pt.avg_events),
        "n_replicates": pt.n_replicates,
    }


def report_to_dict(report: TippingReport) -> dict:
    tipping = {}
    for c in ("a", "b", "c"):
        lam = report.lam(c)
        if lam is None:
            continue
        tipping[c] = {
            "lambda": lam,
            "grid_lambda": report.grid_lambdas.get(c),
            "at": _point_dict(report.at[c]),
        }
    return {
        "format": "tpace-report/1",
        "effect": int(report.effect),
        "tipping_points": tipping,
        "indices": None if report.indices is None else {
            "index_a": report.indices.index_a,
            "index_b": report.indices.index_b,
        },
        "diagnostics": list(report.diagnostics),
        "config": report.config,
        "curve": [_point_dict(p) for p in report.curve],
    }


def _summary_rows(report: TippingReport) -> list[tuple[str, object]]:
    rows: list[tuple[str, object]] = [("effect", int(report.effect))]
    for c in ("a", "b", "c"):
        lam = report.lam(c)
        if lam is None:
            continue
        pt = report.at[c]
        rows += [
            (f"lambda_{c}", fmt(lam)),
            (f"grid_lambda_{c}", fmt(report.grid_lambdas[c])),
            (f"hr_at_{c}", fmt(pt.hr_overall)),
            (f"hr_phase_b_at_{c}", "" if pt.hr_phase_b is None else fmt(pt.hr_phase_b)),
            (f"p_one_sided_at_{c}", fmt(pt.p_one_sided)),
            (f"p_two_sided_at_{c}", fmt(pt.p_two_sided)),
            (f"avg_events_at_{c}", fmt(pt.avg_events)),
        ]
    if report.indices is not None:
        rows += [("index_a", fmt(report.indices.index_a)), ("index_b", fmt(report.indices.index_b))]
    return rows


def emit_report(report: TippingReport, out_dir) -> dict[str, Path]:
    """Write ``report.json``, ``curve.csv`` (one row per scanned lambda) and ``summary.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"report": out / REPORT_FILE, "curve": out / CURVE_FILE, "summary": out / SUMMARY_FILE}

    paths["report"].write_text(
        json.dumps(report_to_dict(report), indent=2, allow_nan=False) + "\n", encoding="utf-8"
    )
    with paths["curve"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for pt in report.curve:
            w.writerow([
                fmt(pt.lam),
                fmt(pt.hr_overall),
                "" if pt.hr_phase_b is None else fmt(pt.hr_phase_b),
                fmt(pt.p_one_sided),
                fmt(pt.avg_events),
            ])
    with paths["summary"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("key", "value"))
        w.writerows(_summary_rows(report))
    return paths
