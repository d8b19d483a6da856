import csv
import dataclasses
import io
import json
import math

import numpy as np

from widthlab.config import settings
from widthlab.services.harness import RateFit, RateRecord, SobolevTable

RECORD_COLUMNS = ("n", "epsilon_used", "measured_error", "bound_error", "cover_size", "wall_time_s")


def _number(value) -> str:
    """9 significant digits for floats, plain text for everything else, empty for None."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.9g}"
    return str(value)


def _csv(header, rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_number(v) for v in row])
    return buffer.getvalue()


def format_records_csv(records: list[RateRecord]) -> str:
    """Sweep records as CSV; wall_time_s stays empty unless timing was requested."""
    rows = [
        (r.n, float(r.epsilon_used), float(r.measured_error), float(r.bound_error), r.cover_size, r.wall_time)
        for r in sorted(records, key=lambda record: record.n)
    ]
    return _csv(RECORD_COLUMNS, rows)


def format_rows_csv(rows) -> str:
    """Any list of flat dataclass rows as CSV, columns in field order."""
    if not rows:
        return ""
    columns = [f.name for f in dataclasses.fields(rows[0])]
    return _csv(columns, ([getattr(row, c) for c in columns] for row in rows))


def _plain(value):
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def format_json(payload) -> str:
    return json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n"


def format_sobolev_table(table: SobolevTable) -> str:
    lines = [format_rows_csv(list(table.rows)).rstrip("\n")]
    extremal = table.extremal
    lines.append("")
    lines.append(f"# extremal_l1_mass,{_number(extremal.mass)}")
    lines.append(f"# oracle_mass,{_number(extremal.oracle_mass)}")
    lines.append(f"# limit_mass,{_number(extremal.limit_mass)}")
    lines.append(f"# stated_mass,{_number(extremal.stated_mass)}")
    lines.append(f"# stated_constraint_value,{_number(extremal.stated_constraint_value)}")
    return "\n".join(lines) + "\n"


def format_summary(title: str, fit: RateFit | None = None, details: dict | None = None) -> str:
    """Console summary based on IS_COMPACT_REPORT setting."""
    if settings.is_compact_report:
        return _format_compact(title, fit)
    else:
        return _format_detailed(title, fit, details or {})


def _format_compact(title: str, fit: RateFit | None) -> str:
    if fit is None:
        return title
    return f"{title}: slope {fit.slope:.3f} (theory {fit.theoretical_exponent:.3f}), r² {fit.r_squared:.3f}"


def _format_detailed(title: str, fit: RateFit | None, details: dict) -> str:
    lines = [title, "=" * len(title)]

    if fit is not None:
        lines.append("")
        lines.append("Rate fit:")
        lines.append(f"  slope       {fit.slope:.6f}")
        lines.append(f"  theoretical {fit.theoretical_exponent:.6f}")
        lines.append(f"  intercept   {fit.intercept:.6f}")
        lines.append(f"  r²          {fit.r_squared:.6f}")
        lines.append(f"  points      {fit.points_used}")
        for note in fit.excluded:
            lines.append(f"  excluded: {note}")

    if details:
        lines.append("")
        width = max(len(k) for k in details)
        for key, value in details.items():
            lines.append(f"  {key.ljust(width)}  {_number(value)}")

    return "\n".join(lines)
