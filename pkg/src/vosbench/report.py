"""Report documents: JSON records, an aligned text table and CSV.

Scores are stored as fractions in [0, 1] and displayed as percentages with
two decimals.  Column order: J, F, J&F, F_dot, J&F_dot, then the
disappearance and reappearance subsets.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Sequence

from .metrics import SequenceReport

COLUMNS = ("J", "F", "J&F", "F_dot", "J&F_dot", "J&F_dot_d", "J&F_dot_r")


def _metric_values(r: SequenceReport) -> dict[str, float | None]:
    return {
        "J": r.j,
        "F": r.f,
        "J&F": r.jf,
        "F_dot": r.f_adapt,
        "J&F_dot": r.jf_adapt,
        "J&F_dot_d": r.jf_adapt_d,
        "J&F_dot_r": r.jf_adapt_r,
    }


def row_record(r: SequenceReport, per_frame: bool = True) -> dict[str, Any]:
    rec: dict[str, Any] = {"sequence": r.sequence, "object": r.object_id}
    rec.update(_metric_values(r))
    rec.update(frames=r.n_frames, disappear_frames=r.n_disappear, reappear_frames=r.n_reappear)
    if per_frame:
        rec["per_frame"] = [
            {"frame": s.frame, "J": s.j, "F": s.f, "F_dot": s.f_adapt,
             "gt": s.gt_present, "pred": s.pred_present}
            for s in r.frames
        ]
    return rec


def summary_record(summary: SequenceReport) -> dict[str, Any]:
    rec: dict[str, Any] = dict(_metric_values(summary))
    rec.update(rows=summary.n_rows, frames=summary.n_frames,
               disappear_frames=summary.n_disappear, reappear_frames=summary.n_reappear)
    return rec


def build_report(rows: Sequence[SequenceReport], summary: SequenceReport,
                 meta: dict[str, Any] | None = None) -> dict[str, Any]:
    return {
        "columns": list(COLUMNS),
        "meta": meta or {},
        "summary": summary_record(summary),
        "rows": [row_record(r) for r in rows],
    }


def dumps_report(doc: dict[str, Any]) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def load_report(path) -> dict[str, Any]:
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict) or "rows" not in doc or "summary" not in doc:
        raise ValueError(f"{path}: not a report document")
    return doc


def pct(value: float | None) -> str:
    return "n/a" if value is None else f"{100 * value:.2f}"


def format_table(doc: dict[str, Any]) -> str:
    """Aligned plain-text table, one line per row plus the dataset mean."""
    header = ["Sequence", "Obj", *COLUMNS]
    body = [[str(r["sequence"]), str(r["object"]), *(pct(r[c]) for c in COLUMNS)]
            for r in doc["rows"]]
    s = doc["summary"]
    body.append(["MEAN", str(s.get("rows", len(doc["rows"]))), *(pct(s[c]) for c in COLUMNS)])
    widths = [max(len(line[i]) for line in [header, *body]) for i in range(len(header))]

    def fmt(line):
        cells = [line[0].ljust(widths[0])] + [v.rjust(w) for v, w in zip(line[1:], widths[1:])]
        return "  ".join(cells).rstrip()

    rule = "-" * len(fmt(header))
    lines = [fmt(header), rule, *(fmt(b) for b in body[:-1]), rule, fmt(body[-1])]
    return "\n".join(lines) + "\n"


def format_csv(doc: dict[str, Any]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["sequence", "object", *COLUMNS, "frames", "disappear_frames", "reappear_frames"])
    for r in doc["rows"]:
        writer.writerow([r["sequence"], r["object"], *(_num(r[c]) for c in COLUMNS),
                         r["frames"], r["disappear_frames"], r["reappear_frames"]])
    s = doc["summary"]
    writer.writerow(["MEAN", "", *(_num(s[c]) for c in COLUMNS),
                     s["frames"], s["disappear_frames"], s["reappear_frames"]])
    return out.getvalue()


def _num(v: float | None) -> str:
    return "n/a" if v is None else f"{100 * v:.4f}"


def write_report(out_dir, doc: dict[str, Any], stem: str = "report") -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / f"{stem}.json", out_dir / f"{stem}.txt", out_dir / f"{stem}.csv"]
    paths[0].write_text(dumps_report(doc))
    paths[1].write_text(format_table(doc))
    paths[2].write_text(format_csv(doc))
    return paths
