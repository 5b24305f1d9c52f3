"""Report emission: CSV table, JSON mirror and accuracy-vs-noise SVG charts."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from xml.sax.saxutils import escape

from .harness import BASELINE, ExperimentReport

CSV_COLUMNS = ("method", "voting", "noise_kind", "rate", "acc_mean", "acc_std", "seconds")
FORMATS = ("csv", "svg", "json")
TIMING_KEYS = ("seconds", "shared_seconds")

PALETTE = {
    "knn": "#1f77b4",
    "nnk_weights": "#d62728",
    "nnk_diam_ratio": "#2ca02c",
    "kmeans_supervised": "#9467bd",
    "kmeans_unsupervised": "#ff7f0e",
    BASELINE: "#555555",
}
DASH = {"weighted": None, "unweighted": "6,4", "none": "2,3"}


def report_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for c in report.cells:
        w.writerow([c.method, c.voting, c.noise_kind, f"{c.rate:g}", f"{c.acc_mean:.6f}", f"{c.acc_std:.6f}", f"{c.seconds:.3f}"])
    return buf.getvalue()


def report_json(report: ExperimentReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def load_report(path) -> ExperimentReport:
    return ExperimentReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def strip_timing(obj):
    """Drop wall-clock fields so two reports of the same config compare equal."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def csv_without_timing(text: str) -> str:
    rows = list(csv.reader(io.StringIO(text)))
    col = rows[0].index("seconds")
    return "\n".join(",".join(r[:col] + r[col + 1:]) for r in rows)


def accuracy_svg(report: ExperimentReport, kind: str, width=720, height=440) -> str:
    """Accuracy vs noise rate for one noise kind, mean line with a +/-std band.

    Weighted voting is drawn solid, unweighted dashed, the k-NN baseline dotted.
    """
    cells = [c for c in report.cells if c.noise_kind == kind]
    if not cells:
        raise ValueError(f"no cells for noise kind {kind!r}")
    left, right, top, bottom = 60, 210, 30, 50
    pw, ph = width - left - right, height - top - bottom
    rates = sorted({c.rate for c in cells})
    r0, r1 = rates[0], rates[-1]
    if r1 == r0:
        r1 = r0 + 1.0
    lo = min(max(0.0, c.acc_mean - c.acc_std) for c in cells)
    y0 = max(0.0, min(lo, 0.9) - 0.05)
    y0 = float(int(y0 * 10)) / 10

    def sx(r):
        return left + (r - r0) / (r1 - r0) * pw

    def sy(a):
        return top + (1.0 - (a - y0) / (1.0 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{left + pw / 2:.1f}" y="18" text-anchor="middle" font-family="sans-serif" font-size="14">'
        f"Accuracy vs. {escape(kind)} noise ({len(report.seeds)} runs, mean &#177; std)</text>",
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for r in rates:
        x = sx(r)
        out.append(f'<line x1="{x:.1f}" y1="{top + ph}" x2="{x:.1f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{top + ph + 20}" text-anchor="middle" font-family="sans-serif" font-size="11">{r * 100:g}%</text>')
    ticks = [y0 + i * (1.0 - y0) / 5 for i in range(6)]
    for t in ticks:
        y = sy(t)
        out.append(f'<line x1="{left - 5}" y1="{y:.1f}" x2="{left + pw}" y2="{y:.1f}" stroke="#dddddd"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end" font-family="sans-serif" font-size="11">{t:.2f}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">noise rate</text>')
    out.append(f'<text x="15" y="{top + ph / 2:.1f}" transform="rotate(-90 15 {top + ph / 2:.1f})" text-anchor="middle" '
               'font-family="sans-serif" font-size="12">test accuracy</text>')

    series = {}
    for c in cells:
        series.setdefault((c.method, c.voting), []).append(c)
    for i, ((method, voting), pts) in enumerate(series.items()):
        pts.sort(key=lambda c: c.rate)
        color = PALETTE.get(method, "#000000")
        upper = [(sx(c.rate), sy(min(1.0, c.acc_mean + c.acc_std))) for c in pts]
        lower = [(sx(c.rate), sy(max(y0, c.acc_mean - c.acc_std))) for c in reversed(pts)]
        band = " ".join(f"{x:.1f},{y:.1f}" for x, y in upper + lower)
        out.append(f'<polygon points="{band}" fill="{color}" fill-opacity="0.12" stroke="none"/>')
        line = " ".join(f"{sx(c.rate):.1f},{sy(c.acc_mean):.1f}" for c in pts)
        dash = DASH.get(voting)
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="2"{dash_attr}/>')
        ly = top + 10 + 18 * i
        lx = left + pw + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 28}" y2="{ly}" stroke="{color}" stroke-width="2"{dash_attr}/>')
        tag = "" if voting == "none" else (" (W)" if voting == "weighted" else " (UW)")
        out.append(f'<text x="{lx + 34}" y="{ly + 4}" font-family="sans-serif" font-size="11">{escape(method + tag)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(report: ExperimentReport, directory, formats=FORMATS) -> list[Path]:
    """Write the requested formats into ``directory``; returns the written paths."""
    formats = set(formats)
    if not formats:
        raise ValueError("no output format requested")
    unknown = formats - set(FORMATS)
    if unknown:
        raise ValueError(f"unknown output formats {sorted(unknown)}")
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    if "csv" in formats:
        p = out / "report.csv"
        p.write_text(report_csv(report), encoding="utf-8")
        written.append(p)
    if "json" in formats:
        p = out / "report.json"
        p.write_text(report_json(report), encoding="utf-8")
        written.append(p)
    if "svg" in formats:
        for kind in dict.fromkeys(c.noise_kind for c in report.cells):
            p = out / f"accuracy_{kind}.svg"
            p.write_text(accuracy_svg(report, kind), encoding="utf-8")
            written.append(p)
    return written
