"""Per-user result tables and deterministic chart files.

A report row captures the per-user outcome: user id, location,
assigned AP/wavelength/branch (1-based in reports), SINR in dB, channel
3 dB bandwidth and achievable data rate.  Charts are self-contained SVG bar
charts with a fixed 800x400 viewBox; identical rows yield byte-identical
files.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass

from .allocation import (AllocationProblem, AllocationResult, Assignment,
                         sinr)
from .channel import ChannelMatrix
from .scene import ScenarioConfig

REPORT_COLUMNS = ("user_id", "x_m", "y_m", "z_m", "access_point",
                  "wavelength", "branch", "sinr_db", "bandwidth_hz",
                  "data_rate_bps")

_RATE_RESOLUTION_HZ = 1e6


@dataclass(frozen=True)
class UserReportRow:
    user_id: int
    x_m: float
    y_m: float
    z_m: float
    access_point: int          # 1-based, table style
    wavelength: str
    branch: int                # 1-based, table style
    sinr_db: float             # rounded to 2 decimals at construction
    bandwidth_hz: float        # capped at the trace Nyquist frequency
    data_rate_bps: float


def data_rate(problem: AllocationProblem, assignment: Assignment, us: int,
              channel_bw_hz: float) -> float:
    """Largest bit rate the user's link supports, in bps.

    The rate is the largest electrical bandwidth, capped by the channel's
    3 dB bandwidth, at which the user's SINR (with receiver and shot noise
    rescaled to that bandwidth) still meets the threshold.  Found by
    bisection at 1 MHz resolution; 0 when even the smallest step fails.
    """
    if assignment.choices[us] is None:
        raise ValueError(f"user index {us} is unassigned")
    if not channel_bw_hz > 0:
        raise ValueError("channel bandwidth must be positive")
    thr = problem.sinr_threshold_linear

    def meets(b_hz: float) -> bool:
        return sinr(problem.with_bandwidth(b_hz), assignment, us) >= thr

    if meets(channel_bw_hz):
        return float(channel_bw_hz)
    if not meets(_RATE_RESOLUTION_HZ):
        return 0.0
    lo = 1
    hi = int(math.floor(channel_bw_hz / _RATE_RESOLUTION_HZ))
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if meets(mid * _RATE_RESOLUTION_HZ):
            lo = mid
        else:
            hi = mid - 1
    return lo * _RATE_RESOLUTION_HZ


def build_report_rows(config: ScenarioConfig, problem: AllocationProblem,
                      result: AllocationResult, matrix: ChannelMatrix
                      ) -> list[UserReportRow]:
    """Assemble one row per user from a feasible allocation result."""
    if not result.feasible or result.assignment is None:
        raise ValueError("cannot build a report from an infeasible result")
    rows = []
    for us, choice in enumerate(result.assignment.choices):
        ap, w, b = choice
        station = config.receivers[us]
        bw = float(matrix.bandwidth_hz[us, ap, b])
        bw = min(bw, matrix.nyquist_hz)  # sentinel means "at least Nyquist"
        rate = data_rate(problem, result.assignment, us, bw)
        sinr_db = round(10.0 * math.log10(result.sinr_linear[us]), 2)
        rows.append(UserReportRow(
            user_id=station.user_id,
            x_m=float(station.position[0]),
            y_m=float(station.position[1]),
            z_m=float(station.position[2]),
            access_point=ap + 1,
            wavelength=matrix.wavelengths[w],
            branch=b + 1,
            sinr_db=sinr_db,
            bandwidth_hz=bw,
            data_rate_bps=rate,
        ))
    return rows


# ---------------------------------------------------------------------------
# Table emission and parsing
# ---------------------------------------------------------------------------

def write_csv(rows: list[UserReportRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            d = asdict(row)
            writer.writerow([_cell(d[c]) for c in REPORT_COLUMNS])


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_csv(path) -> list[UserReportRow]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != REPORT_COLUMNS:
            raise ValueError(f"unexpected report header in {path}: {header}")
        return [_row_from_cells(cells) for cells in reader]


def _row_from_cells(cells) -> UserReportRow:
    d = dict(zip(REPORT_COLUMNS, cells))
    return UserReportRow(
        user_id=int(d["user_id"]),
        x_m=float(d["x_m"]), y_m=float(d["y_m"]), z_m=float(d["z_m"]),
        access_point=int(d["access_point"]),
        wavelength=d["wavelength"],
        branch=int(d["branch"]),
        sinr_db=float(d["sinr_db"]),
        bandwidth_hz=float(d["bandwidth_hz"]),
        data_rate_bps=float(d["data_rate_bps"]),
    )


def write_json(rows: list[UserReportRow], path) -> None:
    doc = {"version": 1, "columns": list(REPORT_COLUMNS),
           "rows": [asdict(r) for r in rows]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def parse_json(path) -> list[UserReportRow]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return [UserReportRow(**r) for r in doc["rows"]]


# ---------------------------------------------------------------------------
# SVG charts
# ---------------------------------------------------------------------------

_SVG_W, _SVG_H = 800, 400
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 80, 20, 46, 56


def _svg_bar_chart(title: str, y_label: str, labels: list[str],
                   values: list[float]) -> str:
    plot_w = _SVG_W - _MARGIN_L - _MARGIN_R
    plot_h = _SVG_H - _MARGIN_T - _MARGIN_B
    v_max = max([v for v in values if math.isfinite(v)] + [0.0])
    scale = plot_h / (v_max * 1.05) if v_max > 0 else 0.0
    n = len(values)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect x="0" y="0" width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
        f'<text x="{_SVG_W / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
        f'<text x="18" y="{_MARGIN_T + plot_h / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 18 {_MARGIN_T + plot_h / 2:.1f})">{y_label}</text>',
        f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T}" x2="{_MARGIN_L}" '
        f'y2="{_MARGIN_T + plot_h}" stroke="black"/>',
        f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T + plot_h}" '
        f'x2="{_MARGIN_L + plot_w}" y2="{_MARGIN_T + plot_h}" stroke="black"/>',
    ]
    if v_max > 0:
        ticks = 5
        for k in range(ticks + 1):
            v = v_max * 1.05 * k / ticks
            y = _MARGIN_T + plot_h - v * scale
            parts.append(f'<line x1="{_MARGIN_L - 4}" y1="{y:.2f}" '
                         f'x2="{_MARGIN_L}" y2="{y:.2f}" stroke="black"/>')
            parts.append(f'<text x="{_MARGIN_L - 8}" y="{y + 4:.2f}" '
                         f'text-anchor="end" font-family="sans-serif" '
                         f'font-size="10">{v:.4g}</text>')
    if n:
        slot = plot_w / n
        bar_w = slot * 0.6
        for i, (label, value) in enumerate(zip(labels, values)):
            x = _MARGIN_L + slot * i + (slot - bar_w) / 2
            height = (value * scale) if math.isfinite(value) else plot_h
            y = _MARGIN_T + plot_h - height
            parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" '
                         f'height="{height:.2f}" fill="#3572b0"/>')
            parts.append(f'<text x="{x + bar_w / 2:.2f}" '
                         f'y="{_MARGIN_T + plot_h + 16}" text-anchor="middle" '
                         f'font-family="sans-serif" font-size="11">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


_CHART_SPECS = (
    ("bandwidth", "Channel bandwidth", "Bandwidth (GHz)",
     lambda r: r.bandwidth_hz / 1e9),
    ("sinr", "SINR", "SINR (dB)", lambda r: r.sinr_db),
    ("data_rate", "Data rate", "Rate (Gbps)",
     lambda r: r.data_rate_bps / 1e9),
)


def write_svg_charts(rows: list[UserReportRow], out_dir,
                     prefix: str = "chart") -> list[str]:
    """One bar chart per metric (bandwidth, SINR, rate); returns the paths."""
    labels = [str(r.user_id) for r in rows]
    paths = []
    for key, title, y_label, getter in _CHART_SPECS:
        path = os.path.join(out_dir, f"{prefix}_{key}.svg")
        svg = _svg_bar_chart(title, y_label, labels,
                             [float(getter(r)) for r in rows])
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(svg)
        paths.append(path)
    return paths


def emit_report(rows: list[UserReportRow], formats, out_dir,
                prefix: str = "report") -> list[str]:
    """Write the report in the requested formats; returns written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "csv":
            path = os.path.join(out_dir, f"{prefix}.csv")
            write_csv(rows, path)
            written.append(path)
        elif fmt == "json":
            path = os.path.join(out_dir, f"{prefix}.json")
            write_json(rows, path)
            written.append(path)
        elif fmt == "svg":
            written.extend(write_svg_charts(rows, out_dir))
        else:
            raise ValueError(f"unknown report format {fmt!r}")
    return written
