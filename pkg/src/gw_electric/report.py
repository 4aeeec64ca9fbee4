"""Markdown, CSV and SVG summaries of stored runs.

Plots are written as plain SVG so the package needs no plotting library;
every number is formatted with a fixed precision, which keeps the output
byte-stable for identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import MissingRun
from .harness import CSV_COLUMNS, ResultRecord, load_result

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


@dataclass
class Curve:
    label: str
    x: np.ndarray
    y: np.ndarray
    dashed: bool = False


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick(v: float) -> str:
    return f"{v:.4g}"


def svg_plot(
    curves: Sequence[Curve],
    title: str,
    xlabel: str,
    ylabel: str,
    hlines: Sequence[tuple[str, float]] = (),
    width: int = 640,
    height: int = 400,
) -> str:
    """Render line curves and labelled horizontal reference lines as SVG."""
    left, right, top, bottom = 70, 170, 40, 50
    pw, ph = width - left - right, height - top - bottom
    xs = [c.x[np.isfinite(c.y)] for c in curves]
    ys = [c.y[np.isfinite(c.y)] for c in curves] + [np.array([v for _, v in hlines])]
    allx = np.concatenate(xs) if xs else np.array([0.0, 1.0])
    ally = np.concatenate(ys) if ys else np.array([0.0, 1.0])
    if allx.size == 0:
        allx = np.array([0.0, 1.0])
    if ally.size == 0:
        ally = np.array([0.0, 1.0])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    pad = 0.05 * (y1 - y0) if y1 > y0 else max(abs(y0) * 0.05, 0.5)
    y0, y1 = y0 - pad, y1 + pad

    def sx(v):
        return left + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return top + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{_fmt(sx(xv))}" y="{top + ph + 16}" text-anchor="middle">{_tick(xv)}</text>')
        out.append(f'<text x="{left - 6}" y="{_fmt(sy(yv) + 4)}" text-anchor="end">{_tick(yv)}</text>')
        out.append(
            f'<line x1="{left}" y1="{_fmt(sy(yv))}" x2="{left + pw}" y2="{_fmt(sy(yv))}" stroke="#e0e0e0"/>'
        )
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    legend_y = top + 10
    for k, (label, v) in enumerate(hlines):
        out.append(
            f'<line x1="{left}" y1="{_fmt(sy(v))}" x2="{left + pw}" y2="{_fmt(sy(v))}" '
            f'stroke="black" stroke-dasharray="6 4"/>'
        )
        out.append(f'<text x="{left + pw + 8}" y="{legend_y}">{escape(label)}</text>')
        legend_y += 16
    for k, c in enumerate(curves):
        color = PALETTE[k % len(PALETTE)]
        keep = np.isfinite(c.y)
        pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(c.x[keep], c.y[keep]))
        dash = ' stroke-dasharray="3 3"' if c.dashed else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        out.append(
            f'<line x1="{left + pw + 8}" y1="{legend_y - 4}" x2="{left + pw + 28}" y2="{legend_y - 4}" '
            f'stroke="{color}" stroke-width="2"{dash}/>'
        )
        out.append(f'<text x="{left + pw + 32}" y="{legend_y}">{escape(c.label)}</text>')
        legend_y += 16
    out.append("</svg>")
    return "\n".join(out) + "\n"


def resolve_run(ref: str, runs_dir="out") -> ResultRecord:
    """Load a run from a directory, a ``result.json`` path or a bare run id."""
    for cand in (Path(ref), Path(runs_dir) / ref):
        if cand.is_dir() and (cand / "result.json").exists():
            return load_result(cand)
        if cand.is_file():
            return load_result(cand)
    raise MissingRun(f"no stored run {ref!r} (looked in {runs_dir})")


def _label(rec: ResultRecord) -> str:
    lam = rec.derived.get("lambda", {}).get("lambda") if rec.mode == "lambda" else None
    base = f"seed {rec.provenance.get('seed')}"
    return f"{base}, lambda {lam:g}" if lam is not None else base


def _c1(rec: ResultRecord):
    consts = rec.derived.get("pool", {}).get("constants") or rec.derived.get("constants")
    return None if not consts else consts["c1"], consts


def build_report(records: Sequence[ResultRecord]) -> dict[str, str]:
    """Return ``{filename: content}`` for the markdown, CSV and SVG outputs."""
    files: dict[str, str] = {}
    md = ["# Run report", ""]
    md.append("| run | mode | seed | offspring | resistance |")
    md.append("|---|---|---|---|---|")
    for r in records:
        cfg = r.config
        md.append(
            f"| `{r.run_id}` | {r.mode} | {r.provenance.get('seed')} | "
            f"`{_compact(cfg.get('offspring'))}` | `{_compact(cfg.get('resistance'))}` |"
        )
    md.append("")

    # n * x_n against n
    curves, refs = [], []
    for r in records:
        if r.mode == "pool":
            n, v = r.series("n_x", "mean")
        elif r.mode == "tree":
            n, v = r.series("n_x_hat", "value")
        else:
            continue
        c1, _ = _c1(r)
        curves.append(Curve(_label(r), n.astype(float), v))
        if c1:
            ref = (f"1/c1 = {1 / c1:.4g}", 1.0 / c1)
            if ref not in refs:
                refs.append(ref)
    if curves:
        files["n_x.svg"] = svg_plot(curves, "n times mean conductance", "n", "n x_n", refs)
        md += ["## Conductance scaling", "", "![n x_n](n_x.svg)", ""]
        for ref in refs:
            md.append(f"- reference {ref[0]}")
        md.append("")

    # log correction
    curves, refs, fit_lines = [], [], []
    for r in records:
        if r.mode != "pool":
            continue
        c1, consts = _c1(r)
        if not c1:
            continue
        n, x = r.series("x", "mean")
        y = n.astype(float) ** 2 * (x - 1.0 / (c1 * n))
        logn = np.log(n.astype(float))
        curves.append(Curve(_label(r), logn, y))
        fit = r.derived.get("fit")
        if fit:
            sel = (n >= fit["n_lo"]) & (n <= fit["n_hi"])
            curves.append(
                Curve(f"fit slope {fit['slope']:.4g}", logn[sel], fit["intercept"] + fit["slope"] * logn[sel], True)
            )
            # reference slope drawn through the fitted line at the middle of the range
            mid = 0.5 * (logn[sel][0] + logn[sel][-1])
            anchor = fit["intercept"] + fit["slope"] * mid
            curves.append(
                Curve(f"reference slope {fit['target']:.4g}", logn[sel], anchor + fit["target"] * (logn[sel] - mid), True)
            )
            lo, hi = fit["slope_ci"]
            fit_lines.append(
                f"- `{r.run_id}` ({_label(r)}): slope {fit['slope']:.5g}, 95% CI [{lo:.5g}, {hi:.5g}], "
                f"reference -c4/c1^2 = {fit['target']:.5g}, fit range [{fit['n_lo']}, {fit['n_hi']}]"
                + (", noise dominates" if fit["noise_dominates"] else "")
            )
    if curves:
        files["log_correction.svg"] = svg_plot(
            curves, "second-order correction", "log n", "n^2 (x_n - 1/(c1 n))", refs
        )
        md += ["## Logarithmic correction", "", "![log correction](log_correction.svg)", ""]
        md += fit_lines + [""]

    # lambda-rescaled sequence
    curves, refs, lam_lines = [], [], []
    for r in records:
        if r.mode != "lambda":
            continue
        n, v = r.series("rescaled_x", "mean")
        curves.append(Curve(_label(r), n.astype(float), v))
        lam = r.derived["lambda"]
        ref = (f"E[1/xi] = {lam['inv_mean']:.4g}", lam["inv_mean"])
        if ref not in refs:
            refs.append(ref)
        lam_lines.append(
            f"- `{r.run_id}` (lambda {lam['lambda']:g}): limit {lam['limit']:.6g}, "
            f"last-quarter ratio deviation {lam['ratio_deviation']:.3g}"
        )
    if curves:
        files["lambda.svg"] = svg_plot(curves, "rescaled mean conductance", "n", "(lambda/m)^n x_n", refs)
        md += ["## Exponential weighting", "", "![lambda](lambda.svg)", ""] + lam_lines + [""]

    files["report.md"] = "\n".join(md)
    files["report.csv"] = _merged_csv(records)
    return files


def _compact(obj) -> str:
    if obj is None:
        return ""
    return ", ".join(f"{k}={v}" for k, v in obj.items())


def _merged_csv(records: Sequence[ResultRecord]) -> str:
    parts = [",".join(CSV_COLUMNS) + "\n"]
    for r in records:
        parts.append(r.to_csv().split("\n", 1)[1])
    return "".join(parts)


def write_report(records: Sequence[ResultRecord], out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in build_report(records).items():
        path = out / name
        path.write_text(text)
        written.append(path)
    return written

