"""Deterministic writers for profiles (CSV), reports (JSON) and plots (SVG)."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import core
from .analysis import InvariantReport
from .integrator import Profile, dense_eval_many, reflect_even

SCHEMA_VERSION = "1"
CSV_HEADER = "y,r,rp,rpp,w,H,residual"

SVG_WIDTH, SVG_HEIGHT = 960, 540
SVG_MARGIN = {"left": 80, "right": 30, "top": 50, "bottom": 70}
SVG_CURVE_POINTS = 1201


def _num(x: float) -> str:
    return format(float(x) + 0.0, ".17g")


def _finite_or_none(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def profile_columns(prof: Profile) -> dict:
    """All CSV columns as arrays, reflected to negative y if not already."""
    if not prof.reflected:
        prof = reflect_even(prof)
    p = prof.params
    y, r, rp, rpp = prof.y, prof.r, prof.rp, prof.rpp
    q = 1.0 + rp * rp
    H = (p.n - 1) / (r * np.sqrt(q)) - rpp / q**1.5
    residual = core.soliton_residual_with_rpp(p, prof.state(), rpp)
    return {"y": y, "r": r, "rp": rp, "rpp": rpp, "w": r - y * rp, "H": H, "residual": residual}


def emit_csv(prof: Profile, path) -> Path:
    path = Path(path)
    cols = profile_columns(prof)
    names = CSV_HEADER.split(",")
    rows = zip(*(cols[k] for k in names))
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for row in rows:
                fh.write(",".join(_num(v) for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write profile CSV {path}: {exc}") from exc
    return path


def report_to_dict(report: InvariantReport) -> dict:
    p = report.params
    ci = report.a1_ci
    return {
        "schema_version": SCHEMA_VERSION,
        "params": {"n": p.n, "lambda": p.lam, "mu": p.mu},
        "regime": report.regime.value,
        "y_max": report.y_max,
        "tolerances": {"rel": report.tolerances.rel, "abs": report.tolerances.abs},
        "eta": report.eta if report.eta is not None else p.mu / 4.0,
        "seed": report.seed,
        "termination": report.termination.value,
        "passed": report.passed,
        "y1": _finite_or_none(report.y1),
        "a1_estimate": _finite_or_none(report.a1_estimate),
        "a1_bracket": None if ci is None else [_finite_or_none(ci[0]), _finite_or_none(ci[1])],
        "delta1_observed": _finite_or_none(report.delta1_observed),
        "checks": [
            {
                "name": c.name,
                "applicable": c.applicable,
                "passed": c.passed,
                "margin": _finite_or_none(c.margin),
                "detail": c.detail,
            }
            for c in report.checks
        ],
    }


def emit_json_report(report: InvariantReport, path) -> Path:
    path = Path(path)
    text = json.dumps(report_to_dict(report), indent=2, allow_nan=False) + "\n"
    try:
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise OSError(f"cannot write report JSON {path}: {exc}") from exc
    return path


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def render_svg(prof: Profile, report: InvariantReport) -> str:
    half = prof.half if prof.reflected else prof
    p = half.params
    y_end = half.y_end
    ys = np.linspace(-y_end, y_end, SVG_CURVE_POINTS)
    if y_end > 0:
        rs, _ = dense_eval_many(half, np.abs(ys))
    else:
        rs = np.full_like(ys, half.r[0])
    r_lo, r_hi = float(np.min(rs)), float(np.max(rs))
    if r_hi - r_lo < 1e-9 * max(1.0, abs(r_hi)):
        pad = 0.5 * max(abs(r_hi), 1.0)
        r_lo, r_hi = r_hi - pad, r_hi + pad
    else:
        pad = 0.05 * (r_hi - r_lo)
        r_lo, r_hi = max(0.0, r_lo - pad), r_hi + pad

    m = SVG_MARGIN
    pw = SVG_WIDTH - m["left"] - m["right"]
    ph = SVG_HEIGHT - m["top"] - m["bottom"]
    x_span = 2 * y_end if y_end > 0 else 1.0

    def sx(y):
        return m["left"] + (y + y_end) / x_span * pw

    def sy(r):
        return m["top"] + (r_hi - r) / (r_hi - r_lo) * ph

    pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(ys, rs))
    title = (f"n={p.n}  lambda={p.lam:.12g}  mu={p.mu:.12g}  ({report.regime.value}, "
             f"{report.termination.value})")
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" '
        f'viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<!-- margins: left={m["left"]} right={m["right"]} top={m["top"]} bottom={m["bottom"]} -->',
        f'<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
        f'<rect x="{m["left"]}" y="{m["top"]}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{SVG_WIDTH / 2:.0f}" y="{m["top"] - 18}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
        f'<text x="{SVG_WIDTH / 2:.0f}" y="{SVG_HEIGHT - 20}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">y</text>',
        f'<text x="20" y="{SVG_HEIGHT / 2:.0f}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14" transform="rotate(-90 20 {SVG_HEIGHT / 2:.0f})">r(y)</text>',
    ]
    for val, anchor, x in ((-y_end, "start", sx(-y_end)), (0.0, "middle", sx(0.0)), (y_end, "end", sx(y_end))):
        out.append(f'<text x="{_fmt(x)}" y="{m["top"] + ph + 18}" text-anchor="{anchor}" '
                   f'font-family="sans-serif" font-size="12">{val:.6g}</text>')
    for val in (r_lo, r_hi):
        out.append(f'<text x="{m["left"] - 6}" y="{_fmt(sy(val) + 4)}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="12">{val:.6g}</text>')
    out.append(f'<polyline fill="none" stroke="#1f5fa8" stroke-width="2" points="{pts}"/>')
    if report.y1 is not None:
        for y1 in (-report.y1, report.y1):
            out.append(f'<line x1="{_fmt(sx(y1))}" y1="{m["top"]}" x2="{_fmt(sx(y1))}" '
                       f'y2="{m["top"] + ph}" stroke="#c0392b" stroke-dasharray="6,4"/>')
        out.append(f'<text x="{_fmt(sx(report.y1) + 6)}" y="{m["top"] + 16}" font-family="sans-serif" '
                   f'font-size="12" fill="#c0392b">y1 = {report.y1:.6g}</text>')
    if report.a1_ci is not None:
        lo, hi = report.a1_ci
        out.append(f'<text x="{m["left"] + 10}" y="{m["top"] + ph - 10}" font-family="sans-serif" '
                   f'font-size="12">lim r\' in [{lo:.6g}, {hi:.6g}]</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(prof: Profile, report: InvariantReport, path) -> Path:
    path = Path(path)
    try:
        path.write_text(render_svg(prof, report), encoding="utf-8", newline="\n")
    except OSError as exc:
        raise OSError(f"cannot write SVG {path}: {exc}") from exc
    return path
