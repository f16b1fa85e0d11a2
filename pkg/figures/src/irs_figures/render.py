"""Render rate-vs-SNR figures from rmt-irs sweep CSVs.

Consumes the harness CSV format verbatim (fixed eight-column header). One
series per (input label, method) pair: Monte Carlo rows become marker-only
series, deterministic-approximation and optimized rows become lines. Output
is deterministic: rendering the same inputs twice yields byte-identical SVG.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

CSV_HEADER = [
    "config_hash", "snr_db", "method", "rate_bits_per_antenna",
    "rate_bits_total", "stderr", "wall_time_ms", "iterations",
]

# per-method line style: simulation points as markers, approximations as lines
_METHOD_STYLE = {
    "mc": dict(linestyle="none", marker="o", markersize=5, markerfacecolor="none"),
    "da": dict(linestyle="-", marker=""),
    "ao": dict(linestyle="--", marker=""),
}
_METHOD_ORDER = {"da": 0, "ao": 1, "mc": 2}
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
_SVG_HASHSALT = "irs-figures"


class SchemaError(ValueError):
    """Input CSV or figure spec does not match the documented contract."""


@dataclass(frozen=True)
class SeriesInput:
    path: str
    label: str


@dataclass(frozen=True)
class FigureSpec:
    """Inputs and presentation of one figure."""

    inputs: tuple[SeriesInput, ...]
    out_svg: str
    out_png: str
    title: str = ""
    xlabel: str = "SNR (dB)"
    ylabel: str = "rate (bits/s/Hz per antenna)"
    methods: tuple[str, ...] = ()  # empty: every method found in the CSVs

    def __post_init__(self):
        if not self.inputs:
            raise SchemaError("spec.inputs must be non-empty")


def load_spec(path: str | Path) -> FigureSpec:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except FileNotFoundError:
        raise SchemaError(f"spec file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise SchemaError(f"{path}: line {err.lineno}: {err.msg}") from None
    if not isinstance(payload, dict):
        raise SchemaError(f"{path}: top level must be an object")
    known = {"inputs", "out_svg", "out_png", "title", "xlabel", "ylabel", "methods"}
    unknown = set(payload) - known
    if unknown:
        raise SchemaError(f"{path}: unknown spec fields {sorted(unknown)}")
    for key in ("inputs", "out_svg", "out_png"):
        if key not in payload:
            raise SchemaError(f"{path}: missing required field {key!r}")
    base = path.parent

    def resolve(p: str) -> str:
        q = Path(p)
        return str(q if q.is_absolute() else base / q)

    inputs = []
    for i, entry in enumerate(payload["inputs"]):
        if not isinstance(entry, dict) or "path" not in entry or "label" not in entry:
            raise SchemaError(f"{path}: inputs[{i}] needs 'path' and 'label'")
        inputs.append(SeriesInput(path=resolve(entry["path"]), label=str(entry["label"])))
    return FigureSpec(
        inputs=tuple(inputs),
        out_svg=resolve(payload["out_svg"]),
        out_png=resolve(payload["out_png"]),
        title=payload.get("title", ""),
        xlabel=payload.get("xlabel", "SNR (dB)"),
        ylabel=payload.get("ylabel", "rate (bits/s/Hz per antenna)"),
        methods=tuple(payload.get("methods", ())),
    )


def read_rows(csv_path: str | Path) -> list[dict]:
    """Parse one sweep CSV, insisting on the exact harness header."""
    try:
        fh = open(csv_path, newline="")
    except FileNotFoundError:
        raise SchemaError(f"CSV not found: {csv_path}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{csv_path}: empty file") from None
        if header != CSV_HEADER:
            missing = [c for c in CSV_HEADER if c not in header]
            raise SchemaError(
                f"{csv_path}: header mismatch (missing columns {missing})"
                if missing else f"{csv_path}: unexpected header {header!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise SchemaError(f"{csv_path}: line {lineno}: wrong field count")
            rows.append({
                "snr_db": float(row[1]),
                "method": row[2],
                "rate": float(row[3]),
            })
    return rows


def collect_series(spec: FigureSpec) -> list[tuple[str, str, list[tuple[float, float]]]]:
    """(label, method, sorted points) per configured group; empty groups are errors."""
    series = []
    for inp in spec.inputs:
        rows = read_rows(inp.path)
        methods = spec.methods or tuple(sorted({r["method"] for r in rows},
                                               key=lambda m: _METHOD_ORDER.get(m, 9)))
        for method in methods:
            points = sorted((r["snr_db"], r["rate"]) for r in rows if r["method"] == method)
            if not points:
                raise SchemaError(f"{inp.path}: no rows for method {method!r}")
            series.append((inp.label, method, points))
    if not series:
        raise SchemaError("no series to plot")
    return series


def render(spec: FigureSpec) -> dict:
    """Write the SVG and PNG; returns {'series': [...], 'points': total}.

    Read-only over the inputs and deterministic: a rerun on identical CSVs
    produces a byte-identical SVG.
    """
    series = collect_series(spec)
    labels = list(dict.fromkeys(label for label, _, _ in series))
    color_of = {lab: _COLORS[i % len(_COLORS)] for i, lab in enumerate(labels)}

    with plt.rc_context({"svg.hashsalt": _SVG_HASHSALT}):
        fig, ax = plt.subplots(figsize=(6.4, 4.4), dpi=120)
        for label, method, points in series:
            x = [p[0] for p in points]
            y = [p[1] for p in points]
            style = _METHOD_STYLE.get(method, dict(linestyle=":"))
            ax.plot(x, y, label=f"{label} ({method})", color=color_of[label], **style)
        ax.set_xlabel(spec.xlabel)
        ax.set_ylabel(spec.ylabel)
        if spec.title:
            ax.set_title(spec.title)
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        for target in (spec.out_svg, spec.out_png):
            Path(target).parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(spec.out_svg, format="svg", metadata={"Date": None})
        fig.savefig(spec.out_png, format="png")
        plt.close(fig)

    return {
        "series": [f"{label} ({method})" for label, method, _ in series],
        "points": sum(len(p) for _, _, p in series),
    }
