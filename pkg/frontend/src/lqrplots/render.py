"""Render convergence and scaling figures from benchmark result files.

Reads only the public result schemas of the benchmark driver:

* per-iteration CSV with header ``iter,f,f_gap,grad_norm,gain_err,evals``;
* scaling CSV with header ``g,dim,estimator,iters,evals,f_gap,rel_f_gap``;
* per-run JSON summaries carrying ``spec`` and ``wall_ms``.

Rendering is read-only and deterministic: a fixed Agg backend, fixed figure
geometry, and pinned PNG metadata make identical inputs produce identical
image bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["FigureSpec", "SchemaError", "render", "PANELS"]

PANELS = ("f_gap", "J_gap", "runtime", "relative_error")

ITERATION_HEADER = "iter,f,f_gap,grad_norm,gain_err,evals"
SCALING_HEADER = "g,dim,estimator,iters,evals,f_gap,rel_f_gap"

_STYLE = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
}

_METADATA = {"Software": "lqrplots 0.1.0"}


class SchemaError(ValueError):
    """An input file does not match the benchmark result schema."""


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: input files, panel type, scales, output path."""

    inputs: tuple[str, ...]
    panel: str
    out: str
    log_y: bool = True
    log_x: bool = False
    title: str | None = None

    def __post_init__(self):
        if self.panel not in PANELS:
            raise SchemaError(f"panel must be one of {PANELS}, got {self.panel!r}")
        if not self.inputs:
            raise SchemaError("at least one input file is required")
        for path in self.inputs:
            if not Path(path).is_file():
                raise SchemaError(f"input file not found: {path}")


def _read_iteration_csv(path: str) -> dict[str, np.ndarray]:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != ITERATION_HEADER:
        got = lines[0] if lines else "<empty>"
        raise SchemaError(f"{path}: expected header {ITERATION_HEADER!r}, got {got!r}")
    names = ITERATION_HEADER.split(",")
    cols: dict[str, list[float]] = {name: [] for name in names}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(names):
            raise SchemaError(f"{path}:{lineno}: expected {len(names)} columns, got {len(parts)}")
        for name, raw in zip(names, parts):
            try:
                cols[name].append(float(raw))
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: column {name!r} is not numeric: {raw!r}") from exc
    if not cols["iter"]:
        raise SchemaError(f"{path}: no data rows")
    return {name: np.asarray(vals) for name, vals in cols.items()}


def _read_scaling_csv(path: str) -> list[dict]:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != SCALING_HEADER:
        got = lines[0] if lines else "<empty>"
        raise SchemaError(f"{path}: expected header {SCALING_HEADER!r}, got {got!r}")
    rows = []
    names = SCALING_HEADER.split(",")
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(names):
            raise SchemaError(f"{path}:{lineno}: expected {len(names)} columns, got {len(parts)}")
        row = dict(zip(names, parts))
        for key in ("g", "dim", "iters", "evals"):
            row[key] = int(row[key])
        for key in ("f_gap", "rel_f_gap"):
            try:
                row[key] = float(row[key])
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: column {key!r} is not numeric") from exc
        rows.append(row)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def _read_summary_json(path: str) -> dict:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or "wall_ms" not in payload or "spec" not in payload:
        raise SchemaError(f"{path}: summary JSON must carry 'spec' and 'wall_ms'")
    return payload


def _label(path: str) -> str:
    return Path(path).stem


def _gap_panel(spec: FigureSpec, ax, ylabel: str) -> None:
    for path in spec.inputs:
        cols = _read_iteration_csv(path)
        gaps = np.maximum(cols["f_gap"], np.finfo(float).tiny) if spec.log_y else cols["f_gap"]
        ax.plot(cols["iter"], gaps, label=_label(path))
    ax.set_xlabel("iteration")
    ax.set_ylabel(ylabel)
    if spec.log_y:
        ax.set_yscale("log")
    if spec.log_x:
        ax.set_xscale("log")
    ax.legend()


def _runtime_panel(spec: FigureSpec, ax) -> None:
    labels, values = [], []
    for path in spec.inputs:
        payload = _read_summary_json(path)
        estimator = str(payload["spec"].get("estimator", _label(path)))
        labels.append(estimator)
        values.append(float(payload["wall_ms"]))
    ax.bar(range(len(values)), values, tick_label=labels, color="#4878a8")
    ax.set_ylabel("wall time [ms]")
    if spec.log_y:
        ax.set_yscale("log")


def _relative_error_panel(spec: FigureSpec, ax) -> None:
    for path in spec.inputs:
        rows = _read_scaling_csv(path)
        estimators = sorted({row["estimator"] for row in rows})
        for estimator in estimators:
            sub = [row for row in rows if row["estimator"] == estimator]
            sub.sort(key=lambda row: row["dim"])
            ax.plot(
                [row["dim"] for row in sub],
                [max(row["rel_f_gap"], np.finfo(float).tiny) for row in sub],
                marker="o",
                label=estimator,
            )
    ax.set_xlabel("state dimension")
    ax.set_ylabel("relative objective gap")
    if spec.log_y:
        ax.set_yscale("log")
    ax.legend()


def render(spec: FigureSpec) -> Path:
    """Draw the requested panel and write a deterministic PNG.

    The ``J_gap`` panel draws the same gap column as ``f_gap`` labeled as the
    realized-cost gap (the two coincide when the objective is evaluated
    exactly rather than sampled from rollouts).
    """
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        if spec.panel == "f_gap":
            _gap_panel(spec, ax, "f(K) - f(K*)")
        elif spec.panel == "J_gap":
            _gap_panel(spec, ax, "J - J*")
        elif spec.panel == "runtime":
            _runtime_panel(spec, ax)
        else:
            _relative_error_panel(spec, ax)
        if spec.title:
            ax.set_title(spec.title)
        fig.tight_layout()
        out = Path(spec.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, format="png", metadata=_METADATA)
        plt.close(fig)
    return out
