"""Deterministic SVG plots from the harness CSVs only."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..errors import InvalidInputError  # noqa: E402
from .runner import read_summary, read_traces  # noqa: E402


@dataclass(frozen=True, eq=False)
class Series:
    label: str
    x: np.ndarray
    mean: np.ndarray
    half_width: np.ndarray | None


def curve_series(trace_paths) -> list:
    """Mean regret curve per trace file with a one-standard-error band (none for one trial)."""
    series = []
    for p in trace_paths:
        p = Path(p)
        traces = read_traces(p)
        if not traces:
            raise InvalidInputError(f"{p}: no trace rows")
        steps = None
        rows = []
        for t in sorted(traces):
            s, v = traces[t]
            if steps is None:
                steps = s
            elif not np.array_equal(s, steps):
                raise InvalidInputError(f"{p}: trials use different step grids")
            rows.append(v)
        V = np.array(rows)
        n = len(V)
        half = V.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else None
        label = p.stem[len("traces_"):] if p.stem.startswith("traces_") else p.stem
        series.append(Series(label, steps, V.mean(axis=0), half))
    if not series:
        raise InvalidInputError("no trace files given")
    return series


def sweep_series(summary_path) -> list:
    rows = read_summary(summary_path)
    if not rows:
        raise InvalidInputError(f"{summary_path}: summary is empty")
    out = []
    for agent in dict.fromkeys(r.agent for r in rows):
        sel = [r for r in rows if r.agent == agent]
        try:
            x = np.array([float(r.param) for r in sel])
        except (TypeError, ValueError):
            x = np.arange(len(sel), dtype=float)
        order = np.argsort(x, kind="stable")
        out.append(Series(agent, x[order], np.array([r.mean_final_regret for r in sel])[order],
                          np.array([r.std_err for r in sel])[order]))
    return out


def emit_plot(inputs, style: str, out_path, title: str | None = None) -> list:
    """Render 'curves' (trace CSVs) or 'sweep' (summary CSV) to an SVG file; returns the series drawn."""
    plt.rcParams["svg.hashsalt"] = "banditlab"
    if style == "curves":
        series = curve_series(inputs if isinstance(inputs, (list, tuple)) else [inputs])
    elif style == "sweep":
        series = sweep_series(inputs[0] if isinstance(inputs, (list, tuple)) else inputs)
    else:
        raise InvalidInputError(f"unknown plot style {style!r}")
    fig, ax = plt.subplots(figsize=(6, 4))
    for s in series:
        if style == "curves":
            ax.plot(s.x, s.mean, label=s.label)
            if s.half_width is not None:
                ax.fill_between(s.x, s.mean - s.half_width, s.mean + s.half_width, alpha=0.25)
        else:
            ax.errorbar(s.x, s.mean, yerr=s.half_width, marker="o", capsize=3, label=s.label)
    if style == "curves":
        ax.set_xlabel("time")
        ax.set_ylabel("cumulative regret")
    else:
        ax.set_xlabel("parameter")
        ax.set_ylabel("final regret")
        if np.all(np.concatenate([s.x for s in series]) > 0):
            ax.set_xscale("log")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return series
