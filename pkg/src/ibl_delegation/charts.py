"""SVG charts: game length vs error level, and manager selection preferences.

Each SVG carries its plotted numbers as JSON in the document description so
scripts can check them without parsing paths.
"""

from __future__ import annotations

import csv
import html
import io
import json
from collections import defaultdict
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import IBL_MGR, RANDOM_MGR, AggregateRecord

AGGREGATE_COLUMNS = ["scenario", "level", "condition", "mean", "variance", "n_grids", "success_rate"]


def _fmt(x) -> str:
    return f"{x:.6g}"


def aggregates_csv_text(aggregates: Sequence[AggregateRecord], provenance: dict) -> str:
    buf = io.StringIO()
    for k in sorted(provenance):
        buf.write(f"# {k}={provenance[k]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_COLUMNS)
    for a in aggregates:
        w.writerow([a.scenario, a.level, a.condition, _fmt(a.mean), _fmt(a.variance), a.n_grids, _fmt(a.success_rate)])
    return buf.getvalue()


def _condition_order(condition: str) -> tuple:
    if condition.startswith("solo-"):
        return (0, condition)
    return (1 if condition == RANDOM_MGR else 2, condition)


def _save(fig, path: Path, title: str, data: dict) -> Path:
    matplotlib.rcParams["svg.hashsalt"] = "ibl-delegation"
    fig.savefig(
        path,
        format="svg",
        metadata={"Title": title, "Description": json.dumps(data, sort_keys=True), "Date": None},
    )
    plt.close(fig)
    return path


def read_chart_data(path) -> dict:
    """Recover the JSON data block embedded by :func:`emit_charts`."""
    text = Path(path).read_text()
    start = text.index("<dc:description>") + len("<dc:description>")
    end = text.index("</dc:description>", start)
    return json.loads(html.unescape(text[start:end]))


def emit_charts(
    aggregates: Sequence[AggregateRecord], summary: dict, out_dir, provenance: dict
) -> list[Path]:
    if not aggregates:
        raise ValueError("no aggregates to chart")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_scenario = defaultdict(list)
    for a in aggregates:
        by_scenario[a.scenario].append(a)

    paths = []
    for scenario, rows in sorted(by_scenario.items()):
        series = defaultdict(list)
        for a in sorted(rows, key=lambda a: a.level):
            series[a.condition].append(a)

        fig, ax = plt.subplots(figsize=(6, 4))
        data = {"provenance": provenance, "scenario": scenario, "series": {}}
        for condition in sorted(series, key=_condition_order):
            pts = series[condition]
            x = [a.level for a in pts]
            y = [a.mean for a in pts]
            sd = [a.variance**0.5 for a in pts]
            ax.plot(x, y, marker="o", label=condition)
            ax.fill_between(x, [m - s for m, s in zip(y, sd)], [m + s for m, s in zip(y, sd)], alpha=0.2)
            data["series"][condition] = {
                "level": x,
                "mean": [_fmt(v) for v in y],
                "variance": [_fmt(a.variance) for a in pts],
            }
        if scenario in summary:
            data["summary"] = summary[scenario]
        ax.set_xlabel("error states per type")
        ax.set_ylabel("mean game length")
        ax.set_title(f"Game lengths: {scenario}")
        ax.legend(fontsize="small")
        paths.append(_save(fig, out_dir / f"lengths_{scenario}.svg", f"Game lengths: {scenario}", data))

        fig, ax = plt.subplots(figsize=(6, 4))
        data = {"provenance": provenance, "scenario": scenario, "series": {}}
        ibl_rows = sorted(series.get(IBL_MGR, []), key=lambda a: a.level)
        keys = sorted({k for a in ibl_rows for k in a.selection_freq if k[0] != "plain"})
        for tag, agent in keys:
            x = [a.level for a in ibl_rows if (tag, agent) in a.selection_freq]
            y = [a.selection_freq[(tag, agent)] for a in ibl_rows if (tag, agent) in a.selection_freq]
            name = f"EA{agent}-{tag[1:]}: mgr"
            ax.plot(x, y, marker="o", label=name)
            data["series"][name] = {"level": x, "frequency": [_fmt(v) for v in y]}
        ax.axhline(0.5, color="grey", linestyle=":", label="random mgr")
        ax.set_ylim(-0.05, 1.05)
        ax.set_xlabel("error states per type")
        ax.set_ylabel("selection frequency")
        ax.set_title(f"Manager preference: {scenario}")
        ax.legend(fontsize="small")
        paths.append(
            _save(fig, out_dir / f"selection_{scenario}.svg", f"Manager preference: {scenario}", data)
        )
    return paths
