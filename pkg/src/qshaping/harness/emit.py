"""Artifacts: per-curve CSVs, the summary JSON and SVG figures.

Figures are drawn on a bare :class:`matplotlib.figure.Figure` (no pyplot state) with a fixed
SVG hash salt and no date metadata, so identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .metrics import EvalRecord, LearningCurve, summarize

CSV_HEADER = ("step", "mean_return", "std_return")
SUMMARY_FILE = "summary.json"
CURVES_FIGURE = "learning_curves.svg"
IMPROVEMENT_FIGURE = "improvement.svg"

_SVG_RC = {"svg.hashsalt": "qshaping", "svg.fonttype": "none", "path.simplify": False}


def csv_name(algo_id: str, seed: int) -> str:
    return f"{algo_id}_seed{seed}.csv"


def write_csv(curve: LearningCurve, path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in curve.records:
                w.writerow([r.step, repr(r.mean_return), repr(r.std_return)])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def read_csv(path, env_id: str = "", algo_id: str = "", seed: int = 0) -> LearningCurve:
    """Curve from a CSV; episode returns are not stored, so each record keeps only its mean."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
    records = [EvalRecord(int(s), [], float(m), float(sd)) for s, m, sd in rows[1:]]
    interval = records[0].step if records else 5000
    return LearningCurve(env_id, algo_id, seed, records, interval)


def _save(fig: Figure, path: Path) -> Path:
    with matplotlib.rc_context(_SVG_RC):
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def plot_curves(curves: dict, path, title: str = "") -> Path:
    """Seed-averaged mean return per arm, shaded by the across-seed standard deviation."""
    with matplotlib.rc_context(_SVG_RC):
        fig = Figure(figsize=(6.4, 4.0))
        ax = fig.add_subplot()
        for algo_id, group in curves.items():
            n = min(len(c.records) for c in group)
            if n == 0:
                continue
            steps = np.array(group[0].steps[:n])
            means = np.array([c.means[:n] for c in group])
            mu, sd = means.mean(axis=0), means.std(axis=0)
            ax.plot(steps, mu, label=algo_id)
            if len(group) > 1:
                ax.fill_between(steps, mu - sd, mu + sd, alpha=0.2)
        ax.set_xlabel("environment steps")
        ax.set_ylabel("mean evaluation return")
        if title:
            ax.set_title(title)
        if curves:
            ax.legend(loc="lower right")
        fig.tight_layout()
    return _save(fig, Path(path))


def plot_improvement(summary_doc: dict, path) -> Path:
    """Displayed improvement per arm; arms without a number are drawn at 0 and labelled."""
    arms = summary_doc.get("arms", [])
    with matplotlib.rc_context(_SVG_RC):
        fig = Figure(figsize=(6.4, 3.2))
        ax = fig.add_subplot()
        names = [a["algo_id"] for a in arms]
        values = [a["improvement_display"] for a in arms]
        heights = [v if isinstance(v, (int, float)) else 0.0 for v in values]
        ax.bar(range(len(arms)), heights, color="tab:blue")
        for i, v in enumerate(values):
            label = f"{v:.1f}%" if isinstance(v, (int, float)) else str(v)
            ax.annotate(label, (i, heights[i]), ha="center", va="bottom", fontsize=8)
        ax.set_xticks(range(len(arms)), names)
        ax.axhline(0.0, color="black", linewidth=0.8)
        ax.set_ylabel("improvement in steps to converge (%)")
        fig.tight_layout()
    return _save(fig, Path(path))


def summary_document(summary, curves: dict, files: dict) -> dict:
    doc = summary.to_dict() if summary is not None else {"env_id": None, "peak": None,
                                                         "worst": None, "arms": []}
    doc["baselines"] = [a["algo_id"] for a in doc["arms"] if a.get("baseline")]
    doc["curves"] = [{"algo_id": algo_id, "seed": c.seed, "csv": files[id(c)]}
                     for algo_id, group in curves.items() for c in group]
    return doc


def emit(curves: dict, summary, out_dir, figures: bool = True) -> list:
    """Write CSVs, ``summary.json`` and (optionally) SVG figures into ``out_dir``.

    ``curves`` maps algo_id to a list of curves. Returns the written paths.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc.strerror or exc}") from exc
    written, files = [], {}
    for algo_id, group in curves.items():
        for c in group:
            name = csv_name(algo_id, c.seed)
            if name in files.values():
                raise ValueError(f"two curves for arm {algo_id!r} seed {c.seed}")
            p = write_csv(c, out / name)
            files[id(c)] = p.name
            written.append(p)
    doc = summary_document(summary, curves, files)
    summary_path = out / SUMMARY_FILE
    try:
        summary_path.write_text(json.dumps(doc, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {summary_path}: {exc.strerror or exc}") from exc
    written.append(summary_path)
    if figures:
        written.append(plot_curves(curves, out / CURVES_FIGURE, doc["env_id"] or ""))
        if doc["arms"]:
            written.append(plot_improvement(doc, out / IMPROVEMENT_FIGURE))
    return written


def recompute_summary(out_dir) -> dict:
    """Rebuild the summary from the emitted CSVs and the curve index in ``summary.json``."""
    out = Path(out_dir)
    doc = json.loads((out / SUMMARY_FILE).read_text())
    curves: dict = {}
    for entry in doc["curves"]:
        c = read_csv(out / entry["csv"], doc["env_id"], entry["algo_id"], entry["seed"])
        curves.setdefault(entry["algo_id"], []).append(c)
    if not curves:
        return {"env_id": doc["env_id"], "peak": None, "worst": None, "arms": []}
    return summarize(doc["env_id"], curves, doc["baselines"]).to_dict()


def stored_summary(out_dir) -> dict:
    doc = json.loads((Path(out_dir) / SUMMARY_FILE).read_text())
    return {k: doc[k] for k in ("env_id", "peak", "worst", "arms")}


def format_table(summary_doc: dict) -> str:
    """Plain-text table of the summary for terminal output."""
    lines = [f"env {summary_doc['env_id']}  peak {summary_doc['peak']}"]
    for a in summary_doc["arms"]:
        steps = a["convergence_steps"]
        disp = a["improvement_display"]
        disp = f"{disp:.1f}%" if isinstance(disp, (int, float)) else disp
        tag = " (baseline)" if a.get("baseline") else ""
        lines.append(f"  {a['algo_id']}{tag}: steps {steps}, improvement {disp}")
    return "\n".join(lines)
