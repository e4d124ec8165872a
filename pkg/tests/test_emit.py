import json

import pytest

from qshaping.harness import EvalRecord, LearningCurve, emit, read_csv, recompute_summary, summarize
from qshaping.harness.emit import (CURVES_FIGURE, IMPROVEMENT_FIGURE, SUMMARY_FILE, format_table,
                                   plot_curves, stored_summary, write_csv)


def curve_of(means, algo="x", seed=0):
    recs = [EvalRecord.from_returns((i + 1) * 5000, [m, m + 0.125]) for i, m in enumerate(means)]
    return LearningCurve("GridWorld", algo, seed, recs)


def study():
    curves = {
        "vanilla": [curve_of([0.0, 0.3, 0.7, 0.95], "vanilla", s) for s in range(3)],
        "shaped": [curve_of([0.2 + 0.1 * s, 0.9, 1.0, 1.0], "shaped", s) for s in range(3)],
    }
    return curves, summarize("GridWorld", curves, ["vanilla"])


def test_empty_curves(tmp_path):
    written = emit({}, None, tmp_path)
    doc = json.loads((tmp_path / SUMMARY_FILE).read_text())
    assert doc["arms"] == [] and doc["curves"] == []
    assert not list(tmp_path.glob("*.csv"))
    assert tmp_path / SUMMARY_FILE in written


def test_csv_rows(tmp_path):
    path = write_csv(curve_of([0.1, 0.2, 0.3]), tmp_path / "c.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "step,mean_return,std_return"
    assert len(lines) == 4 and lines[1].startswith("5000,")


def test_csv_round_trip(tmp_path):
    c = curve_of([0.1, 1 / 3, 2.0 ** -20])
    back = read_csv(write_csv(c, tmp_path / "c.csv"))
    assert back.means == c.means
    assert [r.std_return for r in back.records] == [r.std_return for r in c.records]


def test_bad_header(tmp_path):
    (tmp_path / "c.csv").write_text("a,b,c\n")
    with pytest.raises(ValueError):
        read_csv(tmp_path / "c.csv")


def test_files_written(tmp_path):
    curves, summary = study()
    emit(curves, summary, tmp_path)
    names = {p.name for p in tmp_path.iterdir()}
    assert {SUMMARY_FILE, CURVES_FIGURE, IMPROVEMENT_FIGURE} <= names
    assert len([n for n in names if n.endswith(".csv")]) == 6
    doc = json.loads((tmp_path / SUMMARY_FILE).read_text())
    assert {"env_id", "peak", "arms"} <= set(doc)
    assert {"algo_id", "convergence_steps", "improvement_raw",
            "improvement_display"} <= set(doc["arms"][0])


def test_svg_byte_identical(tmp_path):
    curves, summary = study()
    emit(curves, summary, tmp_path / "a")
    emit(curves, summary, tmp_path / "b")
    for name in (CURVES_FIGURE, IMPROVEMENT_FIGURE):
        a, b = (tmp_path / "a" / name).read_bytes(), (tmp_path / "b" / name).read_bytes()
        assert a == b and a.startswith(b"<?xml")


def test_summary_recomputes_from_csvs(tmp_path):
    curves, summary = study()
    emit(curves, summary, tmp_path, figures=False)
    assert recompute_summary(tmp_path) == stored_summary(tmp_path)


def test_summary_with_failed_arm_recomputes(tmp_path):
    curves = {"vanilla": [curve_of([0.0, 1.0, 0.2])],
              "flat": [curve_of([0.0, 0.0, 0.0], "flat")]}
    emit(curves, summarize("GridWorld", curves, ["vanilla"]), tmp_path, figures=False)
    doc = stored_summary(tmp_path)
    assert doc["arms"][1]["convergence_steps"] == "FAILED"
    assert recompute_summary(tmp_path) == doc


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        emit({}, None, blocker / "out")


def test_plot_single_curve(tmp_path):
    path = plot_curves({"x": [curve_of([0.0, 1.0])]}, tmp_path / "one.svg", "t")
    assert path.read_bytes().count(b"<svg") == 1


def test_format_table():
    _, summary = study()
    text = format_table(summary.to_dict())
    assert "vanilla (baseline)" in text and "shaped" in text


def test_duplicate_seed_rejected(tmp_path):
    with pytest.raises(ValueError, match="seed 0"):
        emit({"x": [curve_of([0.1]), curve_of([0.2])]}, None, tmp_path)
