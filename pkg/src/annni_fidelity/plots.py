"""Plot command files for a sweep table.

The scripts are plain gnuplot, which keeps them readable as text and free
of a plotting dependency.  Each reads sweep.csv by column name:

    fidelity.gp   F vs alpha, vertical guides at classified drops
    levels.gp     the three lowest distinct levels, guides at crossings
    weights.gp    |C_2|^2 + |C_3|^2 vs alpha with an F inset
"""
from __future__ import annotations

import json
from pathlib import Path

from .errors import ValidationError
from .sweep import csv_columns, read_table

REQUIRED = ("alpha", "E0", "F", "gap01", "gap12", "w2", "w3")

_STYLE = {"critical": "dt 2 lc rgb 'black'", "spurious_es": "dt 4 lc rgb 'red'",
          "unmatched": "dt 3 lc rgb 'gray'", "gs": "dt 2 lc rgb 'black'",
          "es": "dt 4 lc rgb 'red'"}


def _guides(items) -> str:
    lines = []
    for alpha, kind in items:
        lines.append(f"set arrow from {alpha:.10g}, graph 0 to {alpha:.10g}, graph 1 nohead "
                     f"{_STYLE.get(kind, '')}")
    return "\n".join(lines)


def _header(csv_name: str, title: str, out_name: str) -> str:
    return (f"# {title}\n"
            "set datafile separator ','\n"
            "set datafile missing 'nan'\n"
            f"set terminal pngcairo size 900,600\n"
            f"set output '{out_name}'\n"
            f"data = '{csv_name}'\n"
            "set xlabel 'alpha'\n")


def emit_plots(csv_path, out_dir=None, report_path=None) -> list[Path]:
    csv_path = Path(csv_path)
    k, rows = read_table(csv_path)
    if not rows:
        raise ValidationError(f"{csv_path} has no data rows; no plot emitted")
    missing = [c for c in REQUIRED if c not in csv_columns(k)]
    if missing:
        raise ValidationError(f"{csv_path} lacks columns needed for plotting: {missing}")
    out_dir = Path(out_dir) if out_dir is not None else csv_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = Path(report_path) if report_path else csv_path.parent / "crossings.json"
    report = json.loads(report_path.read_text()) if report_path.exists() else {}

    drops = [(d["alpha"], d["classification"]) for d in report.get("fidelity_drops", [])]
    crossings = ([(c["alpha"], "gs") for c in report.get("gs_crossings", [])]
                 + [(c["alpha"], "es") for c in report.get("es_crossings", [])])
    rel = csv_path.resolve()
    title = f"N={report.get('n_sites', '?')}, B_x={report.get('bx', '?')}"

    fid = (_header(str(rel), f"fidelity, {title}", "fidelity.png")
           + "set ylabel 'F'\n"
           + _guides(drops) + "\n"
           + "plot data using (column('alpha')):(column('F')) with lines lw 2 title 'F'\n")

    lev = (_header(str(rel), f"lowest levels, {title}", "levels.png")
           + "set ylabel 'E'\n"
           + _guides(crossings) + "\n"
           + "plot data using (column('alpha')):(column('E0')) with lines title 'E0', \\\n"
           + "     data using (column('alpha')):(column('E0') + column('gap01')) with lines title 'E1', \\\n"
           + "     data using (column('alpha')):(column('E0') + column('gap01') + column('gap12')) "
           + "with lines title 'E2'\n")

    wts = (_header(str(rel), f"excited-state weights, {title}", "weights.png")
           + "set multiplot\n"
           + "set ylabel '|C_2|^2 + |C_3|^2'\n"
           + _guides([d for d in drops if d[1] == "spurious_es"]) + "\n"
           + "plot data using (column('alpha')):(column('w2') + column('w3')) with lines lw 2 "
           + "title '|C_2|^2+|C_3|^2'\n"
           + "unset arrow\n"
           + "set origin 0.55, 0.45\nset size 0.4, 0.4\n"
           + "set xlabel ''\nset ylabel 'F'\nunset key\n"
           + "plot data using (column('alpha')):(column('F')) with lines\n"
           + "unset multiplot\n")

    paths = []
    for name, text in (("fidelity.gp", fid), ("levels.gp", lev), ("weights.gp", wts)):
        p = out_dir / name
        p.write_text(text)
        paths.append(p)
    return paths
