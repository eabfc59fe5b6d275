#!/usr/bin/env python3
"""Transcribe the published multivariate results and the ablation table from
a LaTeX source document into CSV files under data/baselines/.

usage: transcribe_tables.py SOURCE.md"""
import argparse
import csv
import pathlib
import re
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent
NUM = re.compile(r"\d+\.\d+")


def table_lines(lines, label):
    end = next(i for i, l in enumerate(lines) if f"\\label{{{label}}}" in l)
    start = max(i for i in range(end) if "\\begin{tabular}" in lines[i])
    return lines[start:end]


def models_of(header):
    return [m for m in re.findall(r"\\multicolumn\{2\}\{c\|?\}\{([^}]*)\}", header) if m != "Methods"]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("source", type=pathlib.Path, help="document holding the LaTeX tables")
    lines = parser.parse_args().source.read_text().splitlines()
    out_dir = ROOT / "data" / "baselines"
    out_dir.mkdir(parents=True, exist_ok=True)

    body = table_lines(lines, "table:data-results")
    header = next(l for l in body if "Methods" in l)
    models = [m.rstrip("*") for m in models_of(header)]
    rows, dataset = [], None
    for line in body:
        m = re.match(r"\s*(?:\\multirow\{4\}\{\*\}\{(\w+)\})?\s*&\s*(\d+)\s*&(.*)", line)
        if not m:
            continue
        dataset = m.group(1) or dataset
        values = NUM.findall(m.group(3))
        if len(values) != 2 * len(models):
            sys.exit(f"{dataset}/{m.group(2)}: {len(values)} numbers for {len(models)} models")
        for k, model in enumerate(models):
            rows.append([dataset, int(m.group(2)), model, values[2 * k], values[2 * k + 1]])
    with open(out_dir / "table2.csv", "w", newline="") as f:
        f.write("# Multivariate results (MSE, MAE) as published; transcribed by scripts/transcribe_tables.py\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["dataset", "horizon", "model", "mse", "mae"])
        w.writerows(rows)

    body = table_lines(lines, "table:ablation")
    header = next(l for l in body if "Methods" in l)
    models = models_of(header)
    abl = []
    for line in body:
        m = re.match(r"\s*(\d+)\s*&(.*)", line)
        if not m:
            continue
        values = NUM.findall(m.group(2))
        for k, model in enumerate(models):
            abl.append(["ETTh1", int(m.group(1)), model, values[2 * k], values[2 * k + 1]])
    with open(out_dir / "ablation.csv", "w", newline="") as f:
        f.write("# ETTh1 multivariate ablation (MSE, MAE) as published; transcribed by scripts/transcribe_tables.py\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["dataset", "horizon", "model", "mse", "mae"])
        w.writerows(abl)
    print(f"table2.csv: {len(rows)} rows, ablation.csv: {len(abl)} rows")


if __name__ == "__main__":
    main()
