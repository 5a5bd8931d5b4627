"""Render experiment CSVs as the four-panel benchmark figures.

Consumes the records CSV emitted by the compactnet CLI (schema below),
averages each metric over trials per (n, constraint, init) series, and draws
train loss, test loss, 1 - correlation, and recovery error against the
sample size.  ``--dump`` additionally writes the aggregated table so the
plotted means can be checked against the raw rows.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

EXPECTED_COLUMNS = [
    "trial",
    "n",
    "constraint",
    "init",
    "train_loss",
    "test_loss",
    "corr",
    "recovery_err",
    "iters",
    "seed",
    "status",
]

PANELS = {
    "train_loss": "normalized train loss",
    "test_loss": "normalized test loss",
    "one_minus_corr": "1 - correlation",
    "recovery_err": "relative recovery error",
}

AGGREGATE_COLUMNS = ["constraint", "init", "n", *PANELS, "trials"]


class SchemaError(ValueError):
    """The input CSV does not match the documented records schema."""


@dataclass(frozen=True)
class FigureSpec:
    inputs: tuple[str, ...]
    family: str  # "sparse" | "cnn", used for titles and file names
    out_dir: str
    panels: tuple[str, ...] = tuple(PANELS)
    image_format: str = "png"
    stderr_band: bool = False
    dump: bool = False

    def __post_init__(self):
        unknown = [p for p in self.panels if p not in PANELS]
        if unknown:
            raise SchemaError(f"unknown panel metric(s): {unknown}")


@dataclass
class RenderResult:
    figure_path: Path
    dump_path: Path | None
    series: list[tuple[str, str]]
    panel_count: int


def read_rows(paths) -> list[dict]:
    """Load and validate rows from one or more records CSVs."""
    rows = []
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            for column in EXPECTED_COLUMNS:
                if column not in header:
                    raise SchemaError(f"{path}: missing column {column!r}")
            rows.extend(reader)
    if not rows:
        raise SchemaError(f"no data rows in {', '.join(map(str, paths))}")
    return rows


def _metric_value(row: dict, metric: str) -> float:
    if metric == "one_minus_corr":
        return 1.0 - float(row["corr"])
    return float(row[metric])


def aggregate(rows) -> dict:
    """Mean of every panel metric per (constraint, init, n), plus the count.

    Means are plain arithmetic means over the rows present, taken with
    ``np.mean`` on the collected values.
    """
    groups: dict = {}
    for row in rows:
        key = (row["constraint"], row["init"], int(row["n"]))
        groups.setdefault(key, []).append(row)
    table = {}
    for key, members in groups.items():
        entry = {
            metric: float(np.mean([_metric_value(r, metric) for r in members]))
            for metric in PANELS
        }
        if len(members) > 1:
            entry["_stderr"] = {
                metric: float(
                    np.std([_metric_value(r, metric) for r in members], ddof=1)
                    / np.sqrt(len(members))
                )
                for metric in PANELS
            }
        entry["trials"] = len(members)
        table[key] = entry
    return table


def write_aggregate_csv(table: dict, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(AGGREGATE_COLUMNS)
        for (constraint, init, n) in sorted(table):
            entry = table[(constraint, init, n)]
            out.writerow(
                [constraint, init, n]
                + [repr(entry[m]) for m in PANELS]
                + [entry["trials"]]
            )


def render(spec: FigureSpec) -> RenderResult:
    """Draw one multi-panel figure and return where everything went."""
    rows = read_rows(spec.inputs)
    table = aggregate(rows)
    series = sorted({(c, i) for (c, i, _n) in table})

    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    ncols = 2
    nrows = (len(spec.panels) + 1) // 2
    fig, axes = plt.subplots(nrows, ncols, figsize=(5 * ncols, 3.5 * nrows))
    axes = np.atleast_1d(axes).ravel()
    for ax in axes[len(spec.panels):]:
        ax.set_visible(False)
    for ax, metric in zip(axes, spec.panels):
        for constraint, init in series:
            ns = sorted(n for (c, i, n) in table if (c, i) == (constraint, init))
            means = [table[(constraint, init, n)][metric] for n in ns]
            (line,) = ax.plot(ns, means, marker="o", label=f"{constraint}/{init}")
            if spec.stderr_band:
                err = [
                    table[(constraint, init, n)].get("_stderr", {}).get(metric, 0.0)
                    for n in ns
                ]
                lo = np.asarray(means) - np.asarray(err)
                hi = np.asarray(means) + np.asarray(err)
                ax.fill_between(ns, lo, hi, alpha=0.2, color=line.get_color())
        ax.set_xlabel("training samples n")
        ax.set_ylabel(PANELS[metric])
        ax.grid(True, alpha=0.3)
    axes[0].legend(loc="best", fontsize=8)
    fig.suptitle(f"{spec.family} experiment")
    fig.tight_layout()

    figure_path = out_dir / f"{spec.family}-panels.{spec.image_format}"
    # null Software metadata keeps repeated renders byte-identical
    fig.savefig(figure_path, dpi=120, metadata={"Software": None})
    plt.close(fig)

    dump_path = None
    if spec.dump:
        dump_path = out_dir / f"{spec.family}-aggregate.csv"
        write_aggregate_csv(table, dump_path)
    return RenderResult(
        figure_path=figure_path,
        dump_path=dump_path,
        series=series,
        panel_count=len(spec.panels),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="compactnet-plots",
        description="Render compactnet experiment CSVs as multi-panel figures.",
    )
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        help="records CSV path(s)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--family", choices=["sparse", "cnn"], required=True)
    parser.add_argument("--format", default="png", help="image format (png, pdf, svg)")
    parser.add_argument("--dump", action="store_true",
                        help="also write the aggregated means table")
    parser.add_argument("--stderr-band", action="store_true",
                        help="shade +-1 standard error around each mean")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        inputs=tuple(args.inputs),
        family=args.family,
        out_dir=args.out,
        image_format=args.format,
        stderr_band=args.stderr_band,
        dump=args.dump,
    )
    try:
        result = render(spec)
    except (SchemaError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(result.figure_path)
    if result.dump_path is not None:
        print(result.dump_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
